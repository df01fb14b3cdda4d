#include "semican/simulate.hpp"

#include <cmath>
#include <random>

#include "json.hpp"

namespace semican {

namespace fs = std::filesystem;
using nlohmann::json;

RigidTransform SceneSpec::world_from_sensor() const {
  return RigidTransform::translation(Eigen::Vector3d(0.0, 0.0, sensor_height)) * RigidTransform::rotation_z(sensor_yaw);
}

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedFile, "scene spec: " + what); }

Eigen::Vector3d vec3(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 3) malformed(std::string("'") + key + "' must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

BoundingBox3 parse_box(const json& j) {
  BoundingBox3 box;
  if (!j.contains("dims")) malformed("box entry needs 'dims'");
  box.dims = vec3(j["dims"], "dims");
  box.center = j.contains("center") ? vec3(j["center"], "center") : Eigen::Vector3d::Zero();
  if (!j.contains("center") || j["center"].size() != 3) box.center.z() = 0.5 * box.dims.z();
  box.yaw = deg2rad(j.value("yaw_deg", 0.0));
  box.validate();
  return box;
}

json box_json(const BoundingBox3& b) {
  return {{"center", {b.center.x(), b.center.y(), b.center.z()}},
          {"dims", {b.dims.x(), b.dims.y(), b.dims.z()}},
          {"yaw_deg", rad2deg(b.yaw)}};
}

ObjectShape shape_from_string(const std::string& s) {
  if (s == "car") return ObjectShape::car;
  if (s == "box") return ObjectShape::box;
  if (s == "mesh") return ObjectShape::mesh;
  malformed("unknown shape '" + s + "'");
}

std::string shape_name(ObjectShape s) {
  switch (s) {
    case ObjectShape::car: return "car";
    case ObjectShape::box: return "box";
    case ObjectShape::mesh: return "mesh";
  }
  return "car";
}

/// Loads a mesh and fits its axis-aligned extent to a unit-centred box of `dims`.
TriangleMesh fitted_mesh(const fs::path& path, const Eigen::Vector3d& dims) {
  TriangleMesh mesh = read_ply_mesh(path);
  if (mesh.vertices.empty()) throw Error(ErrorCode::EmptyMesh, path.string() + " has no vertices");
  Eigen::Vector3d lo = mesh.vertices.front();
  Eigen::Vector3d hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Eigen::Vector3d mid = 0.5 * (lo + hi);
  const Eigen::Vector3d extent = (hi - lo).cwiseMax(1e-12);
  for (auto& v : mesh.vertices) v = (v - mid).cwiseQuotient(extent).cwiseProduct(dims);
  mesh.normals.clear();
  return mesh;
}

/// Uniform double in [lo, hi) from the top 53 bits, identical on every platform.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  if (!doc.is_object()) malformed("top level must be an object");
  SceneSpec spec;
  try {
    spec.pattern = doc.value("pattern", spec.pattern);
    if (doc.contains("pattern_overrides")) {
      const auto& o = doc["pattern_overrides"];
      if (o.contains("azimuth_step_deg")) spec.overrides.azimuth_step_deg = o["azimuth_step_deg"].get<double>();
      if (o.contains("hfov_deg")) spec.overrides.hfov_deg = o["hfov_deg"].get<double>();
      if (o.contains("max_range")) spec.overrides.max_range = o["max_range"].get<double>();
    }
    if (doc.contains("sensor")) {
      spec.sensor_height = doc["sensor"].value("height", spec.sensor_height);
      spec.sensor_yaw = deg2rad(doc["sensor"].value("yaw_deg", 0.0));
    }
    spec.ground_plane = doc.value("ground_plane", true);
    if (doc.contains("camera")) {
      const auto& c = doc["camera"];
      if (c.is_null() || (c.is_boolean() && !c.get<bool>())) {
        spec.camera.reset();
      } else if (c.is_object()) {
        CameraSpec cam;
        cam.width = c.value("width", cam.width);
        cam.height = c.value("height", cam.height);
        cam.focal = c.value("focal", cam.focal);
        if (c.contains("offset")) cam.offset = vec3(c["offset"], "offset");
        spec.camera = cam;
      }
    }
    for (const auto& o : doc.value("objects", json::array())) {
      SimObjectSpec obj;
      obj.shape = shape_from_string(o.value("shape", std::string("car")));
      if (obj.shape == ObjectShape::mesh) {
        if (!o.contains("mesh")) malformed("mesh object needs a 'mesh' path");
        obj.mesh_path = fs::path(o["mesh"].get<std::string>());
        if (obj.mesh_path.is_relative()) obj.mesh_path = base_dir / obj.mesh_path;
      }
      obj.box = parse_box(o);
      obj.class_label = o.value("class", obj.class_label);
      obj.instance_id = o.value("id", 0);
      spec.objects.push_back(obj);
    }
    for (const auto& w : doc.value("walls", json::array())) spec.walls.push_back(parse_box(w));
    spec.scan.range_noise_sigma = doc.value("range_noise_sigma", 0.0);
    spec.scan.noise_seed = doc.value("noise_seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    malformed(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedFile) throw;
    malformed(e.what());
  }
  return spec;
}

SceneSpec load_scene_spec(const fs::path& path) {
  return parse_scene_spec(read_text_file(path), path.parent_path());
}

std::string to_json(const SceneSpec& spec) {
  json doc;
  doc["pattern"] = spec.pattern;
  json overrides = json::object();
  if (spec.overrides.azimuth_step_deg) overrides["azimuth_step_deg"] = *spec.overrides.azimuth_step_deg;
  if (spec.overrides.hfov_deg) overrides["hfov_deg"] = *spec.overrides.hfov_deg;
  if (spec.overrides.max_range) overrides["max_range"] = *spec.overrides.max_range;
  if (!overrides.empty()) doc["pattern_overrides"] = overrides;
  doc["sensor"] = {{"height", spec.sensor_height}, {"yaw_deg", rad2deg(spec.sensor_yaw)}};
  doc["ground_plane"] = spec.ground_plane;
  if (spec.camera) {
    const auto& c = *spec.camera;
    doc["camera"] = {{"width", c.width},
                     {"height", c.height},
                     {"focal", c.focal},
                     {"offset", {c.offset.x(), c.offset.y(), c.offset.z()}}};
  } else {
    doc["camera"] = nullptr;
  }
  doc["objects"] = json::array();
  for (const auto& o : spec.objects) {
    json j = box_json(o.box);
    j["shape"] = shape_name(o.shape);
    if (o.shape == ObjectShape::mesh) j["mesh"] = o.mesh_path.string();
    j["class"] = o.class_label;
    j["id"] = o.instance_id;
    doc["objects"].push_back(j);
  }
  doc["walls"] = json::array();
  for (const auto& w : spec.walls) doc["walls"].push_back(box_json(w));
  if (spec.scan.range_noise_sigma > 0.0) {
    doc["range_noise_sigma"] = spec.scan.range_noise_sigma;
    doc["noise_seed"] = spec.scan.noise_seed;
  }
  return doc.dump(2);
}

SceneSpec random_scene_spec(std::uint64_t seed, std::size_t object_count, const std::string& pattern,
                            double min_range, double max_range) {
  require(min_range > 0.0 && max_range >= min_range, "random scene needs 0 < min_range <= max_range");
  std::mt19937_64 rng(seed);
  SceneSpec spec;
  spec.pattern = pattern;
  const double max_azimuth = deg2rad(35.0);
  for (std::size_t k = 0; k < object_count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      SimObjectSpec obj;
      obj.box.dims = {uniform(rng, 3.8, 4.8), uniform(rng, 1.6, 1.9), uniform(rng, 1.4, 1.7)};
      const double range = uniform(rng, min_range, max_range);
      const double azimuth = uniform(rng, -max_azimuth, max_azimuth);
      obj.box.center = {range * std::cos(azimuth), range * std::sin(azimuth), 0.5 * obj.box.dims.z()};
      obj.box.yaw = uniform(rng, -kPi, kPi);
      const double radius = 0.5 * obj.box.dims.head<2>().norm();
      placed = true;
      for (const auto& other : spec.objects) {
        const double other_radius = 0.5 * other.box.dims.head<2>().norm();
        if ((obj.box.center - other.box.center).head<2>().norm() < radius + other_radius + 0.5) {
          placed = false;
          break;
        }
      }
      if (placed) {
        obj.instance_id = static_cast<int>(spec.objects.size()) + 1;
        spec.objects.push_back(obj);
      }
    }
    if (!placed) {
      throw Error(ErrorCode::InvalidArgument, "cannot place " + std::to_string(object_count) +
                                                  " non-overlapping objects in the requested range band");
    }
  }
  return spec;
}

SimulatedFrame simulate_frame(const SceneSpec& spec) {
  SimulatedFrame frame;
  frame.world_from_sensor = spec.world_from_sensor();
  const SensorPattern pattern = make_pattern(spec.pattern, spec.overrides);

  Scene& scene = frame.scene;
  scene.ground_plane = spec.ground_plane;
  for (std::size_t k = 0; k < spec.objects.size(); ++k) {
    const SimObjectSpec& o = spec.objects[k];
    const Eigen::Vector3d& d = o.box.dims;
    TriangleMesh local;
    switch (o.shape) {
      case ObjectShape::car: local = car_proxy(d.x(), d.y(), d.z()); break;
      case ObjectShape::box: local = box_mesh(d.x(), d.y(), d.z()); break;
      case ObjectShape::mesh: local = fitted_mesh(o.mesh_path, d); break;
    }
    SceneObject obj;
    obj.mesh = place_mesh(local, o.box);
    obj.box = o.box;
    obj.instance_id = o.instance_id > 0 ? o.instance_id : static_cast<int>(k) + 1;
    obj.class_label = o.class_label;
    scene.objects.push_back(std::move(obj));
  }
  for (const auto& w : spec.walls) scene.background.push_back(place_mesh(box_mesh(w.dims.x(), w.dims.y(), w.dims.z()), w));
  scene.validate();

  frame.scan = scan(scene, pattern, frame.world_from_sensor, spec.scan);
  const RigidTransform sensor_from_world = frame.world_from_sensor.inverse();
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    frame.labels.push_back({frame.scan.boxes[k], scene.objects[k].class_label, 1.0});
    frame.gt_meshes.push_back(sensor_from_world.apply(scene.objects[k].mesh));
    frame.instance_ids.push_back(scene.objects[k].instance_id);
  }
  const CameraSpec c = spec.camera.value_or(CameraSpec{});
  frame.calib.camera = forward_camera(c.width, c.height, c.focal, c.offset);
  frame.calib.rect_from_lidar = frame.calib.camera.extrinsic;
  if (spec.camera) frame.masks = render_masks(scene, frame.world_from_sensor, frame.calib.camera);
  return frame;
}

void write_simulated_frame(const fs::path& root, const std::string& frame_id, const SimulatedFrame& frame) {
  for (const char* sub : {"velodyne", "calib", "label_2", "masks", "gt"}) fs::create_directories(root / sub);
  write_kitti_bin(root / "velodyne" / (frame_id + ".bin"), frame.scan.cloud);
  write_kitti_calib(root / "calib" / (frame_id + ".txt"), frame.calib);
  // six-decimal label text would clip returns lying exactly on the box faces
  std::vector<LabeledBox> padded = frame.labels;
  for (auto& lb : padded) lb.box.dims.array() += 1e-5;
  write_kitti_labels(root / "label_2" / (frame_id + ".txt"), padded, frame.calib);
  write_masks(root / "masks", frame_id, frame.masks);
  for (std::size_t k = 0; k < frame.gt_meshes.size(); ++k) {
    write_ply(root / "gt" / (frame_id + "_" + std::to_string(frame.instance_ids[k]) + ".ply"), frame.gt_meshes[k]);
  }
}

}  // namespace semican
