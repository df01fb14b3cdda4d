#include "semican/scan_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace semican {

// ============================================================================
// Patterns
// ============================================================================

void SensorPattern::validate() const {
  require(!elevations_deg.empty(), "pattern needs at least one elevation");
  for (std::size_t i = 1; i < elevations_deg.size(); ++i) {
    require(elevations_deg[i] > elevations_deg[i - 1], "pattern elevations must be strictly ascending");
  }
  require(azimuth_offsets_deg.empty() || azimuth_offsets_deg.size() == elevations_deg.size(),
          "azimuth offsets must match elevation count");
  require(azimuth_step_deg > 0.0, "azimuth step must be positive");
  require(hfov_deg > 0.0 && hfov_deg <= 360.0, "horizontal FOV must lie in (0, 360]");
  require(max_range > 0.0, "max range must be positive");
}

std::size_t SensorPattern::columns() const {
  return static_cast<std::size_t>(std::floor(hfov_deg / azimuth_step_deg + 1e-9));
}

Eigen::Vector3d SensorPattern::ray_direction(std::size_t ring, std::size_t column) const {
  double az = 0.5 * hfov_deg - (static_cast<double>(column) + 0.5) * azimuth_step_deg;
  if (!azimuth_offsets_deg.empty()) az += azimuth_offsets_deg[ring];
  const double el = deg2rad(elevations_deg[ring]);
  const double a = deg2rad(az);
  return {std::cos(el) * std::cos(a), std::cos(el) * std::sin(a), std::sin(el)};
}

PatternPreset pattern_preset_from_string(const std::string& name) {
  if (name == "kitti64") return PatternPreset::kitti64;
  if (name == "nuscenes32") return PatternPreset::nuscenes32;
  if (name == "waymo64") return PatternPreset::waymo64;
  if (name == "baraja_foveated") return PatternPreset::baraja_foveated;
  throw Error(ErrorCode::UnknownPreset, "unknown pattern preset '" + name + "'");
}

namespace {

std::vector<double> uniform_elevations(double top, double gap, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = top - (count - 1 - i) * gap;
  return out;
}

}  // namespace

SensorPattern make_pattern(PatternPreset preset, const PatternOverrides& overrides) {
  SensorPattern p;
  switch (preset) {
    case PatternPreset::kitti64: {
      p.name = "kitti64";
      p.kind = PatternKind::uniform_rings;
      p.nominal = SensorConfig::kitti();
      // 64 rings spaced vfov / 64, topmost at +2 deg
      p.elevations_deg = uniform_elevations(2.0, 26.8 / 64.0, 64);
      p.azimuth_step_deg = 0.08;
      break;
    }
    case PatternPreset::nuscenes32: {
      p.name = "nuscenes32";
      p.kind = PatternKind::uniform_rings;
      p.nominal = SensorConfig::nuscenes();
      p.elevations_deg = uniform_elevations(10.0, 40.0 / 32.0, 32);
      p.azimuth_step_deg = 0.16;
      break;
    }
    case PatternPreset::waymo64: {
      p.name = "waymo64";
      p.kind = PatternKind::nonuniform_rings;
      p.nominal = SensorConfig::waymo();
      // e = s * tan(t) with t evenly spaced: the gap grows as 1/cos^2 away
      // from the horizon, over [-17.6, 2.4] deg
      const double s = 8.0;
      const double t0 = std::atan(-17.6 / s);
      const double t1 = std::atan(2.4 / s);
      for (int i = 0; i < 64; ++i) p.elevations_deg.push_back(s * std::tan(t0 + (t1 - t0) * i / 63.0));
      p.azimuth_step_deg = 0.14;
      break;
    }
    case PatternPreset::baraja_foveated: {
      p.name = "baraja_foveated";
      p.kind = PatternKind::foveated_interleaved;
      p.nominal = SensorConfig::baraja();
      p.hfov_deg = 120.0;
      p.azimuth_step_deg = 0.1;
      // 21 sparse rings below, an 86-row dense band at 0.1 deg around the
      // horizon with alternate rows shifted half a column, 21 sparse rings above
      const double band_lo = -7.25;
      const double band_gap = 0.1;
      const int band_rows = 86;
      const double band_hi = band_lo + band_gap * (band_rows - 1);
      const double low_gap = (band_lo - (-20.0)) / 21.0;
      const double high_gap = (10.0 - band_hi) / 21.0;
      for (int k = 0; k < 21; ++k) {
        p.elevations_deg.push_back(-20.0 + k * low_gap);
        p.azimuth_offsets_deg.push_back(0.0);
      }
      for (int k = 0; k < band_rows; ++k) {
        p.elevations_deg.push_back(band_lo + k * band_gap);
        p.azimuth_offsets_deg.push_back(k % 2 == 1 ? 0.5 * p.azimuth_step_deg : 0.0);
      }
      for (int k = 1; k <= 21; ++k) {
        p.elevations_deg.push_back(band_hi + k * high_gap);
        p.azimuth_offsets_deg.push_back(0.0);
      }
      break;
    }
  }
  if (overrides.azimuth_step_deg) {
    p.azimuth_step_deg = *overrides.azimuth_step_deg;
    if (p.kind == PatternKind::foveated_interleaved) {
      for (auto& off : p.azimuth_offsets_deg) off = off != 0.0 ? 0.5 * p.azimuth_step_deg : 0.0;
    }
  }
  if (overrides.hfov_deg) p.hfov_deg = *overrides.hfov_deg;
  if (overrides.max_range) p.max_range = *overrides.max_range;
  p.validate();
  return p;
}

SensorPattern make_pattern(const std::string& preset, const PatternOverrides& overrides) {
  return make_pattern(pattern_preset_from_string(preset), overrides);
}

// ============================================================================
// Meshes
// ============================================================================

namespace {

void compute_vertex_normals(TriangleMesh& mesh) {
  mesh.normals.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d n =
        (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (const int v : t) mesh.normals[v] += n;
  }
  for (auto& n : mesh.normals) n = n.norm() > 0.0 ? Eigen::Vector3d(n.normalized()) : Eigen::Vector3d::UnitZ();
}

void orient_outward(TriangleMesh& mesh) {
  double volume = 0.0;
  for (const auto& t : mesh.triangles) {
    volume += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  if (volume < 0.0) {
    for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
  }
}

/// Extrudes a simple x-z profile along y, with the caps triangulated from
/// the given convex pieces (lists of profile indices).
TriangleMesh extrude_profile(const std::vector<Eigen::Vector2d>& outline,
                             const std::vector<std::vector<int>>& convex_pieces, double width) {
  TriangleMesh mesh;
  const int n = static_cast<int>(outline.size());
  for (const double y : {0.5 * width, -0.5 * width}) {
    for (const auto& q : outline) mesh.vertices.emplace_back(q.x(), y, q.y());
  }
  for (const auto& piece : convex_pieces) {
    for (std::size_t k = 1; k + 1 < piece.size(); ++k) {
      mesh.triangles.push_back({piece[0], piece[k], piece[k + 1]});
      mesh.triangles.push_back({n + piece[0], n + piece[k + 1], n + piece[k]});
    }
  }
  for (int k = 0; k < n; ++k) {
    const int a = k;
    const int b = (k + 1) % n;
    mesh.triangles.push_back({n + a, n + b, b});
    mesh.triangles.push_back({n + a, b, a});
  }
  orient_outward(mesh);
  compute_vertex_normals(mesh);
  return mesh;
}

}  // namespace

TriangleMesh car_proxy(double length, double width, double height) {
  require(length > 0.0 && width > 0.0 && height > 0.0, "car proxy dimensions must be positive");
  const double l = length, h = height;
  const double belt = -0.5 * h + 0.55 * h;
  const std::vector<Eigen::Vector2d> outline{
      {-0.5 * l, -0.5 * h},          // 0 rear bottom
      {0.5 * l, -0.5 * h},           // 1 front bottom
      {0.5 * l, belt - 0.12 * h},    // 2 hood bevel start
      {0.5 * l - 0.08 * l, belt},    // 3 hood bevel end
      {0.2 * l, belt},               // 4 windshield base
      {0.02 * l, 0.5 * h},           // 5 windshield top
      {-0.3 * l, 0.5 * h},           // 6 roof rear
      {-0.45 * l, belt},             // 7 rear window base
      {-0.5 * l, belt},              // 8 trunk
  };
  return extrude_profile(outline, {{0, 1, 2, 3, 4, 7, 8}, {4, 5, 6, 7}}, width);
}

TriangleMesh box_mesh(double length, double width, double height) {
  require(length > 0.0 && width > 0.0 && height > 0.0, "box dimensions must be positive");
  const double l = 0.5 * length, h = 0.5 * height;
  return extrude_profile({{-l, -h}, {l, -h}, {l, h}, {-l, h}}, {{0, 1, 2, 3}}, width);
}

TriangleMesh place_mesh(const TriangleMesh& mesh, const BoundingBox3& box) {
  const RigidTransform pose =
      RigidTransform::translation(box.center) * RigidTransform::rotation_z(box.yaw);
  return pose.apply(mesh);
}

void Scene::validate() const {
  std::set<int> ids;
  for (const auto& o : objects) {
    require(o.instance_id > 0, "object instance ids must be positive");
    require(ids.insert(o.instance_id).second, "object instance ids must be unique");
    o.box.validate();
  }
}

// ============================================================================
// Ray casting
// ============================================================================

namespace {

bool ray_box(const Eigen::AlignedBox3d& box, const Point3& o, const Eigen::Vector3d& inv_dir, double tmax) {
  double t0 = 0.0, t1 = tmax;
  for (int k = 0; k < 3; ++k) {
    double a = (box.min()[k] - o[k]) * inv_dir[k];
    double b = (box.max()[k] - o[k]) * inv_dir[k];
    if (a > b) std::swap(a, b);
    if (std::isnan(a) || std::isnan(b)) continue;
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

Eigen::AlignedBox3d bounds_of(const TriangleMesh& mesh) {
  Eigen::AlignedBox3d box;
  for (const auto& v : mesh.vertices) box.extend(v);
  // pad so that rays grazing a face are not culled
  box.min().array() -= 1e-9;
  box.max().array() += 1e-9;
  return box;
}

struct MeshRef {
  const TriangleMesh* mesh;
  Eigen::AlignedBox3d box;
  int object;
};

std::optional<RayHit> nearest_hit(const std::vector<MeshRef>& meshes, const Scene& scene, const Point3& o,
                                  const Eigen::Vector3d& d, double max_range) {
  const Eigen::Vector3d inv = d.cwiseInverse();
  std::optional<RayHit> best;
  double tbest = max_range;
  for (const auto& ref : meshes) {
    if (!ray_box(ref.box, o, inv, tbest)) continue;
    const auto& m = *ref.mesh;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      const auto& tri = m.triangles[t];
      const auto hit = intersect_ray_triangle<double>(o, d, m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]);
      if (hit && *hit < tbest) {
        tbest = *hit;
        best = RayHit{*hit, ref.object, static_cast<int>(t)};
      }
    }
  }
  if (scene.ground_plane && d.z() < 0.0) {
    const double t = (scene.ground_z - o.z()) / d.z();
    if (t > 0.0 && t < tbest) best = RayHit{t, -1, 0};
  }
  return best;
}

}  // namespace

std::vector<double> ray_mesh_intersections(const TriangleMesh& mesh, const Point3& origin,
                                           const Eigen::Vector3d& dir) {
  std::vector<double> out;
  for (const auto& tri : mesh.triangles) {
    if (auto t = intersect_ray_triangle<double>(origin, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                                mesh.vertices[tri[2]])) {
      out.push_back(*t);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

LabeledScan scan(const Scene& scene, const SensorPattern& pattern, const RigidTransform& world_from_sensor,
                 const ScanOptions& options) {
  scene.validate();
  pattern.validate();

  std::vector<MeshRef> meshes;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    if (!scene.objects[k].mesh.triangles.empty()) {
      meshes.push_back({&scene.objects[k].mesh, bounds_of(scene.objects[k].mesh), static_cast<int>(k)});
    }
  }
  for (std::size_t k = 0; k < scene.background.size(); ++k) {
    if (!scene.background[k].triangles.empty()) {
      meshes.push_back({&scene.background[k], bounds_of(scene.background[k]), -2 - static_cast<int>(k)});
    }
  }

  std::mt19937_64 rng(options.noise_seed);
  std::normal_distribution<double> noise(0.0, options.range_noise_sigma > 0.0 ? options.range_noise_sigma : 1.0);

  LabeledScan out;
  const Point3 origin = world_from_sensor.translation();
  const Eigen::Matrix3d rot = world_from_sensor.rotation();
  const std::size_t cols = pattern.columns();
  for (std::size_t ring = 0; ring < pattern.elevations_deg.size(); ++ring) {
    for (std::size_t col = 0; col < cols; ++col) {
      const Eigen::Vector3d local = pattern.ray_direction(ring, col);
      const Eigen::Vector3d dir = rot * local;
      const auto hit = nearest_hit(meshes, scene, origin, dir, pattern.max_range);
      if (!hit) continue;
      double range = hit->range;
      if (options.range_noise_sigma > 0.0) range = std::max(0.0, range + noise(rng));

      Eigen::Vector3d surface_n = Eigen::Vector3d::UnitZ();
      int id = 0;
      if (hit->object >= 0) {
        const auto& obj = scene.objects[hit->object];
        surface_n = obj.mesh.face_normal(hit->triangle);
        id = obj.instance_id;
      } else if (hit->object <= -2) {
        surface_n = scene.background[-2 - hit->object].face_normal(hit->triangle);
      }
      const float intensity = static_cast<float>(0.1 + 0.8 * std::abs(surface_n.dot(dir)));
      out.cloud.push_back(local * range, intensity);
      out.instance_ids.push_back(id);
      out.rings.push_back(static_cast<int>(ring));
    }
  }

  const RigidTransform sensor_from_world = world_from_sensor.inverse();
  const Eigen::Vector3d heading_ref = sensor_from_world.apply_direction(Eigen::Vector3d::UnitX());
  const double pose_yaw = std::atan2(-heading_ref.y(), heading_ref.x());
  for (const auto& obj : scene.objects) {
    BoundingBox3 b = obj.box;
    b.center = sensor_from_world.apply(obj.box.center);
    b.yaw = wrap_angle(obj.box.yaw - pose_yaw);
    out.boxes.push_back(b);
    out.box_ids.push_back(obj.instance_id);
    out.box_labels.push_back(obj.class_label);
  }
  return out;
}

// ============================================================================
// Masks
// ============================================================================

Calibration forward_camera(int width, int height, double focal, const Eigen::Vector3d& offset_in_sensor) {
  Eigen::Matrix3d r;
  r << 0, -1, 0,  //
      0, 0, -1,   //
      1, 0, 0;
  Calibration c;
  c.extrinsic = RigidTransform::from_parts(r, -r * offset_in_sensor);
  c.intrinsic << focal, 0, 0.5 * width,  //
      0, focal, 0.5 * height,            //
      0, 0, 1;
  c.width = width;
  c.height = height;
  return c;
}

namespace {

struct ProjectedTri {
  Eigen::Vector2d p[3];
  double z[3];
};

template <typename Visit>
void raster_triangle(const ProjectedTri& t, int width, int height, double grow, Visit&& visit) {
  const double umin = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()}) - grow;
  const double umax = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()}) + grow;
  const double vmin = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()}) - grow;
  const double vmax = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()}) + grow;
  const int u0 = std::max(0, static_cast<int>(std::ceil(umin - 0.5)));
  const int u1 = std::min(width - 1, static_cast<int>(std::floor(umax + 0.5)));
  const int v0 = std::max(0, static_cast<int>(std::ceil(vmin - 0.5)));
  const int v1 = std::min(height - 1, static_cast<int>(std::floor(vmax + 0.5)));
  if (u0 > u1 || v0 > v1) return;

  const double area = (t.p[1] - t.p[0]).x() * (t.p[2] - t.p[0]).y() - (t.p[1] - t.p[0]).y() * (t.p[2] - t.p[0]).x();
  if (std::abs(area) < 1e-12) return;
  const double sign = area > 0.0 ? 1.0 : -1.0;

  // edge functions e_k(q) >= -grow * |grad| select the (optionally grown) triangle
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const Eigen::Vector2d q(u, v);
      double bary[3];
      bool inside = true;
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d& a = t.p[(k + 1) % 3];
        const Eigen::Vector2d& b = t.p[(k + 2) % 3];
        const Eigen::Vector2d e = b - a;
        const double f = sign * (e.x() * (q - a).y() - e.y() * (q - a).x());
        const double slack = grow * (std::abs(e.x()) + std::abs(e.y()));
        if (f < -slack) {
          inside = false;
          break;
        }
        bary[k] = f / std::abs(area);
      }
      if (!inside) continue;
      // perspective-correct depth from barycentrics (extrapolated when grown)
      const double inv_z = bary[0] / t.z[0] + bary[1] / t.z[1] + bary[2] / t.z[2];
      const double z = inv_z > 0.0 ? 1.0 / inv_z : std::min({t.z[0], t.z[1], t.z[2]});
      visit(u, v, z, std::min({t.z[0], t.z[1], t.z[2]}));
    }
  }
}

}  // namespace

std::vector<InstanceMask> render_masks(const Scene& scene, const RigidTransform& world_from_sensor,
                                       const Calibration& camera) {
  camera.validate();
  const RigidTransform cam_from_world = camera.extrinsic * world_from_sensor.inverse();
  const int w = camera.width;
  const int h = camera.height;
  constexpr double kNear = 0.05;

  auto project = [&](const TriangleMesh& mesh, const Triangle& tri) -> std::optional<ProjectedTri> {
    ProjectedTri out;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d c = cam_from_world.apply(mesh.vertices[tri[k]]);
      if (c.z() < kNear) return std::nullopt;
      const Eigen::Vector3d pix = camera.intrinsic * c;
      out.p[k] = Eigen::Vector2d(pix.x() / pix.z(), pix.y() / pix.z());
      out.z[k] = c.z();
    }
    return out;
  };

  // exact (pixel-center) depth of the nearest surface
  std::vector<double> zbuf(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  auto fill_depth = [&](const TriangleMesh& mesh) {
    for (const auto& tri : mesh.triangles) {
      if (auto pt = project(mesh, tri)) {
        raster_triangle(*pt, w, h, 0.0, [&](int u, int v, double z, double) {
          auto& cell = zbuf[static_cast<std::size_t>(v) * w + u];
          cell = std::min(cell, z);
        });
      }
    }
  };
  for (const auto& obj : scene.objects) fill_depth(obj.mesh);
  for (const auto& bg : scene.background) fill_depth(bg);

  // silhouettes are grown by half a pixel so that every point on the visible
  // surface rounds to a foreground pixel
  std::vector<InstanceMask> masks;
  for (const auto& obj : scene.objects) {
    InstanceMask mask(w, h);
    mask.class_label = obj.class_label;
    mask.instance_id = obj.instance_id;
    mask.score = 1.0;
    for (const auto& tri : obj.mesh.triangles) {
      if (auto pt = project(obj.mesh, tri)) {
        raster_triangle(*pt, w, h, 0.5, [&](int u, int v, double, double zmin) {
          if (zmin <= zbuf[static_cast<std::size_t>(v) * w + u] + 1e-6) mask.set(u, v);
        });
      }
    }
    if (mask.foreground_count() > 0) masks.push_back(std::move(mask));
  }
  return masks;
}

}  // namespace semican
