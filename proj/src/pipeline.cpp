#include "semican/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "json.hpp"
#include "semican/sampling.hpp"
#include "semican/scan_sim.hpp"
#include "semican/surface.hpp"

namespace semican {

using nlohmann::json;

std::string to_string(InstanceStatus status) {
  switch (status) {
    case InstanceStatus::completed: return "completed";
    case InstanceStatus::pass_through: return "pass_through";
    case InstanceStatus::skipped: return "skipped";
    case InstanceStatus::failed: return "failed";
  }
  return "skipped";
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string code_name(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return std::string(to_string(err->code()));
  return "Exception";
}

/// Hands each multiply-claimed point to the instance whose centroid is nearest
/// (lowest instance position on ties) and strips it from the others.
void resolve_overlaps(std::vector<ObjectInstance>& instances, std::vector<InstanceRecord*>& records,
                      std::size_t cloud_size) {
  std::vector<std::vector<std::uint32_t>> owners(cloud_size);
  bool any = false;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    for (const auto i : instances[k].indices) {
      owners[i].push_back(static_cast<std::uint32_t>(k));
      any = any || owners[i].size() > 1;
    }
  }
  if (!any) return;

  std::vector<Point3> centers;
  for (const auto& inst : instances) centers.push_back(centroid(inst.points.points));
  std::vector<std::vector<char>> keep(instances.size());
  for (std::size_t k = 0; k < instances.size(); ++k) keep[k].assign(instances[k].indices.size(), 1);

  for (std::size_t k = 0; k < instances.size(); ++k) {
    for (std::size_t j = 0; j < instances[k].indices.size(); ++j) {
      const auto& own = owners[instances[k].indices[j]];
      if (own.size() < 2) continue;
      ++records[k]->overlap_points;
      const Point3& p = instances[k].points.points[j];
      std::uint32_t best = own.front();
      for (const auto o : own) {
        if ((p - centers[o]).squaredNorm() < (p - centers[best]).squaredNorm()) best = o;
      }
      if (best != k) {
        keep[k][j] = 0;
        ++records[k]->overlap_lost;
      }
    }
  }
  for (std::size_t k = 0; k < instances.size(); ++k) {
    if (records[k]->overlap_lost == 0) continue;
    std::vector<std::size_t> local;
    std::vector<std::size_t> global;
    for (std::size_t j = 0; j < keep[k].size(); ++j) {
      if (keep[k][j]) {
        local.push_back(j);
        global.push_back(instances[k].indices[j]);
      }
    }
    instances[k].points = instances[k].points.select(local);
    instances[k].indices = std::move(global);
  }
}

}  // namespace

std::uint64_t frame_seed(std::uint64_t global_seed, const std::string& frame_id) {
  return splitmix64(global_seed ^ fnv1a64(frame_id));
}

FrameResult run_frame(const PointCloud& cloud, const FrameInputs& inputs, const PipelineConfig& config,
                      std::uint64_t seed) {
  config.validate();
  cloud.validate();
  const Stopwatch total;
  FrameResult result;
  FrameReport& report = result.report;
  report.frame_id = cloud.frame_id;
  report.seed = seed;
  report.input_points = cloud.size();

  // ground-plane frame: every downstream distance is measured from the shifted origin
  PointCloud shifted = cloud;
  for (auto& p : shifted.points) p.z() += config.z_offset;
  SensorConfig sensor = config.sensor;
  sensor.origin = config.shifted_origin();

  IsolationOptions options;
  options.sensor = sensor;
  options.cluster = config.cluster;
  options.mask_shrink = config.mask_shrink;
  options.min_points = config.sc.min_points;

  // --- isolation --------------------------------------------------------
  Stopwatch phase;
  IsolationResult iso;
  std::size_t input_count = 0;
  if (config.mode == IsolationMode::source_boxes) {
    std::vector<BoundingBox3> boxes;
    for (const auto& lb : inputs.boxes) {
      BoundingBox3 b = lb.box;
      b.center.z() += config.z_offset;
      boxes.push_back(b);
    }
    input_count = boxes.size();
    iso = isolate_frame(shifted, boxes, options);
  } else {
    require(inputs.camera.has_value(), "mask mode needs a camera calibration");
    Calibration camera = *inputs.camera;
    camera.extrinsic = camera.extrinsic * RigidTransform::translation(Eigen::Vector3d(0.0, 0.0, -config.z_offset));
    input_count = inputs.masks.size();
    iso = isolate_frame(shifted, inputs.masks, camera, options);
  }

  report.instances.resize(input_count);
  for (std::size_t k = 0; k < input_count; ++k) {
    InstanceRecord& rec = report.instances[k];
    rec.input_index = k;
    rec.source = config.mode == IsolationMode::source_boxes ? "box" : "mask";
    rec.class_label =
        config.mode == IsolationMode::source_boxes ? inputs.boxes[k].class_label : inputs.masks[k].class_label;
  }
  for (const auto& s : iso.skipped) {
    InstanceRecord& rec = report.instances[s.input_index];
    rec.status = InstanceStatus::skipped;
    const auto colon = s.reason.find(':');
    rec.skip_code = colon == std::string::npos ? "Error" : s.reason.substr(0, colon);
    rec.skip_reason = s.reason;
  }

  std::vector<InstanceRecord*> records;
  for (const auto& inst : iso.instances) records.push_back(&report.instances[inst.input_index]);
  resolve_overlaps(iso.instances, records, shifted.size());
  for (std::size_t k = 0; k < iso.instances.size(); ++k) {
    ObjectInstance& inst = iso.instances[k];
    InstanceRecord& rec = *records[k];
    inst.class_label = rec.class_label;
    inst.parent_frame = cloud.frame_id;
    rec.points_before = inst.points.size();
    rec.cluster_radius = inst.cluster_radius;
    if (inst.points.empty()) {
      rec.status = InstanceStatus::skipped;
      rec.skip_code = "EmptySelection";
      rec.skip_reason = "EmptySelection: every point was claimed by a nearer overlapping instance";
      continue;
    }
    inst.origin_distance = (centroid(inst.points.points) - sensor.origin).norm();
    inst.pass_through = inst.points.size() < config.sc.min_points;
    rec.origin_distance = inst.origin_distance;
    rec.points_after = rec.points_before;
    rec.status = inst.pass_through ? InstanceStatus::pass_through : InstanceStatus::completed;
  }
  report.timings.isolate_ms = phase.ms();

  // --- completion and sampling -------------------------------------------
  std::optional<SensorPattern> target_pattern;
  if (config.sampling.strategy == SamplingStrategy::virtual_lidar) target_pattern = make_pattern(config.target_pattern);

  std::vector<char> replaced(shifted.size(), 0);
  for (std::size_t k = 0; k < iso.instances.size(); ++k) {
    const ObjectInstance& inst = iso.instances[k];
    InstanceRecord& rec = *records[k];
    if (rec.status != InstanceStatus::completed) continue;
    try {
      phase = Stopwatch();
      SurfaceResult surface = complete_surface(inst, sensor.origin, config.sc);
      report.timings.complete_ms += phase.ms();
      rec.triangles = surface.mesh.triangles.size();
      rec.provenance = surface.provenance;

      phase = Stopwatch();
      SampleContext context;
      context.seed = splitmix64(seed ^ splitmix64(inst.input_index + 1));
      context.target_pattern = target_pattern ? &*target_pattern : nullptr;
      context.sensor_origin = sensor.origin;
      SampledObject sampled = sample_semi_canonical(surface.mesh, inst, sensor, config.sampling, context);
      report.timings.sample_ms += phase.ms();

      rec.beta = sampled.beta;
      rec.points_after = sampled.cloud.size();
      if (config.replace_objects) {
        for (const auto i : inst.indices) replaced[i] = 1;
      } else {
        rec.points_after += rec.points_before;
      }
      result.cloud.objects.push_back({inst.input_index, std::move(sampled.cloud), std::move(surface.mesh)});
    } catch (const std::exception& e) {
      rec.status = InstanceStatus::failed;
      rec.skip_code = code_name(e);
      rec.skip_reason = e.what();
      rec.points_after = rec.points_before;
    }
  }

  // --- assembly -----------------------------------------------------------
  SemiCanonicalCloud& out = result.cloud;
  out.background.frame_id = cloud.frame_id;
  const bool with_intensity = shifted.has_intensity();
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    if (replaced[i]) continue;
    if (with_intensity) {
      out.background.push_back(shifted.points[i], shifted.intensity[i]);
    } else {
      out.background.push_back(shifted.points[i]);
    }
  }
  out.assembled = out.background;
  out.synthetic.assign(out.background.size(), 0);
  for (const auto& obj : out.objects) {
    for (std::size_t i = 0; i < obj.samples.size(); ++i) {
      if (with_intensity) {
        out.assembled.push_back(obj.samples.points[i], obj.samples.intensity[i]);
      } else {
        out.assembled.push_back(obj.samples.points[i]);
      }
      out.synthetic.push_back(1);
    }
  }
  report.output_points = out.assembled.size();
  report.timings.total_ms = total.ms();
  return result;
}

std::string FrameReport::to_json() const {
  json insts = json::array();
  for (const auto& r : instances) {
    json j{{"input_index", r.input_index},
           {"class", r.class_label},
           {"source", r.source},
           {"status", to_string(r.status)},
           {"points_before", r.points_before},
           {"points_after", r.points_after},
           {"origin_distance", r.origin_distance},
           {"cluster_radius", r.cluster_radius},
           {"beta", r.beta},
           {"triangles", r.triangles},
           {"provenance", r.provenance},
           {"overlap_points", r.overlap_points},
           {"overlap_lost", r.overlap_lost}};
    if (!r.skip_code.empty()) {
      j["skip_code"] = r.skip_code;
      j["skip_reason"] = r.skip_reason;
    }
    insts.push_back(std::move(j));
  }
  json doc{{"frame_id", frame_id},
           {"seed", seed},
           {"input_points", input_points},
           {"output_points", output_points},
           {"instances", std::move(insts)},
           {"timing_ms",
            {{"isolate", timings.isolate_ms},
             {"complete", timings.complete_ms},
             {"sample", timings.sample_ms},
             {"total", timings.total_ms}}}};
  return doc.dump(2);
}

std::string DatasetSummary::to_json() const {
  json fails = json::array();
  for (const auto& f : failures) fails.push_back({{"frame_id", f.frame_id}, {"reason", f.reason}});
  json doc{{"frames", frames},
           {"succeeded", succeeded},
           {"failed", failures.size()},
           {"failures", std::move(fails)},
           {"skip_reasons", skip_reasons},
           {"instance_status", instance_status},
           {"timing_ms",
            {{"isolate", timings.isolate_ms},
             {"complete", timings.complete_ms},
             {"sample", timings.sample_ms},
             {"total", timings.total_ms}}}};
  return doc.dump(2);
}

namespace {

struct FrameJob {
  fs::path cloud_path;
  std::string frame_id;
};

struct FrameOutcome {
  std::optional<FrameReport> report;
  std::string error;
};

FrameReport process_frame(const FrameJob& job, const fs::path& in_dir, const fs::path& out_dir,
                          const PipelineConfig& config) {
  const std::string ext = job.cloud_path.extension().string();
  PointCloud cloud = ext == ".bin" ? read_kitti_bin(job.cloud_path) : read_ply_cloud(job.cloud_path);
  cloud.frame_id = job.frame_id;

  std::optional<KittiCalibration> calib;
  const fs::path calib_path = in_dir / "calib" / (job.frame_id + ".txt");
  if (fs::exists(calib_path)) calib = read_kitti_calib(calib_path);

  FrameInputs inputs;
  if (config.mode == IsolationMode::source_boxes) {
    const fs::path label_path = in_dir / "label_2" / (job.frame_id + ".txt");
    if (fs::exists(label_path)) {
      if (!calib) throw Error(ErrorCode::MissingMatrix, calib_path.string() + " is needed to convert labels");
      inputs.boxes = read_kitti_labels(label_path, *calib, config.classes);
    }
  } else {
    if (!calib) throw Error(ErrorCode::MissingMatrix, calib_path.string() + " is needed in mask mode");
    inputs.camera = calib->camera;
    inputs.masks = read_masks(in_dir / "masks", job.frame_id, calib->camera.width, calib->camera.height,
                              MaskFilter{config.classes, config.min_score});
  }

  FrameResult result = run_frame(cloud, inputs, config, frame_seed(config.seed, job.frame_id));

  const bool as_ply = config.format == OutputFormat::ply ||
                      (config.format == OutputFormat::same_as_input && ext == ".ply");
  const fs::path cloud_out = out_dir / "velodyne" / (job.frame_id + (as_ply ? ".ply" : ".bin"));
  if (as_ply) {
    write_ply(cloud_out, result.cloud.assembled);
  } else {
    write_kitti_bin(cloud_out, result.cloud.assembled);
  }
  write_text_file(out_dir / "reports" / (job.frame_id + ".json"), result.report.to_json() + "\n");
  return std::move(result.report);
}

}  // namespace

DatasetSummary run_dataset(const fs::path& in_dir, const fs::path& out_dir, const PipelineConfig& config) {
  config.validate();
  if (!fs::is_directory(in_dir)) throw Error(ErrorCode::IoError, in_dir.string() + " is not a directory");
  std::error_code ec;
  fs::create_directories(out_dir / "velodyne", ec);
  if (!ec) fs::create_directories(out_dir / "reports", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::vector<FrameJob> jobs;
  const fs::path velodyne = in_dir / "velodyne";
  if (fs::is_directory(velodyne)) {
    for (const auto& entry : fs::directory_iterator(velodyne)) {
      const auto ext = entry.path().extension().string();
      if (entry.is_regular_file() && (ext == ".bin" || ext == ".ply")) {
        jobs.push_back({entry.path(), entry.path().stem().string()});
      }
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const FrameJob& a, const FrameJob& b) { return a.frame_id < b.frame_id; });

  std::vector<FrameOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        outcomes[i].report = process_frame(jobs[i], in_dir, out_dir, config);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
        // a stale output from an earlier run must not look like a success
        for (const char* ext : {".bin", ".ply"}) {
          std::error_code ignore;
          fs::remove(out_dir / "velodyne" / (jobs[i].frame_id + ext), ignore);
        }
        std::error_code ignore;
        fs::remove(out_dir / "reports" / (jobs[i].frame_id + ".json"), ignore);
      }
    }
  };
  const std::size_t threads = std::min(config.jobs, std::max<std::size_t>(jobs.size(), 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  DatasetSummary summary;
  summary.frames = jobs.size();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!outcomes[i].report) {
      summary.failures.push_back({jobs[i].frame_id, outcomes[i].error});
      continue;
    }
    ++summary.succeeded;
    const FrameReport& r = *outcomes[i].report;
    for (const auto& rec : r.instances) {
      ++summary.instance_status[to_string(rec.status)];
      if (!rec.skip_code.empty()) ++summary.skip_reasons[rec.skip_code];
    }
    summary.timings.isolate_ms += r.timings.isolate_ms;
    summary.timings.complete_ms += r.timings.complete_ms;
    summary.timings.sample_ms += r.timings.sample_ms;
    summary.timings.total_ms += r.timings.total_ms;
  }
  write_text_file(out_dir / "summary.json", summary.to_json() + "\n");
  return summary;
}

}  // namespace semican
