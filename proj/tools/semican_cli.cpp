#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "semican/config.hpp"
#include "semican/io.hpp"
#include "semican/metrics.hpp"
#include "semican/pipeline.hpp"
#include "semican/simulate.hpp"

namespace fs = std::filesystem;
using namespace semican;

namespace {

/// Command-line values that override the config file when given.
struct ConfigFlags {
  std::string config_path;
  std::optional<double> d_ideal, alpha, bpa_max_radius, mask_shrink, sa_density, z_offset, alpha_radius;
  std::optional<std::size_t> min_points, bpa_radius_count, jobs;
  std::optional<std::string> strategy, mode, format, method, sensor, target_pattern;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> classes;
  bool keep_original = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "TOML config file")->check(CLI::ExistingFile);
    app->add_option("--d-ideal", d_ideal, "Target point spacing in meters (0.05)");
    app->add_option("--alpha", alpha, "Cluster radius multiplier (5)");
    app->add_option("--min-points", min_points, "Minimum points to complete a surface (50)");
    app->add_option("--bpa-max-radius", bpa_max_radius, "Largest ball radius (1.155)");
    app->add_option("--bpa-radius-count", bpa_radius_count, "Number of ball radii (20)");
    app->add_option("--alpha-radius", alpha_radius, "Alpha-shape radius when --method alpha_shape");
    app->add_option("--method", method, "ball_pivot or alpha_shape");
    app->add_option("--mask-shrink", mask_shrink, "Mask erosion fraction (0.02)");
    app->add_option("--sa-density", sa_density, "Points per square meter for surface-area sampling");
    app->add_option("--strategy", strategy, "vres, surface-area or virtual-lidar");
    app->add_option("--target-pattern", target_pattern, "Scan pattern for virtual-lidar sampling");
    app->add_option("--sensor", sensor, "Ring geometry: kitti, nuscenes, waymo or baraja");
    app->add_option("--z-offset", z_offset, "Added to every z coordinate at ingestion");
    app->add_option("--seed", seed, "Global random seed");
    app->add_option("--mode", mode, "source_boxes or target_masks");
    app->add_option("--classes", classes, "Classes to process (default Car)");
    app->add_flag("--keep-original", keep_original, "Add samples next to the original object points");
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (sensor) {
      const Point3 origin = c.sensor.origin;
      c.sensor = sensor_preset(*sensor);
      c.sensor.origin = origin;
    }
    if (d_ideal) c.sampling.d_ideal = *d_ideal;
    if (alpha) c.cluster.alpha = *alpha;
    if (min_points) c.sc.min_points = *min_points;
    if (bpa_max_radius || bpa_radius_count) {
      c.sc.bpa.radii = BpaParams::linear_radii(bpa_max_radius.value_or(c.sc.bpa.radii.back()),
                                               bpa_radius_count.value_or(c.sc.bpa.radii.size()));
    }
    if (alpha_radius) c.sc.alpha.alpha = *alpha_radius;
    if (method) c.sc.method = surface_method_from_string(*method);
    if (mask_shrink) c.mask_shrink = *mask_shrink;
    if (sa_density) c.sampling.sa_density = *sa_density;
    if (strategy) c.sampling.strategy = sampling_strategy_from_string(*strategy);
    if (target_pattern) c.target_pattern = *target_pattern;
    if (z_offset) c.z_offset = *z_offset;
    if (seed) c.seed = *seed;
    if (mode) c.mode = isolation_mode_from_string(*mode);
    if (format) c.format = output_format_from_string(*format);
    if (jobs) c.jobs = *jobs;
    if (!classes.empty()) c.classes = classes;
    if (keep_original) c.replace_objects = false;
    c.validate();
    return c;
  }
};

PointCloud read_cloud(const fs::path& path) {
  return path.extension() == ".bin" ? read_kitti_bin(path) : read_ply_cloud(path);
}

int cmd_run(const fs::path& in_dir, const fs::path& out_dir, const PipelineConfig& config) {
  const DatasetSummary summary = run_dataset(in_dir, out_dir, config);
  std::cout << summary.to_json() << "\n";
  for (const auto& f : summary.failures) std::cerr << "frame " << f.frame_id << " failed: " << f.reason << "\n";
  return summary.exit_code();
}

int cmd_isolate(const fs::path& cloud_path, const fs::path& calib_path, const fs::path& labels_path,
                const fs::path& masks_dir, const fs::path& out_dir, const PipelineConfig& config) {
  PointCloud cloud = read_cloud(cloud_path);
  cloud.frame_id = cloud_path.stem().string();
  for (auto& p : cloud.points) p.z() += config.z_offset;

  IsolationOptions options;
  options.sensor = config.sensor;
  options.sensor.origin = config.shifted_origin();
  options.cluster = config.cluster;
  options.mask_shrink = config.mask_shrink;
  options.min_points = config.sc.min_points;

  std::optional<KittiCalibration> calib;
  if (!calib_path.empty()) calib = read_kitti_calib(calib_path);
  IsolationResult iso;
  if (config.mode == IsolationMode::source_boxes) {
    if (!calib) throw Error(ErrorCode::MissingMatrix, "--calib is required to read labels");
    std::vector<BoundingBox3> boxes;
    for (auto& lb : read_kitti_labels(labels_path, *calib, config.classes)) {
      lb.box.center.z() += config.z_offset;
      boxes.push_back(lb.box);
    }
    iso = isolate_frame(cloud, boxes, options);
  } else {
    if (!calib) throw Error(ErrorCode::MissingMatrix, "--calib is required in mask mode");
    Calibration camera = calib->camera;
    const auto masks = read_masks(masks_dir, cloud.frame_id, camera.width, camera.height,
                                  MaskFilter{config.classes, config.min_score});
    camera.extrinsic = camera.extrinsic * RigidTransform::translation(Eigen::Vector3d(0.0, 0.0, -config.z_offset));
    iso = isolate_frame(cloud, masks, camera, options);
  }

  fs::create_directories(out_dir);
  nlohmann::json listing = nlohmann::json::array();
  for (const auto& inst : iso.instances) {
    const std::string name = "instance_" + std::to_string(inst.input_index) + ".ply";
    write_ply(out_dir / name, inst.points);
    listing.push_back({{"input_index", inst.input_index},
                       {"file", name},
                       {"points", inst.points.size()},
                       {"origin_distance", inst.origin_distance},
                       {"cluster_radius", inst.cluster_radius},
                       {"pass_through", inst.pass_through}});
  }
  for (const auto& s : iso.skipped) listing.push_back({{"input_index", s.input_index}, {"skipped", s.reason}});
  write_text_file(out_dir / "instances.json", listing.dump(2) + "\n");
  std::cout << iso.instances.size() << " instances, " << iso.skipped.size() << " skipped\n";
  return 0;
}

ObjectInstance instance_from_file(const fs::path& path, const PipelineConfig& config) {
  ObjectInstance inst;
  inst.points = read_cloud(path);
  if (inst.points.empty()) throw Error(ErrorCode::EmptyCloud, path.string() + " has no points");
  inst.origin_distance = (centroid(inst.points.points) - config.shifted_origin()).norm();
  inst.pass_through = inst.points.size() < config.sc.min_points;
  return inst;
}

int cmd_complete(const fs::path& in, const fs::path& out, const PipelineConfig& config) {
  const ObjectInstance inst = instance_from_file(in, config);
  const SurfaceResult result = complete_surface(inst, config.shifted_origin(), config.sc);
  write_ply(out, result.mesh);
  std::cout << result.mesh.triangles.size() << " triangles (" << result.provenance << ")\n";
  return 0;
}

int cmd_sample(const fs::path& mesh_path, const fs::path& instance_path, const fs::path& out,
               const PipelineConfig& config) {
  const TriangleMesh mesh = read_ply_mesh(mesh_path);
  const ObjectInstance inst = instance_from_file(instance_path, config);
  std::optional<SensorPattern> pattern;
  if (config.sampling.strategy == SamplingStrategy::virtual_lidar) pattern = make_pattern(config.target_pattern);
  SensorConfig sensor = config.sensor;
  sensor.origin = config.shifted_origin();
  SampleContext context;
  context.seed = config.seed;
  context.target_pattern = pattern ? &*pattern : nullptr;
  context.sensor_origin = sensor.origin;
  const SampledObject sampled = sample_semi_canonical(mesh, inst, sensor, config.sampling, context);
  write_ply(out, sampled.cloud);
  std::cout << sampled.cloud.size() << " points (beta " << sampled.beta << ")\n";
  return 0;
}

struct SimulateArgs {
  fs::path out_dir;
  fs::path scene_path;
  std::size_t frames = 1;
  std::size_t objects = 3;
  std::string pattern = "kitti64";
  double min_range = 8.0;
  double max_range = 30.0;
  std::uint64_t seed = 0;
  bool no_camera = false;
};

int cmd_simulate(const SimulateArgs& a) {
  for (std::size_t f = 0; f < a.frames; ++f) {
    SceneSpec spec = a.scene_path.empty()
                         ? random_scene_spec(a.seed + f, a.objects, a.pattern, a.min_range, a.max_range)
                         : load_scene_spec(a.scene_path);
    if (a.no_camera) spec.camera.reset();
    char id[16];
    std::snprintf(id, sizeof(id), "%06zu", f);
    const SimulatedFrame frame = simulate_frame(spec);
    write_simulated_frame(a.out_dir, id, frame);
    fs::create_directories(a.out_dir / "scenes");
    write_text_file(a.out_dir / "scenes" / (std::string(id) + ".json"), to_json(spec) + "\n");
    std::cout << id << ": " << frame.scan.cloud.size() << " points, " << frame.labels.size() << " objects, "
              << frame.masks.size() << " masks\n";
  }
  return 0;
}

int cmd_eval(const fs::path& raw_a, const fs::path& raw_b, const fs::path& norm_a, const fs::path& norm_b,
             const fs::path& gt_path, double d_ideal) {
  std::optional<TriangleMesh> gt;
  if (!gt_path.empty()) gt = read_ply_mesh(gt_path);
  const NormalizationMetrics m = eval_normalization(read_cloud(raw_a), read_cloud(raw_b), read_cloud(norm_a),
                                                    read_cloud(norm_b), gt ? &*gt : nullptr, d_ideal);
  std::cout << m.to_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scan-pattern normalization for lidar point clouds"};
  app.require_subcommand(1);

  ConfigFlags flags;
  fs::path in_dir, out_dir;
  auto* run = app.add_subcommand("run", "Process a KITTI-style dataset directory");
  run->add_option("input", in_dir, "Dataset root with velodyne/, calib/, label_2/, masks/")->required();
  run->add_option("output", out_dir, "Output root")->required();
  flags.attach(run);
  run->add_option("--jobs,-j", flags.jobs, "Worker threads (1)");
  run->add_option("--format", flags.format, "Output format: same, bin or ply");

  fs::path cloud_path, calib_path, labels_path, masks_dir;
  auto* isolate = app.add_subcommand("isolate", "Write each object's points as PLY");
  isolate->add_option("cloud", cloud_path, "Frame cloud (.bin or .ply)")->required()->check(CLI::ExistingFile);
  isolate->add_option("output", out_dir, "Output directory")->required();
  isolate->add_option("--calib", calib_path, "KITTI calibration file")->check(CLI::ExistingFile);
  isolate->add_option("--labels", labels_path, "KITTI label file (box mode)")->check(CLI::ExistingFile);
  isolate->add_option("--masks", masks_dir, "Mask directory (mask mode)");
  flags.attach(isolate);

  fs::path in_path, out_path, mesh_path;
  auto* complete = app.add_subcommand("complete", "Reconstruct a surface from one object's points");
  complete->add_option("input", in_path, "Object cloud")->required()->check(CLI::ExistingFile);
  complete->add_option("output", out_path, "Output mesh PLY")->required();
  flags.attach(complete);

  auto* sample = app.add_subcommand("sample", "Resample a completed surface");
  sample->add_option("mesh", mesh_path, "Completed mesh PLY")->required()->check(CLI::ExistingFile);
  sample->add_option("instance", in_path, "Original object cloud")->required()->check(CLI::ExistingFile);
  sample->add_option("output", out_path, "Output cloud PLY")->required();
  flags.attach(sample);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate labeled frames with the synthetic scanner");
  simulate->add_option("output", sim.out_dir, "Dataset root to write")->required();
  simulate->add_option("--scene", sim.scene_path, "Scene description JSON")->check(CLI::ExistingFile);
  simulate->add_option("--frames", sim.frames, "Number of frames");
  simulate->add_option("--objects", sim.objects, "Cars per random scene");
  simulate->add_option("--pattern", sim.pattern, "kitti64, nuscenes32, waymo64 or baraja_foveated");
  simulate->add_option("--min-range", sim.min_range, "Nearest object range in meters");
  simulate->add_option("--max-range", sim.max_range, "Farthest object range in meters");
  simulate->add_option("--seed", sim.seed, "Scene seed");
  simulate->add_flag("--no-camera", sim.no_camera, "Skip mask rendering");

  fs::path raw_a, raw_b, norm_a, norm_b, gt_path;
  double d_ideal = 0.05;
  auto* eval = app.add_subcommand("eval", "Compare two scans of an object before and after normalization");
  eval->add_option("raw_a", raw_a)->required()->check(CLI::ExistingFile);
  eval->add_option("raw_b", raw_b)->required()->check(CLI::ExistingFile);
  eval->add_option("norm_a", norm_a)->required()->check(CLI::ExistingFile);
  eval->add_option("norm_b", norm_b)->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_path, "Ground-truth mesh PLY")->check(CLI::ExistingFile);
  eval->add_option("--d-ideal", d_ideal, "Target spacing for the density ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return cmd_run(in_dir, out_dir, flags.resolve());
    if (*isolate) return cmd_isolate(cloud_path, calib_path, labels_path, masks_dir, out_dir, flags.resolve());
    if (*complete) return cmd_complete(in_path, out_path, flags.resolve());
    if (*sample) return cmd_sample(mesh_path, in_path, out_path, flags.resolve());
    if (*simulate) return cmd_simulate(sim);
    if (*eval) return cmd_eval(raw_a, raw_b, norm_a, norm_b, gt_path, d_ideal);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
