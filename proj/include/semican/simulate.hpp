#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semican/io.hpp"
#include "semican/scan_sim.hpp"

namespace semican {

enum class ObjectShape { car, box, mesh };

struct SimObjectSpec {
  ObjectShape shape = ObjectShape::car;
  /// PLY mesh for ObjectShape::mesh; it is recentered and scaled into `box`.
  std::filesystem::path mesh_path;
  BoundingBox3 box;  // world frame, ground at z = 0
  std::string class_label = "Car";
  int instance_id = 0;  // 0 picks position + 1
};

struct CameraSpec {
  int width = 1242;
  int height = 375;
  double focal = 721.5;
  /// Camera position in the sensor frame; nonzero values misalign the views.
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

struct SceneSpec {
  std::string pattern = "kitti64";
  PatternOverrides overrides;
  double sensor_height = 1.73;
  double sensor_yaw = 0.0;  // radians
  bool ground_plane = true;
  std::vector<SimObjectSpec> objects;
  /// Static boxes returning background points.
  std::vector<BoundingBox3> walls;
  std::optional<CameraSpec> camera = CameraSpec{};
  ScanOptions scan;

  RigidTransform world_from_sensor() const;
};

/// Throws MalformedFile on invalid JSON or missing fields. Relative mesh paths
/// resolve against `base_dir`.
SceneSpec parse_scene_spec(const std::string& json_text, const std::filesystem::path& base_dir = {});
SceneSpec load_scene_spec(const std::filesystem::path& path);
std::string to_json(const SceneSpec& spec);

/// Cars with randomized size and heading, spread over +-35 degrees of azimuth
/// in front of the sensor at ranges in [min_range, max_range], without overlap.
SceneSpec random_scene_spec(std::uint64_t seed, std::size_t object_count, const std::string& pattern = "kitti64",
                            double min_range = 8.0, double max_range = 30.0);

struct SimulatedFrame {
  Scene scene;  // world frame
  RigidTransform world_from_sensor;
  LabeledScan scan;  // sensor frame
  std::vector<LabeledBox> labels;  // sensor frame
  /// Ground-truth object surfaces in the sensor frame, parallel to `labels`.
  std::vector<TriangleMesh> gt_meshes;
  std::vector<int> instance_ids;
  /// Forward camera from `SceneSpec::camera`, or its defaults when absent.
  KittiCalibration calib;
  /// Rendered only when the spec has a camera.
  std::vector<InstanceMask> masks;
};

SimulatedFrame simulate_frame(const SceneSpec& spec);

/// Writes velodyne/<id>.bin, calib/<id>.txt, label_2/<id>.txt, masks/<id>.json
/// with its PNGs, and gt/<id>_<instance>.ply.
void write_simulated_frame(const std::filesystem::path& root, const std::string& frame_id,
                           const SimulatedFrame& frame);

}  // namespace semican
