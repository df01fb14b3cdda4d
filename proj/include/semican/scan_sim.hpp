#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semican/geometry.hpp"
#include "semican/isolation.hpp"

namespace semican {

enum class PatternKind { uniform_rings, nonuniform_rings, foveated_interleaved };

/// Full ray grid of a lidar: one ray per (elevation, azimuth column).
struct SensorPattern {
  std::string name;
  PatternKind kind = PatternKind::uniform_rings;
  std::vector<double> elevations_deg;  // strictly ascending
  /// Optional per-elevation azimuth shift (degrees); empty means all zero.
  std::vector<double> azimuth_offsets_deg;
  double azimuth_step_deg = 0.2;
  double hfov_deg = 360.0;
  double max_range = 75.0;
  /// Nominal ring geometry used for VRES computations on this sensor's data.
  SensorConfig nominal;

  void validate() const;
  std::size_t columns() const;
  std::size_t ray_count() const { return elevations_deg.size() * columns(); }
  /// Unit direction in the sensor frame. Columns sweep from +hfov/2 to -hfov/2
  /// azimuth (left to right looking along +x).
  Eigen::Vector3d ray_direction(std::size_t ring, std::size_t column) const;
};

enum class PatternPreset { kitti64, nuscenes32, waymo64, baraja_foveated };

struct PatternOverrides {
  std::optional<double> azimuth_step_deg;
  std::optional<double> hfov_deg;
  std::optional<double> max_range;
};

SensorPattern make_pattern(PatternPreset preset, const PatternOverrides& overrides = {});
/// Accepts preset names such as "kitti64"; throws UnknownPreset.
SensorPattern make_pattern(const std::string& preset, const PatternOverrides& overrides = {});
PatternPreset pattern_preset_from_string(const std::string& name);

struct SceneObject {
  TriangleMesh mesh;  // world frame
  BoundingBox3 box;   // world frame
  int instance_id = 1;
  std::string class_label = "Car";
};

struct Scene {
  std::vector<SceneObject> objects;
  /// Static geometry that returns background points (id 0).
  std::vector<TriangleMesh> background;
  bool ground_plane = true;
  double ground_z = 0.0;

  void validate() const;
};

struct LabeledScan {
  PointCloud cloud;                // sensor frame
  std::vector<int> instance_ids;   // 0 = background
  std::vector<int> rings;          // elevation index of each return
  std::vector<BoundingBox3> boxes; // sensor frame, one per scene object
  std::vector<int> box_ids;
  std::vector<std::string> box_labels;
};

struct ScanOptions {
  double range_noise_sigma = 0.0;  // meters; zero disables noise
  std::uint64_t noise_seed = 0;
};

/// Nearest hit along each ray, or nullopt. Ties in range go to the lower
/// (object, triangle) index.
struct RayHit {
  double range;
  int object;    // -1 ground, -2 - k background mesh k, else scene object index
  int triangle;
};

/// Casts every pattern ray from the sensor at `world_from_sensor`. Output
/// points are ordered by (elevation index, azimuth column).
LabeledScan scan(const Scene& scene, const SensorPattern& pattern, const RigidTransform& world_from_sensor,
                 const ScanOptions& options = {});

/// All ray parameters at which the ray crosses the mesh, ascending.
std::vector<double> ray_mesh_intersections(const TriangleMesh& mesh, const Point3& origin,
                                           const Eigen::Vector3d& dir);

/// Test asset: lower body with a beveled hood plus a cabin, as a closed mesh
/// filling [-l/2, l/2] x [-w/2, w/2] x [-h/2, h/2].
TriangleMesh car_proxy(double length, double width, double height);

/// Axis-aligned closed box mesh centered at the origin.
TriangleMesh box_mesh(double length, double width, double height);

/// Places a proxy-sized mesh at a box pose (mesh must be centered at origin).
TriangleMesh place_mesh(const TriangleMesh& mesh, const BoundingBox3& box);

/// Per-object silhouettes as seen by the camera. `camera.extrinsic` maps the
/// sensor frame into the camera frame; background meshes occlude objects.
std::vector<InstanceMask> render_masks(const Scene& scene, const RigidTransform& world_from_sensor,
                                       const Calibration& camera);

/// Camera looking along the sensor's +x axis, offset in the sensor frame.
Calibration forward_camera(int width, int height, double focal, const Eigen::Vector3d& offset_in_sensor);

}  // namespace semican
