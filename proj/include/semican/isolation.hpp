#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semican/geometry.hpp"

namespace semican {

/// Nominal ring geometry of a lidar. For non-ring sensors num_rings is the
/// observed-resolution approximation supplied by the user.
struct SensorConfig {
  double vfov_deg = 26.8;
  int num_rings = 64;
  Point3 origin = Point3::Zero();

  void validate() const;

  static SensorConfig kitti() { return {26.8, 64, Point3::Zero()}; }
  static SensorConfig nuscenes() { return {40.0, 32, Point3::Zero()}; }
  static SensorConfig waymo() { return {20.0, 64, Point3::Zero()}; }
  static SensorConfig baraja() { return {30.0, 128, Point3::Zero()}; }
};

struct ClusterParams {
  double alpha = 5.0;
  int min_pts = 3;

  void validate() const;
};

/// Pinhole camera with a lidar-to-camera extrinsic.
struct Calibration {
  RigidTransform extrinsic;  // camera <- lidar
  Eigen::Matrix3d intrinsic = Eigen::Matrix3d::Identity();
  int width = 0;
  int height = 0;

  void validate() const;
};

struct InstanceMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> raster;  // row-major, nonzero = foreground
  std::string class_label;
  double score = 1.0;
  /// Ground-truth object id when the mask comes from the simulator; 0 otherwise.
  int instance_id = 0;

  InstanceMask() = default;
  InstanceMask(int w, int h) : width(w), height(h), raster(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int u, int v) const {
    return u >= 0 && v >= 0 && u < width && v < height && raster[static_cast<std::size_t>(v) * width + u] != 0;
  }
  void set(int u, int v, bool on = true) { raster[static_cast<std::size_t>(v) * width + u] = on ? 255 : 0; }
  std::size_t foreground_count() const;
};

enum class InstanceSource { box, mask };

struct ObjectInstance {
  PointCloud points;
  /// Index of every point in the parent frame cloud.
  std::vector<std::size_t> indices;
  InstanceSource source = InstanceSource::box;
  double origin_distance = 0.0;  // d_o
  std::string parent_frame;
  std::string class_label;
  bool pass_through = false;
  /// Clustering radius used in mask mode; zero in box mode.
  double cluster_radius = 0.0;
  /// Position of the originating box or mask in the frame inputs.
  std::size_t input_index = 0;
};

struct SkippedInstance {
  std::size_t input_index;
  std::string reason;
};

struct IsolationResult {
  std::vector<ObjectInstance> instances;
  std::vector<SkippedInstance> skipped;
};

struct Projection {
  std::size_t index;
  double u;
  double v;
  double depth;
};

// ---------------------------------------------------------------------------
// Ring geometry
// ---------------------------------------------------------------------------

/// Angular gap between adjacent rings, in degrees.
double vres(const SensorConfig& config);

/// Expected vertical spacing of ring returns at range d_o.
double vertical_point_distance(double d_o, const SensorConfig& config);

/// DBSCAN radius alpha * d_o * tan(vres).
double cluster_radius(double d_o, const SensorConfig& config, const ClusterParams& params);

// ---------------------------------------------------------------------------
// Camera path
// ---------------------------------------------------------------------------

/// Points in front of the camera that land inside the image, in cloud order.
std::vector<Projection> project_to_image(const PointCloud& cloud, const Calibration& calib);

/// Erodes the mask with a disk whose radius is (fraction / 2) times the
/// diagonal of the mask's tight pixel box, rounded, at least 1 px for fraction > 0.
InstanceMask shrink_mask(const InstanceMask& mask, double fraction = 0.02);

/// Indices of points whose rounded projection is a foreground pixel.
std::vector<std::size_t> mask_select(const PointCloud& cloud, const InstanceMask& mask, const Calibration& calib);

/// Throws EmptySelection when no point falls inside the mask.
PointCloud mask_isolate(const PointCloud& cloud, const InstanceMask& mask, const Calibration& calib);

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

/// Density clustering with inclusive eps-neighbourhoods (self counted).
/// Core points connected through eps-adjacency form clusters; a border point
/// joins the cluster of its nearest core neighbour (ties broken by the
/// neighbour's lexicographic coordinates), which keeps labels independent of
/// input order. Noise is -1. Cluster ids are assigned by ascending smallest
/// member index.
std::vector<int> dbscan(std::span<const Point3> points, double eps, int min_pts);

/// Picks the largest VRES-scaled DBSCAN cluster. Indices in the result refer
/// to `points`. Throws NoCluster when everything is noise.
ObjectInstance vres_cluster(const PointCloud& points, const SensorConfig& config, const ClusterParams& params);

// ---------------------------------------------------------------------------
// Frame-level isolation
// ---------------------------------------------------------------------------

struct IsolationOptions {
  SensorConfig sensor;
  ClusterParams cluster;
  double mask_shrink = 0.02;
  std::size_t min_points = 50;
};

/// Source mode: one instance per box, no clustering.
IsolationResult isolate_frame(const PointCloud& cloud, std::span<const BoundingBox3> boxes,
                              const IsolationOptions& options);

/// Target mode: shrink, mask-select and VRES-cluster each mask.
IsolationResult isolate_frame(const PointCloud& cloud, std::span<const InstanceMask> masks,
                              const Calibration& calib, const IsolationOptions& options);

}  // namespace semican
