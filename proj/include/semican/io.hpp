#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semican/geometry.hpp"
#include "semican/isolation.hpp"

namespace semican {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// KITTI velodyne scans
// ---------------------------------------------------------------------------

/// Little-endian float32 quadruples (x, y, z, intensity). Throws MalformedFile
/// when the size is not a multiple of 16, IoError when unreadable.
PointCloud read_kitti_bin(const fs::path& path);
void write_kitti_bin(const fs::path& path, const PointCloud& cloud);

// ---------------------------------------------------------------------------
// KITTI calibration and labels
// ---------------------------------------------------------------------------

struct KittiCalibration {
  /// Projection into the left color camera (P2), extrinsic folded from
  /// R0_rect * Tr_velo_to_cam plus the P2 baseline offset.
  Calibration camera;
  /// Lidar to rectified reference camera; label boxes live in this frame.
  RigidTransform rect_from_lidar;
};

/// Reads P2, R0_rect and Tr_velo_to_cam. An optional "image_size: w h" line
/// overrides the default 1242 x 375. Throws MissingMatrix or MalformedFile.
KittiCalibration read_kitti_calib(const fs::path& path);
void write_kitti_calib(const fs::path& path, const KittiCalibration& calib);

struct LabeledBox {
  BoundingBox3 box;  // lidar frame, center at the box middle
  std::string class_label;
  double score = 1.0;
};

/// Label rows converted into the lidar frame. DontCare rows are always
/// dropped; when `classes` is non-empty only those types are kept.
std::vector<LabeledBox> read_kitti_labels(const fs::path& path, const KittiCalibration& calib,
                                          const std::vector<std::string>& classes = {});
void write_kitti_labels(const fs::path& path, const std::vector<LabeledBox>& boxes, const KittiCalibration& calib);

/// Camera-frame label fields to a lidar-frame box (and back).
BoundingBox3 label_to_lidar(const Eigen::Vector3d& location, const Eigen::Vector3d& hwl, double rotation_y,
                            const RigidTransform& rect_from_lidar);
void lidar_to_label(const BoundingBox3& box, const RigidTransform& rect_from_lidar, Eigen::Vector3d& location,
                    Eigen::Vector3d& hwl, double& rotation_y);

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

enum class PlyEncoding { ascii, binary_little_endian };

/// Vertices as double x/y/z plus float intensity when present.
void write_ply(const fs::path& path, const PointCloud& cloud, PlyEncoding encoding = PlyEncoding::binary_little_endian);
/// Vertices with normals and a triangle face list.
void write_ply(const fs::path& path, const TriangleMesh& mesh, PlyEncoding encoding = PlyEncoding::binary_little_endian);

/// Reads the vertex element (x, y, z and optional intensity) of any PLY.
PointCloud read_ply_cloud(const fs::path& path);
/// Reads vertices, optional normals and faces; polygons are fanned into triangles.
TriangleMesh read_ply_mesh(const fs::path& path);

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

/// 8-bit single-channel PNG; color inputs are converted to gray.
InstanceMask read_png_mask(const fs::path& path);
void write_png_mask(const fs::path& path, const InstanceMask& mask);

struct MaskFilter {
  std::vector<std::string> classes;  // empty keeps every class
  double min_score = 0.5;
};

/// Reads `<dir>/<frame_id>.json`, a list of {png_path, class, score}
/// (optionally wrapped as {"masks": [...]}), with PNG paths relative to dir.
/// Throws ManifestMissing, or SizeMismatch when a mask is not width x height.
std::vector<InstanceMask> read_masks(const fs::path& dir, const std::string& frame_id, int width, int height,
                                     const MaskFilter& filter = {});
void write_masks(const fs::path& dir, const std::string& frame_id, const std::vector<InstanceMask>& masks);

/// Reads a whole file; throws IoError.
std::string read_text_file(const fs::path& path);
/// Writes through a temporary file and renames, so readers never see partial output.
void write_text_file(const fs::path& path, const std::string& text);

}  // namespace semican
