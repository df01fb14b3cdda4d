#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "semican/geometry.hpp"

namespace semican {

struct DistanceStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

/// Summary of a sample of non-negative distances. Throws EmptyCloud when empty.
DistanceStats summarize_distances(std::vector<double> distances);

/// Distances from each point to the mesh surface. Throws EmptyCloud / EmptyMesh.
DistanceStats point_to_mesh_stats(std::span<const Point3> points, const TriangleMesh& mesh);

/// Median distance from area-weighted uniform samples of `completed` to the
/// ground-truth surface. Sampling the surface (rather than the vertices, which
/// are the input points) measures the interpolated triangles.
double surface_fidelity(const TriangleMesh& completed, const TriangleMesh& ground_truth, std::size_t samples = 4000,
                        std::uint64_t seed = 0);

/// Mean distance from each point to its nearest other point. Throws EmptyCloud
/// for fewer than two points.
double mean_nn_spacing(std::span<const Point3> points);

struct NormalizationMetrics {
  double raw_chamfer = 0.0;
  double normalized_chamfer = 0.0;
  /// Present when a ground-truth mesh is given.
  bool has_ground_truth = false;
  DistanceStats normalized_a_to_mesh;
  DistanceStats normalized_b_to_mesh;
  double raw_a_spacing = 0.0;
  double raw_b_spacing = 0.0;
  double normalized_a_spacing = 0.0;
  double normalized_b_spacing = 0.0;
  double d_ideal = 0.05;

  std::string to_json() const;
};

/// Compares two scans of the same object before and after normalization.
/// Throws EmptyCloud when any cloud is empty.
NormalizationMetrics eval_normalization(const PointCloud& raw_a, const PointCloud& raw_b,
                                        const PointCloud& normalized_a, const PointCloud& normalized_b,
                                        const TriangleMesh* ground_truth, double d_ideal = 0.05);

}  // namespace semican
