#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "semican/geometry.hpp"
#include "semican/isolation.hpp"

namespace semican {

struct BpaParams {
  /// Strictly ascending ball radii in meters.
  std::vector<double> radii = linear_radii(1.155, 20);
  std::size_t normal_k = 30;

  void validate() const;

  /// `count` radii evenly spaced on [max/count, max].
  static std::vector<double> linear_radii(double max_radius, std::size_t count);
};

struct AlphaParams {
  double alpha = 1.155;

  void validate() const;
};

struct NormalEstimate {
  std::vector<Eigen::Vector3d> normals;
  /// Points whose neighbourhood was exactly collinear.
  std::vector<std::size_t> degenerate;
};

/// PCA normals over k nearest neighbours, flipped to face `origin`.
/// k is clamped to the point count (minimum 3).
NormalEstimate estimate_normals(std::span<const Point3> points, const Point3& origin, std::size_t k = 30);

/// Ball-pivoting reconstruction. The mesh keeps every input point as a vertex
/// (unreferenced points included) and uses the given normals. Each output
/// triangle has, for some configured radius, an empty ball resting on the
/// side its winding normal points to; each directed edge is used at most once.
/// Throws MeshEmpty when no seed triangle exists at any radius.
TriangleMesh ball_pivot(std::span<const Point3> points, std::span<const Eigen::Vector3d> normals,
                        const BpaParams& params);

/// Boundary of the 3D alpha shape: every triangle through which an empty
/// ball of radius alpha passes. Candidates come from a Delaunay
/// tetrahedralization. Throws MeshEmpty.
TriangleMesh alpha_shape(std::span<const Point3> points, const AlphaParams& params);

/// Same contract as alpha_shape, by exhaustive triple enumeration. Quadratic
/// in the neighbourhood size; intended for small inputs and cross-checks.
TriangleMesh alpha_shape_exhaustive(std::span<const Point3> points, const AlphaParams& params);

/// Delaunay tetrahedra (vertex index quadruples) of a point set.
std::vector<std::array<int, 4>> delaunay_tetrahedra(std::span<const Point3> points);

enum class SurfaceMethod { ball_pivot, alpha_shape };

std::string to_string(SurfaceMethod method);
SurfaceMethod surface_method_from_string(const std::string& name);

struct SurfaceParams {
  SurfaceMethod method = SurfaceMethod::ball_pivot;
  BpaParams bpa;
  AlphaParams alpha;
  std::size_t min_points = 50;

  void validate() const;
};

struct SurfaceResult {
  TriangleMesh mesh;
  std::string provenance;
  std::size_t degenerate_normals = 0;
};

/// Dispatches to the configured method. Throws TooFewPoints below min_points,
/// MeshEmpty when the method yields nothing.
SurfaceResult complete_surface(const ObjectInstance& instance, const Point3& sensor_origin,
                               const SurfaceParams& params);

}  // namespace semican
