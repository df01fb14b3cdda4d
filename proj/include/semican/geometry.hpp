#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semican/errors.hpp"

namespace semican {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// Sensor-frame point in meters (x forward, y left, z up).
using Point3 = Eigen::Vector3d;

// ============================================================================
// Value types
// ============================================================================

struct PointCloud {
  std::vector<Point3> points;
  /// Either empty or one value per point, in [0, 1].
  std::vector<float> intensity;
  std::string frame_id;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_intensity() const noexcept { return !intensity.empty(); }

  void push_back(const Point3& p) { points.push_back(p); }
  void push_back(const Point3& p, float i) {
    points.push_back(p);
    intensity.push_back(i);
  }

  /// Subset in the given index order; intensity follows when present.
  PointCloud select(std::span<const std::size_t> indices) const;

  /// Throws InvalidArgument on non-finite coordinates or a length mismatch.
  void validate() const;
};

/// Oriented box: center, (l, w, h) along the box's local x/y/z and yaw about +z.
struct BoundingBox3 {
  Point3 center = Point3::Zero();
  Eigen::Vector3d dims = Eigen::Vector3d::Ones();
  double yaw = 0.0;

  void validate() const;

  /// Expresses a sensor-frame point in the box frame.
  Point3 to_local(const Point3& p) const;
  Point3 to_world(const Point3& local) const;

  /// Faces are inclusive, widened by kFaceTolerance so that points lying on a
  /// face survive the rounding of the frame change.
  static constexpr double kFaceTolerance = 1e-9;
  bool contains(const Point3& p) const;
};

using Triangle = std::array<int, 3>;

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<Eigen::Vector3d> normals;  // per-vertex, unit length
  std::vector<Triangle> triangles;

  bool empty() const noexcept { return triangles.empty(); }
  double surface_area() const;
  double triangle_area(std::size_t t) const;
  Eigen::Vector3d face_normal(std::size_t t) const;  // unit, from winding

  /// Throws InvalidArgument when an index, area or normal invariant is broken.
  void validate() const;
};

/// Proper rigid motion stored as a 4x4 homogeneous matrix.
class RigidTransform {
 public:
  RigidTransform() : m_(Eigen::Matrix4d::Identity()) {}

  /// Throws InvalidArgument unless the rotation block is orthonormal with det 1
  /// and the last row is (0, 0, 0, 1), both within 1e-6.
  static RigidTransform from_matrix(const Eigen::Matrix4d& m);
  static RigidTransform from_parts(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);
  static RigidTransform translation(const Eigen::Vector3d& t);
  static RigidTransform rotation_z(double yaw);

  const Eigen::Matrix4d& matrix() const noexcept { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }

  Point3 apply(const Point3& p) const { return rotation() * p + translation(); }
  Eigen::Vector3d apply_direction(const Eigen::Vector3d& d) const { return rotation() * d; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

  PointCloud apply(const PointCloud& cloud) const;
  TriangleMesh apply(const TriangleMesh& mesh) const;

 private:
  Eigen::Matrix4d m_;
};

// ============================================================================
// Low-level kernels (header-only, scalar-generic)
// ============================================================================

/// Closest point to p on triangle (a, b, c), by Voronoi-region classification.
template <typename Scalar>
Vec3<Scalar> closest_point_on_triangle(const Vec3<Scalar>& p, const Vec3<Scalar>& a, const Vec3<Scalar>& b,
                                       const Vec3<Scalar>& c) {
  const Vec3<Scalar> ab = b - a;
  const Vec3<Scalar> ac = c - a;
  const Vec3<Scalar> ap = p - a;
  const Scalar d1 = ab.dot(ap);
  const Scalar d2 = ac.dot(ap);
  if (d1 <= Scalar(0) && d2 <= Scalar(0)) return a;

  const Vec3<Scalar> bp = p - b;
  const Scalar d3 = ab.dot(bp);
  const Scalar d4 = ac.dot(bp);
  if (d3 >= Scalar(0) && d4 <= d3) return b;

  const Scalar vc = d1 * d4 - d3 * d2;
  if (vc <= Scalar(0) && d1 >= Scalar(0) && d3 <= Scalar(0)) {
    return a + ab * (d1 / (d1 - d3));
  }

  const Vec3<Scalar> cp = p - c;
  const Scalar d5 = ab.dot(cp);
  const Scalar d6 = ac.dot(cp);
  if (d6 >= Scalar(0) && d5 <= d6) return c;

  const Scalar vb = d5 * d2 - d1 * d6;
  if (vb <= Scalar(0) && d2 >= Scalar(0) && d6 <= Scalar(0)) {
    return a + ac * (d2 / (d2 - d6));
  }

  const Scalar va = d3 * d6 - d5 * d4;
  if (va <= Scalar(0) && (d4 - d3) >= Scalar(0) && (d5 - d6) >= Scalar(0)) {
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  }

  const Scalar denom = Scalar(1) / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Möller-Trumbore; edges inclusive. Returns the ray parameter of the hit.
template <typename Scalar>
std::optional<Scalar> intersect_ray_triangle(const Vec3<Scalar>& origin, const Vec3<Scalar>& dir,
                                             const Vec3<Scalar>& a, const Vec3<Scalar>& b,
                                             const Vec3<Scalar>& c) {
  const Vec3<Scalar> e1 = b - a;
  const Vec3<Scalar> e2 = c - a;
  const Vec3<Scalar> pvec = dir.cross(e2);
  const Scalar det = e1.dot(pvec);
  if (std::abs(det) < std::numeric_limits<Scalar>::epsilon() * e1.norm() * e2.norm() * dir.norm()) {
    return std::nullopt;
  }
  const Scalar inv_det = Scalar(1) / det;
  const Vec3<Scalar> tvec = origin - a;
  const Scalar u = tvec.dot(pvec) * inv_det;
  if (u < Scalar(0) || u > Scalar(1)) return std::nullopt;
  const Vec3<Scalar> qvec = tvec.cross(e1);
  const Scalar v = dir.dot(qvec) * inv_det;
  if (v < Scalar(0) || u + v > Scalar(1)) return std::nullopt;
  const Scalar t = e2.dot(qvec) * inv_det;
  if (t <= Scalar(0)) return std::nullopt;
  return t;
}

/// Circumcenter of a non-degenerate triangle.
template <typename Scalar>
Vec3<Scalar> circumcenter(const Vec3<Scalar>& a, const Vec3<Scalar>& b, const Vec3<Scalar>& c) {
  const Vec3<Scalar> ab = b - a;
  const Vec3<Scalar> ac = c - a;
  const Vec3<Scalar> n = ab.cross(ac);
  const Scalar denom = Scalar(2) * n.squaredNorm();
  return a + (ac.squaredNorm() * n.cross(ab) + ab.squaredNorm() * ac.cross(n)) / denom;
}

template <typename Scalar>
Scalar triangle_area(const Vec3<Scalar>& a, const Vec3<Scalar>& b, const Vec3<Scalar>& c) {
  return Scalar(0.5) * (b - a).cross(c - a).norm();
}

/// Center of the ball of `radius` touching a, b, c on the side of the triangle's
/// winding normal; nullopt when the circumradius exceeds the radius.
template <typename Scalar>
std::optional<Vec3<Scalar>> ball_center(const Vec3<Scalar>& a, const Vec3<Scalar>& b, const Vec3<Scalar>& c,
                                        Scalar radius) {
  const Vec3<Scalar> n = (b - a).cross(c - a);
  const Scalar nn = n.norm();
  if (!(nn > Scalar(0))) return std::nullopt;
  const Vec3<Scalar> cc = circumcenter(a, b, c);
  const Scalar rho2 = (a - cc).squaredNorm();
  const Scalar h2 = radius * radius - rho2;
  if (h2 < Scalar(0)) return std::nullopt;
  return Vec3<Scalar>(cc + n / nn * std::sqrt(h2));
}

// ============================================================================
// Operations
// ============================================================================

/// Indices of the points inside the box, in input order.
std::vector<std::size_t> crop_indices(const PointCloud& cloud, const BoundingBox3& box);
PointCloud crop_by_box(const PointCloud& cloud, const BoundingBox3& box);

Point3 centroid(std::span<const Point3> points);

/// ½·mean_a min_b + ½·mean_b min_a. Throws EmptyCloud.
double chamfer_distance(const PointCloud& a, const PointCloud& b);
double chamfer_distance(std::span<const Point3> a, std::span<const Point3> b);

/// Distance to the closest point on any triangle. Throws EmptyMesh.
double point_to_mesh_distance(const Point3& p, const TriangleMesh& mesh);

/// Bounding-volume accelerated repeated point-to-mesh queries.
class MeshDistanceQuery {
 public:
  explicit MeshDistanceQuery(const TriangleMesh& mesh);
  double distance(const Point3& p) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1, right = -1;
    int first = 0, count = 0;
  };
  int build(int first, int count);

  const TriangleMesh* mesh_;
  std::vector<int> order_;
  std::vector<Eigen::AlignedBox3d> tri_boxes_;
  std::vector<Node> nodes_;
};

/// Wraps an angle to (-π, π].
double wrap_angle(double radians);

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace semican
