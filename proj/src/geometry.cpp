#include "semican/geometry.hpp"

#include <algorithm>
#include <numeric>

#include "semican/spatial_index.hpp"

namespace semican {

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.frame_id = frame_id;
  out.points.reserve(indices.size());
  if (has_intensity()) out.intensity.reserve(indices.size());
  for (const std::size_t i : indices) {
    out.points.push_back(points.at(i));
    if (has_intensity()) out.intensity.push_back(intensity[i]);
  }
  return out;
}

void PointCloud::validate() const {
  require(intensity.empty() || intensity.size() == points.size(),
          "intensity length " + std::to_string(intensity.size()) + " != point count " +
              std::to_string(points.size()));
  for (const auto& p : points) require(p.allFinite(), "non-finite point coordinate");
}

void BoundingBox3::validate() const {
  require(center.allFinite() && dims.allFinite() && std::isfinite(yaw), "non-finite box parameter");
  require(dims.x() > 0.0 && dims.y() > 0.0 && dims.z() > 0.0, "box dimensions must be positive");
}

Point3 BoundingBox3::to_local(const Point3& p) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const Point3 d = p - center;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

Point3 BoundingBox3::to_world(const Point3& local) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return center + Point3(c * local.x() - s * local.y(), s * local.x() + c * local.y(), local.z());
}

bool BoundingBox3::contains(const Point3& p) const {
  const Point3 q = to_local(p);
  const Eigen::Vector3d half = 0.5 * dims.array() + kFaceTolerance;
  return std::abs(q.x()) <= half.x() && std::abs(q.y()) <= half.y() && std::abs(q.z()) <= half.z();
}

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return semican::triangle_area<double>(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

double TriangleMesh::surface_area() const {
  double area = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) area += triangle_area(t);
  return area;
}

Eigen::Vector3d TriangleMesh::face_normal(std::size_t t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]).normalized();
}

void TriangleMesh::validate() const {
  require(normals.size() == vertices.size(), "normal count must equal vertex count");
  const int n = static_cast<int>(vertices.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (const int idx : triangles[t]) require(idx >= 0 && idx < n, "triangle index out of range");
    require(triangle_area(t) > 1e-12, "degenerate triangle " + std::to_string(t));
  }
  for (const auto& nrm : normals) require(std::abs(nrm.norm() - 1.0) <= 1e-6, "normal is not unit length");
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
  require(m.allFinite(), "non-finite transform");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  require((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6,
          "rotation block is not orthonormal");
  require(std::abs(r.determinant() - 1.0) <= 1e-6, "rotation determinant must be 1");
  require((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= 1e-6,
          "last row must be (0,0,0,1)");
  RigidTransform out;
  out.m_ = m;
  out.m_.row(3) << 0, 0, 0, 1;
  return out;
}

RigidTransform RigidTransform::from_parts(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return from_matrix(m);
}

RigidTransform RigidTransform::translation(const Eigen::Vector3d& t) {
  return from_parts(Eigen::Matrix3d::Identity(), t);
}

RigidTransform RigidTransform::rotation_z(double yaw) {
  return from_parts(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), Eigen::Vector3d::Zero());
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  const Eigen::Matrix3d rt = rotation().transpose();
  out.m_.topLeftCorner<3, 3>() = rt;
  out.m_.topRightCorner<3, 1>() = -rt * translation();
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.m_ = m_ * rhs.m_;
  out.m_.row(3) << 0, 0, 0, 1;
  return out;
}

PointCloud RigidTransform::apply(const PointCloud& cloud) const {
  PointCloud out = cloud;
  for (auto& p : out.points) p = apply(p);
  return out;
}

TriangleMesh RigidTransform::apply(const TriangleMesh& mesh) const {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = apply(v);
  for (auto& n : out.normals) n = apply_direction(n);
  return out;
}

std::vector<std::size_t> crop_indices(const PointCloud& cloud, const BoundingBox3& box) {
  box.validate();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (box.contains(cloud.points[i])) out.push_back(i);
  }
  return out;
}

PointCloud crop_by_box(const PointCloud& cloud, const BoundingBox3& box) {
  const auto idx = crop_indices(cloud, box);
  return cloud.select(idx);
}

Point3 centroid(std::span<const Point3> points) {
  Point3 sum = Point3::Zero();
  for (const auto& p : points) sum += p;
  return points.empty() ? sum : Point3(sum / static_cast<double>(points.size()));
}

double chamfer_distance(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCloud, "chamfer distance needs two non-empty clouds");
  const auto directed = [](std::span<const Point3> from, std::span<const Point3> to) {
    const KdTree tree(to);
    double sum = 0.0;
    for (const auto& p : from) sum += tree.nearest(p).distance;
    return sum / static_cast<double>(from.size());
  };
  // summed in a fixed order so that the result is exactly symmetric
  const double ab = directed(a, b);
  const double ba = directed(b, a);
  return 0.5 * std::min(ab, ba) + 0.5 * std::max(ab, ba);
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) { return chamfer_distance(a.points, b.points); }

double point_to_mesh_distance(const Point3& p, const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "point-to-mesh distance on empty mesh");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles) {
    const Point3 q =
        closest_point_on_triangle<double>(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    best = std::min(best, (q - p).squaredNorm());
  }
  return std::sqrt(best);
}

MeshDistanceQuery::MeshDistanceQuery(const TriangleMesh& mesh) : mesh_(&mesh) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "point-to-mesh distance on empty mesh");
  const int n = static_cast<int>(mesh.triangles.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  tri_boxes_.resize(n);
  for (int t = 0; t < n; ++t) {
    for (const int v : mesh.triangles[t]) tri_boxes_[t].extend(mesh.vertices[v]);
  }
  build(0, n);
}

int MeshDistanceQuery::build(int first, int count) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  for (int i = first; i < first + count; ++i) box.extend(tri_boxes_[order_[i]]);
  nodes_[id].box = box;
  nodes_[id].first = first;
  nodes_[id].count = count;
  if (count <= 4) return id;
  int axis = 0;
  box.sizes().maxCoeff(&axis);
  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count, [&](int a, int b) {
    return tri_boxes_[a].center()[axis] < tri_boxes_[b].center()[axis];
  });
  const int left = build(first, mid - first);
  const int right = build(mid, first + count - mid);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double MeshDistanceQuery::distance(const Point3& p) const {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.box.squaredExteriorDistance(p) >= best) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto& tri = mesh_->triangles[order_[i]];
        const Point3 q = closest_point_on_triangle<double>(p, mesh_->vertices[tri[0]], mesh_->vertices[tri[1]],
                                                           mesh_->vertices[tri[2]]);
        best = std::min(best, (q - p).squaredNorm());
      }
    } else {
      const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
      const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
      if (dl < dr) {
        stack.push_back(node.right);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }
  return std::sqrt(best);
}

double wrap_angle(double radians) {
  double a = std::fmod(radians, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

}  // namespace semican
