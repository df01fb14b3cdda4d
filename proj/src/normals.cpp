#include <Eigen/Eigenvalues>

#include <algorithm>

#include "semican/spatial_index.hpp"
#include "semican/surface.hpp"

namespace semican {

NormalEstimate estimate_normals(std::span<const Point3> points, const Point3& origin, std::size_t k) {
  NormalEstimate out;
  out.normals.resize(points.size(), Eigen::Vector3d::UnitZ());
  if (points.empty()) return out;

  const std::size_t kk = std::min(std::max<std::size_t>(k, 3), points.size());
  const KdTree tree(points);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nbrs = tree.knn(points[i], kk);
    Point3 mean = Point3::Zero();
    for (const auto& n : nbrs) mean += points[n.index];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& n : nbrs) {
      const Eigen::Vector3d d = points[n.index] - mean;
      cov += d * d.transpose();
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d evals = solver.eigenvalues();
    Eigen::Vector3d normal = solver.eigenvectors().col(0);
    const Eigen::Vector3d to_origin = origin - points[i];

    // rank <= 1: any direction orthogonal to the line, chosen towards the origin
    if (evals(1) <= 1e-12 * std::max(evals(2), 1e-300)) {
      const Eigen::Vector3d axis = solver.eigenvectors().col(2);
      Eigen::Vector3d ortho = to_origin - to_origin.dot(axis) * axis;
      if (ortho.norm() < 1e-12) ortho = axis.unitOrthogonal();
      normal = ortho;
      out.degenerate.push_back(i);
    }
    normal.normalize();
    if (normal.dot(to_origin) < 0.0) normal = -normal;
    out.normals[i] = normal;
  }
  return out;
}

}  // namespace semican
