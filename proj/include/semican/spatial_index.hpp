#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "semican/geometry.hpp"

namespace semican {

struct Neighbor {
  std::size_t index;
  double distance;
};

/// Static 3-d tree over a point set. Query results are ordered by
/// (distance, insertion index); radius queries include points at exactly r.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 12);

  std::size_t size() const noexcept { return points_.size(); }
  const Point3& point(std::size_t i) const { return points_[i]; }

  std::vector<Neighbor> radius_search(const Point3& query, double radius) const;
  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const;
  Neighbor nearest(const Point3& query) const;

  /// Unordered visit of every point with squared distance <= radius².
  void for_each_in_radius(const Point3& query, double radius,
                          const std::function<void(std::size_t, double)>& visit) const;

  /// True when any point other than the excluded ones lies strictly closer
  /// than `radius`. Early-outs on the first hit.
  bool any_within(const Point3& query, double radius, std::span<const std::size_t> excluded) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;
    int right = -1;
    int first = 0;
    int count = 0;
  };

  int build(int first, int count, std::size_t leaf_size);

  std::vector<Point3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace semican
