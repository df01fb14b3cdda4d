#include "semican/spatial_index.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace semican {

namespace {

double box_sq_distance(const Eigen::AlignedBox3d& box, const Point3& p) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (p[k] < box.min()[k]) {
      const double d = box.min()[k] - p[k];
      d2 += d * d;
    } else if (p[k] > box.max()[k]) {
      const double d = p[k] - box.max()[k];
      d2 += d * d;
    }
  }
  return d2;
}

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.index < b.index;
}

}  // namespace

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / std::max<std::size_t>(leaf_size, 1) + 2);
    build(0, static_cast<int>(points_.size()), std::max<std::size_t>(leaf_size, 1));
  }
}

int KdTree::build(int first, int count, std::size_t leaf_size) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  for (int i = first; i < first + count; ++i) box.extend(points_[order_[i]]);
  nodes_[id].box = box;
  nodes_[id].first = first;
  nodes_[id].count = count;
  if (static_cast<std::size_t>(count) <= leaf_size) return id;

  int axis = 0;
  box.sizes().maxCoeff(&axis);
  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](int a, int b) {
                     if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  const int left = build(first, mid - first, leaf_size);
  const int right = build(mid, first + count - mid, leaf_size);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::for_each_in_radius(const Point3& query, double radius,
                                const std::function<void(std::size_t, double)>& visit) const {
  if (nodes_.empty() || radius < 0.0) return;
  const double r2 = radius * radius;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_sq_distance(node.box, query) > r2) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int idx = order_[i];
        const double d2 = (points_[idx] - query).squaredNorm();
        if (d2 <= r2) visit(static_cast<std::size_t>(idx), d2);
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
}

bool KdTree::any_within(const Point3& query, double radius, std::span<const std::size_t> excluded) const {
  if (nodes_.empty() || radius <= 0.0) return false;
  const double r2 = radius * radius;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_sq_distance(node.box, query) >= r2) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto idx = static_cast<std::size_t>(order_[i]);
        if ((points_[idx] - query).squaredNorm() < r2 &&
            std::find(excluded.begin(), excluded.end(), idx) == excluded.end()) {
          return true;
        }
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return false;
}

std::vector<Neighbor> KdTree::radius_search(const Point3& query, double radius) const {
  std::vector<Neighbor> out;
  for_each_in_radius(query, radius, [&](std::size_t i, double d2) { out.push_back({i, std::sqrt(d2)}); });
  std::sort(out.begin(), out.end(), neighbor_less);
  return out;
}

std::vector<Neighbor> KdTree::knn(const Point3& query, std::size_t k) const {
  std::vector<Neighbor> out;
  if (nodes_.empty() || k == 0) return out;
  // max-heap on (d2, index) keeps the k best
  auto worse = [](const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
    return a < b;
  };
  std::priority_queue<std::pair<double, std::size_t>, std::vector<std::pair<double, std::size_t>>,
                      decltype(worse)>
      heap(worse);

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  frontier.push({box_sq_distance(nodes_[0].box, query), 0});
  while (!frontier.empty()) {
    const auto [bd, id] = frontier.top();
    frontier.pop();
    if (heap.size() == k && bd > heap.top().first) break;
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto idx = static_cast<std::size_t>(order_[i]);
        const std::pair<double, std::size_t> cand{(points_[idx] - query).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
    } else {
      frontier.push({box_sq_distance(nodes_[node.left].box, query), node.left});
      frontier.push({box_sq_distance(nodes_[node.right].box, query), node.right});
    }
  }
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back({heap.top().second, std::sqrt(heap.top().first)});
    heap.pop();
  }
  std::sort(out.begin(), out.end(), neighbor_less);
  return out;
}

Neighbor KdTree::nearest(const Point3& query) const {
  if (points_.empty()) throw Error(ErrorCode::EmptyCloud, "nearest on empty index");
  return knn(query, 1).front();
}

}  // namespace semican
