#include <algorithm>
#include <numeric>

#include "semican/isolation.hpp"
#include "semican/spatial_index.hpp"

namespace semican {

namespace {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool lex_less(const Point3& a, const Point3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace

std::vector<int> dbscan(std::span<const Point3> points, double eps, int min_pts) {
  require(eps >= 0.0, "dbscan eps must be non-negative");
  require(min_pts >= 1, "dbscan min_pts must be >= 1");
  const std::size_t n = points.size();
  std::vector<int> labels(n, -1);
  if (n == 0) return labels;

  const KdTree tree(points);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    tree.for_each_in_radius(points[i], eps, [&](std::size_t j, double) { neighbors[i].push_back(j); });
    core[i] = static_cast<int>(neighbors[i].size()) >= min_pts;
  }

  DisjointSet sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (const std::size_t j : neighbors[i]) {
      if (core[j]) sets.unite(static_cast<int>(i), static_cast<int>(j));
    }
  }

  // root of each point's cluster, -1 for noise
  std::vector<int> root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) root[i] = sets.find(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    double best_d2 = 0.0;
    for (const std::size_t j : neighbors[i]) {
      if (!core[j]) continue;
      const double d2 = (points[j] - points[i]).squaredNorm();
      if (best < 0 || d2 < best_d2 || (d2 == best_d2 && lex_less(points[j], points[best]))) {
        best = static_cast<int>(j);
        best_d2 = d2;
      }
    }
    if (best >= 0) root[i] = root[best];
  }

  // relabel by ascending smallest member index
  std::vector<int> remap(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (root[i] < 0) continue;
    if (remap[root[i]] < 0) remap[root[i]] = next++;
    labels[i] = remap[root[i]];
  }
  return labels;
}

ObjectInstance vres_cluster(const PointCloud& points, const SensorConfig& config, const ClusterParams& params) {
  config.validate();
  params.validate();
  if (points.empty()) throw Error(ErrorCode::EmptySelection, "vres_cluster needs at least one point");

  const Point3 mask_centroid = centroid(points.points);
  const double d_o = (mask_centroid - config.origin).norm();
  const double eps = cluster_radius(d_o, config, params);
  const auto labels = dbscan(points.points, eps, params.min_pts);

  const int num_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (num_clusters <= 0) throw Error(ErrorCode::NoCluster, "all mask points classified as noise");

  std::vector<std::vector<std::size_t>> members(num_clusters);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) members[labels[i]].push_back(i);
  }
  std::vector<Point3> centers(num_clusters);
  for (int c = 0; c < num_clusters; ++c) {
    Point3 sum = Point3::Zero();
    for (const auto i : members[c]) sum += points.points[i];
    centers[c] = sum / static_cast<double>(members[c].size());
  }

  int best = 0;
  for (int c = 1; c < num_clusters; ++c) {
    const auto size_c = members[c].size();
    const auto size_b = members[best].size();
    if (size_c != size_b) {
      if (size_c > size_b) best = c;
      continue;
    }
    const double dc = (centers[c] - mask_centroid).squaredNorm();
    const double db = (centers[best] - mask_centroid).squaredNorm();
    if (dc < db || (dc == db && lex_less(centers[c], centers[best]))) best = c;
  }

  ObjectInstance out;
  out.indices = members[best];
  out.points = points.select(out.indices);
  out.source = InstanceSource::mask;
  out.origin_distance = (centroid(out.points.points) - config.origin).norm();
  out.parent_frame = points.frame_id;
  out.cluster_radius = eps;
  return out;
}

}  // namespace semican
