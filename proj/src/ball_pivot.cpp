#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "semican/spatial_index.hpp"
#include "semican/surface.hpp"

namespace semican {

void BpaParams::validate() const {
  require(!radii.empty(), "BPA needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0, "BPA radii must be positive");
    if (i > 0) require(radii[i] > radii[i - 1], "BPA radii must be strictly ascending");
  }
  require(normal_k >= 3, "normal neighbourhood must be >= 3");
}

std::vector<double> BpaParams::linear_radii(double max_radius, std::size_t count) {
  require(max_radius > 0.0 && count >= 1, "radius schedule needs a positive maximum and count");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = max_radius * static_cast<double>(i + 1) / static_cast<double>(count);
  }
  return out;
}

namespace {

// A point strictly closer than radius - kBallSlack to a ball center blocks it.
constexpr double kBallSlack = 1e-10;
constexpr double kMinArea = 1e-12;
constexpr std::size_t kSeedNeighbors = 24;

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::uint64_t tri_key(int a, int b, int c) {
  std::array<std::uint64_t, 3> s{static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b),
                                  static_cast<std::uint64_t>(c)};
  std::sort(s.begin(), s.end());
  return (s[0] << 42) | (s[1] << 21) | s[2];
}

struct FrontEdge {
  int from;
  int to;
  int opposite;
};

class BallPivoter {
 public:
  BallPivoter(std::span<const Point3> points, std::span<const Eigen::Vector3d> normals)
      : points_(points), normals_(normals), tree_(points), used_(points.size(), 0), open_(points.size(), 0) {}

  void run(const std::vector<double>& radii) {
    for (const double r : radii) {
      radius_ = r;
      std::deque<FrontEdge> retry;
      retry.swap(boundary_);
      expand(retry);
      seed_and_expand();
    }
  }

  std::vector<Triangle> take_triangles() { return std::move(triangles_); }

 private:
  bool directed_used(int a, int b) const { return directed_.count(edge_key(a, b)) != 0; }

  int undirected_count(int a, int b) const {
    return static_cast<int>(directed_used(a, b)) + static_cast<int>(directed_used(b, a));
  }

  bool inner(int v) const { return used_[v] && open_[v] == 0; }

  bool normals_agree(int a, int b, int c) const {
    const Eigen::Vector3d n = (points_[b] - points_[a]).cross(points_[c] - points_[a]);
    int votes = 0;
    for (const int v : {a, b, c}) votes += n.dot(normals_[v]) > 0.0 ? 1 : 0;
    return votes >= 2;
  }

  bool ball_empty(const Point3& center, int a, int b, int c) const {
    const std::array<std::size_t, 3> ex{static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                                        static_cast<std::size_t>(c)};
    return !tree_.any_within(center, radius_ - kBallSlack, ex);
  }

  /// Topology and geometry checks shared by seeding and pivoting.
  bool can_add(int a, int b, int c) const {
    if (a == b || b == c || a == c) return false;
    if (directed_used(a, b) || directed_used(b, c) || directed_used(c, a)) return false;
    if (triangle_set_.count(tri_key(a, b, c))) return false;
    if (triangle_area<double>(points_[a], points_[b], points_[c]) <= kMinArea) return false;
    return normals_agree(a, b, c);
  }

  void add_triangle(int a, int b, int c, std::deque<FrontEdge>& front) {
    triangles_.push_back({a, b, c});
    triangle_set_.insert(tri_key(a, b, c));
    const std::array<std::pair<int, int>, 3> edges{{{a, b}, {b, c}, {c, a}}};
    const std::array<int, 3> opp{c, a, b};
    for (std::size_t e = 0; e < 3; ++e) {
      const auto [u, v] = edges[e];
      directed_.insert(edge_key(u, v));
      if (directed_used(v, u)) {
        --open_[u];
        --open_[v];
      } else {
        ++open_[u];
        ++open_[v];
        front.push_back({u, v, opp[e]});
      }
    }
    used_[a] = used_[b] = used_[c] = 1;
  }

  /// Rolls the ball of the current radius over edge from->to, away from the
  /// triangle (from, to, opposite). Adds (to, from, x) for the first valid x.
  bool pivot(const FrontEdge& edge, std::deque<FrontEdge>& front) {
    const int i = edge.from;
    const int j = edge.to;
    const int o = edge.opposite;
    const auto start = ball_center<double>(points_[i], points_[j], points_[o], radius_);
    if (!start) return false;

    const Point3 mid = 0.5 * (points_[i] + points_[j]);
    const Eigen::Vector3d axis = (points_[j] - points_[i]).normalized();
    const Eigen::Vector3d tri_n = (points_[j] - points_[i]).cross(points_[o] - points_[i]).normalized();
    Eigen::Vector3d w = points_[o] - mid;
    w -= w.dot(axis) * axis;
    w.normalize();

    const Eigen::Vector3d rel = *start - mid;
    const double ring = rel.norm();
    Eigen::Vector3d u = rel / ring;
    if (!(ring > 0.0)) u = tri_n;
    // rotation sense: normal side turns towards the far side of the edge
    const Eigen::Vector3d v = u.dot(w) * tri_n - u.dot(tri_n) * w;

    struct Candidate {
      double angle;
      int index;
      Point3 center;
    };
    std::vector<Candidate> candidates;
    tree_.for_each_in_radius(mid, ring + radius_, [&](std::size_t idx, double) {
      const int x = static_cast<int>(idx);
      if (x == i || x == j || x == o || inner(x)) return;
      const auto c = ball_center<double>(points_[j], points_[i], points_[x], radius_);
      if (!c) return;
      const Eigen::Vector3d d = *c - mid;
      double angle = std::atan2(d.dot(v), d.dot(u));
      if (angle < -1e-9) angle += 2.0 * kPi;
      candidates.push_back({std::max(angle, 0.0), x, *c});
    });
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.angle != b.angle) return a.angle < b.angle;
      return a.index < b.index;
    });

    for (const auto& cand : candidates) {
      const int x = cand.index;
      if (!can_add(j, i, x)) continue;
      if (!ball_empty(cand.center, i, j, x)) continue;
      add_triangle(j, i, x, front);
      return true;
    }
    return false;
  }

  void expand(std::deque<FrontEdge>& front) {
    while (!front.empty()) {
      const FrontEdge edge = front.front();
      front.pop_front();
      if (directed_used(edge.to, edge.from)) continue;  // already closed
      if (!pivot(edge, front)) boundary_.push_back(edge);
    }
  }

  bool try_seed(int a) {
    std::vector<int> cand;
    for (const auto& n : tree_.knn(points_[a], kSeedNeighbors + 1)) {
      if (n.distance > 2.0 * radius_) break;
      if (static_cast<int>(n.index) == a) continue;
      if (cand.size() < kSeedNeighbors) cand.push_back(static_cast<int>(n.index));
    }
    for (std::size_t p = 0; p < cand.size(); ++p) {
      for (std::size_t q = p + 1; q < cand.size(); ++q) {
        int b = cand[p];
        int c = cand[q];
        if (inner(b) || inner(c)) continue;
        const Eigen::Vector3d n = (points_[b] - points_[a]).cross(points_[c] - points_[a]);
        if (n.dot(normals_[a]) < 0.0) std::swap(b, c);
        if (!can_add(a, b, c)) continue;
        const auto center = ball_center<double>(points_[a], points_[b], points_[c], radius_);
        if (!center || !ball_empty(*center, a, b, c)) continue;
        std::deque<FrontEdge> front;
        add_triangle(a, b, c, front);
        expand(front);
        return true;
      }
    }
    return false;
  }

  void seed_and_expand() {
    for (int a = 0; a < static_cast<int>(points_.size()); ++a) {
      if (!used_[a]) try_seed(a);
    }
  }

  std::span<const Point3> points_;
  std::span<const Eigen::Vector3d> normals_;
  KdTree tree_;
  double radius_ = 0.0;

  std::vector<char> used_;
  std::vector<int> open_;  // incident edges with a single triangle
  std::unordered_set<std::uint64_t> directed_;
  std::unordered_set<std::uint64_t> triangle_set_;
  std::vector<Triangle> triangles_;
  std::deque<FrontEdge> boundary_;
};

}  // namespace

TriangleMesh ball_pivot(std::span<const Point3> points, std::span<const Eigen::Vector3d> normals,
                        const BpaParams& params) {
  params.validate();
  require(normals.size() == points.size(), "one normal per point required");
  if (points.size() < 3) throw Error(ErrorCode::MeshEmpty, "ball pivoting needs at least 3 points");
  require(points.size() < (std::size_t{1} << 21), "ball pivoting supports at most 2^21 points");

  std::vector<Eigen::Vector3d> unit(normals.begin(), normals.end());
  for (auto& n : unit) {
    require(n.allFinite() && n.norm() > 0.0, "normals must be finite and non-zero");
    n.normalize();
  }

  BallPivoter pivoter(points, unit);
  pivoter.run(params.radii);

  TriangleMesh mesh;
  mesh.vertices.assign(points.begin(), points.end());
  mesh.normals = std::move(unit);
  mesh.triangles = pivoter.take_triangles();
  if (mesh.triangles.empty()) throw Error(ErrorCode::MeshEmpty, "no seed triangle found at any radius");
  return mesh;
}

}  // namespace semican
