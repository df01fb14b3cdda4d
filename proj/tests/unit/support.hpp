#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "semican/geometry.hpp"

namespace testing {

using semican::Point3;
using semican::TriangleMesh;

inline std::vector<Point3> random_points(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = Point3(u(rng), u(rng), u(rng));
  return pts;
}

inline semican::PointCloud cloud_of(std::vector<Point3> pts) {
  semican::PointCloud c;
  c.points = std::move(pts);
  return c;
}

/// Planar grid on z = z0 with the given spacing, nx by ny points.
inline std::vector<Point3> grid_points(int nx, int ny, double spacing, double z0 = 0.0) {
  std::vector<Point3> pts;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) pts.emplace_back(i * spacing, j * spacing, z0);
  }
  return pts;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

/// Connected components among vertices referenced by at least one triangle,
/// joined through shared triangle edges.
inline std::size_t mesh_components(const TriangleMesh& mesh) {
  UnionFind uf(mesh.vertices.size());
  std::set<int> used;
  for (const auto& t : mesh.triangles) {
    uf.unite(t[0], t[1]);
    uf.unite(t[1], t[2]);
    used.insert(t.begin(), t.end());
  }
  std::set<int> roots;
  for (const int v : used) roots.insert(uf.find(v));
  return roots.size();
}

/// Largest number of triangles sharing any undirected edge.
inline std::size_t max_edge_incidence(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, std::size_t> count;
  std::size_t worst = 0;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      worst = std::max(worst, ++count[{std::min(a, b), std::max(a, b)}]);
    }
  }
  return worst;
}

/// Brute-force check that a ball of `radius` through the triangle, centred on
/// the side of its winding normal, has no input point strictly inside it.
inline bool ball_is_empty(const std::vector<Point3>& pts, const semican::Triangle& t, double radius, double tol) {
  const Point3& a = pts[t[0]];
  const Point3& b = pts[t[1]];
  const Point3& c = pts[t[2]];
  const Eigen::Vector3d n = (b - a).cross(c - a);
  // circumcentre from the 3x3 linear system, independent of the library helper
  Eigen::Matrix3d m;
  m.row(0) = 2.0 * (b - a).transpose();
  m.row(1) = 2.0 * (c - a).transpose();
  m.row(2) = n.transpose();
  const Eigen::Vector3d rhs(b.squaredNorm() - a.squaredNorm(), c.squaredNorm() - a.squaredNorm(), n.dot(a));
  const Point3 cc = m.colPivHouseholderQr().solve(rhs);
  const double h2 = radius * radius - (a - cc).squaredNorm();
  if (h2 < -1e-12) return false;
  const Point3 center = cc + n.normalized() * std::sqrt(std::max(0.0, h2));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (static_cast<int>(i) == t[0] || static_cast<int>(i) == t[1] || static_cast<int>(i) == t[2]) continue;
    if ((pts[i] - center).norm() < radius - tol) return false;
  }
  return true;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("semican_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << bytes;
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testing
