#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "semican/spatial_index.hpp"
#include "semican/surface.hpp"

namespace semican {

void AlphaParams::validate() const { require(alpha > 0.0, "alpha must be positive"); }

namespace {

using Vec3L = Vec3<long double>;

struct Tet {
  std::array<int, 4> v;    // orient(v) > 0
  std::array<int, 4> adj;  // neighbour across the face opposite v[k], -1 on the hull
  bool alive;
};

long double orient(const Vec3L& a, const Vec3L& b, const Vec3L& c, const Vec3L& d) {
  return (b - a).dot((c - a).cross(d - a));
}

/// Positive when e is strictly inside the sphere through a, b, c, d, given
/// orient(a, b, c, d) > 0. Lifted 4x4 determinant relative to e.
long double insphere(const Vec3L& a, const Vec3L& b, const Vec3L& c, const Vec3L& d, const Vec3L& e) {
  const Vec3L ae = a - e, be = b - e, ce = c - e, de = d - e;
  const long double ab = ae.x() * be.y() - be.x() * ae.y();
  const long double bc = be.x() * ce.y() - ce.x() * be.y();
  const long double cd = ce.x() * de.y() - de.x() * ce.y();
  const long double da = de.x() * ae.y() - ae.x() * de.y();
  const long double ac = ae.x() * ce.y() - ce.x() * ae.y();
  const long double bd = be.x() * de.y() - de.x() * be.y();
  const long double abc = ae.z() * bc - be.z() * ac + ce.z() * ab;
  const long double bcd = be.z() * cd - ce.z() * bd + de.z() * bc;
  const long double cda = ce.z() * da + de.z() * ac + ae.z() * cd;
  const long double dab = de.z() * ab + ae.z() * bd + be.z() * da;
  const long double det = (de.squaredNorm() * abc - ce.squaredNorm() * dab) +
                          (be.squaredNorm() * cda - ae.squaredNorm() * bcd);
  // the expansion above has the opposite sign convention to orient()
  return -det;
}

/// Interleaves the top 21 bits of three unit-range coordinates.
std::uint64_t morton_key(const Vec3L& p) {
  auto spread = [](std::uint64_t x) {
    x &= 0x1fffff;
    x = (x | x << 32) & 0x1f00000000ffffULL;
    x = (x | x << 16) & 0x1f0000ff0000ffULL;
    x = (x | x << 8) & 0x100f00f00f00f00fULL;
    x = (x | x << 4) & 0x10c30c30c30c30c3ULL;
    x = (x | x << 2) & 0x1249249249249249ULL;
    return x;
  };
  auto q = [](long double c) {
    return static_cast<std::uint64_t>(std::clamp((c + 0.5L) * 2097151.0L, 0.0L, 2097151.0L));
  };
  return spread(q(p.x())) | spread(q(p.y())) << 1 | spread(q(p.z())) << 2;
}

std::array<int, 3> sorted_face(int a, int b, int c) {
  std::array<int, 3> f{a, b, c};
  std::sort(f.begin(), f.end());
  return f;
}

/// True if any point other than a, b, c is strictly inside either ball of
/// radius alpha through the triangle; returns the winding that has an empty ball.
std::optional<Triangle> exposed_winding(std::span<const Point3> points, const KdTree& tree, int a, int b, int c,
                                        double alpha) {
  if (triangle_area<double>(points[a], points[b], points[c]) <= 1e-12) return std::nullopt;
  const std::array<std::size_t, 3> ex{static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                                      static_cast<std::size_t>(c)};
  for (const Triangle& t : {Triangle{a, b, c}, Triangle{a, c, b}}) {
    const auto center = ball_center<double>(points[t[0]], points[t[1]], points[t[2]], alpha);
    if (!center) return std::nullopt;  // circumradius larger than alpha
    if (!tree.any_within(*center, alpha - 1e-10, ex)) return t;
  }
  return std::nullopt;
}

TriangleMesh finish_mesh(std::span<const Point3> points, std::vector<Triangle> triangles) {
  std::sort(triangles.begin(), triangles.end(), [](const Triangle& x, const Triangle& y) {
    return sorted_face(x[0], x[1], x[2]) < sorted_face(y[0], y[1], y[2]);
  });
  TriangleMesh mesh;
  mesh.vertices.assign(points.begin(), points.end());
  mesh.normals.assign(points.size(), Eigen::Vector3d::Zero());
  mesh.triangles = std::move(triangles);
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d n = (points[t[1]] - points[t[0]]).cross(points[t[2]] - points[t[0]]);
    for (const int v : t) mesh.normals[v] += n;
  }
  for (auto& n : mesh.normals) {
    if (n.norm() > 0.0) {
      n.normalize();
    } else {
      n = Eigen::Vector3d::UnitZ();
    }
  }
  if (mesh.triangles.empty()) throw Error(ErrorCode::MeshEmpty, "alpha shape has no boundary triangles");
  return mesh;
}

}  // namespace

std::vector<std::array<int, 4>> delaunay_tetrahedra(std::span<const Point3> points) {
  const int n = static_cast<int>(points.size());
  if (n < 4) return {};

  Eigen::AlignedBox3d bounds;
  for (const auto& p : points) bounds.extend(p);
  const Point3 mid = bounds.center();
  const double scale = std::max(bounds.sizes().maxCoeff(), 1e-9);

  // normalized coordinates with a tiny deterministic jitter that breaks
  // co-spherical and co-planar ties
  std::vector<Vec3L> pts(n + 4);
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> jitter(-1e-8, 1e-8);
  for (int i = 0; i < n; ++i) {
    const Point3 q = (points[i] - mid) / scale;
    pts[i] = Vec3L(q.x() + jitter(rng), q.y() + jitter(rng), q.z() + jitter(rng));
  }
  const long double big = 1e4L;
  pts[n + 0] = Vec3L(-big, -big, -big);
  pts[n + 1] = Vec3L(big, -big, -big);
  pts[n + 2] = Vec3L(0, big, -big);
  pts[n + 3] = Vec3L(0, 0, big);

  std::vector<Tet> tets;
  auto make_tet = [&](const std::array<int, 4>& v) {
    tets.push_back({v, {-1, -1, -1, -1}, true});
    return static_cast<int>(tets.size()) - 1;
  };
  auto tet_orient = [&](const std::array<int, 4>& v) { return orient(pts[v[0]], pts[v[1]], pts[v[2]], pts[v[3]]); };
  {
    std::array<int, 4> v{n, n + 1, n + 2, n + 3};
    if (tet_orient(v) < 0) std::swap(v[2], v[3]);
    make_tet(v);
  }
  auto in_conflict = [&](int t, const Vec3L& q) {
    const auto& v = tets[t].v;
    return insphere(pts[v[0]], pts[v[1]], pts[v[2]], pts[v[3]], q) > 0;
  };
  auto replaced = [](std::array<int, 4> v, int k, int p) {
    v[k] = p;
    return v;
  };

  // spatially coherent insertion keeps the walks short
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> keys(n);
  for (int i = 0; i < n; ++i) keys[i] = morton_key(pts[i]);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });

  int last = 0;
  std::mt19937 walk_rng(7);
  std::vector<int> cavity;
  std::vector<int> stack;
  std::vector<char> in_cavity;
  std::map<std::pair<int, int>, std::pair<int, int>> open_edges;
  for (const int p : order) {
    const Vec3L& q = pts[p];

    // remembering stochastic walk to a tetrahedron containing q
    int cur = last;
    int start = -1;
    int previous = -1;
    for (std::size_t steps = 0; steps < 4096; ++steps) {
      const Tet& t = tets[cur];
      const int offset = static_cast<int>(walk_rng() & 3);
      int next = -1;
      for (int j = 0; j < 4 && next < 0; ++j) {
        const int k = (j + offset) & 3;
        if (t.adj[k] < 0 || t.adj[k] == previous) continue;
        if (tet_orient(replaced(t.v, k, p)) < 0) next = t.adj[k];
      }
      if (next < 0) {
        start = cur;
        break;
      }
      previous = cur;
      cur = next;
    }
    if (start < 0 || !in_conflict(start, q)) {
      // numerically stuck: search outward from where the walk stopped
      start = -1;
      std::vector<int> frontier{cur};
      std::unordered_map<int, char> seen{{cur, 1}};
      for (std::size_t head = 0; head < frontier.size(); ++head) {
        const int t = frontier[head];
        if (in_conflict(t, q)) {
          start = t;
          break;
        }
        for (const int nb : tets[t].adj) {
          if (nb >= 0 && seen.emplace(nb, 1).second) frontier.push_back(nb);
        }
      }
      if (start < 0) continue;  // duplicate point
    }

    // grow the cavity of tetrahedra whose circumsphere contains q
    in_cavity.resize(tets.size(), 0);
    cavity.clear();
    stack.assign(1, start);
    in_cavity[start] = 1;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cavity.push_back(t);
      for (const int nb : tets[t].adj) {
        if (nb >= 0 && !in_cavity[nb] && in_conflict(nb, q)) {
          in_cavity[nb] = 1;
          stack.push_back(nb);
        }
      }
    }
    // keep the cavity star-shaped from q: drop tetrahedra with a boundary
    // face that q does not see from inside
    for (bool changed = true; changed;) {
      changed = false;
      for (const int t : cavity) {
        if (!in_cavity[t] || t == start) continue;
        for (int k = 0; k < 4; ++k) {
          const int outer = tets[t].adj[k];
          if (outer >= 0 && in_cavity[outer]) continue;
          if (tet_orient(replaced(tets[t].v, k, p)) <= 0) {
            in_cavity[t] = 0;
            changed = true;
            break;
          }
        }
      }
    }
    std::erase_if(cavity, [&](int t) { return !in_cavity[t]; });

    // star the cavity boundary from q
    open_edges.clear();
    for (const int t : cavity) {
      for (int k = 0; k < 4; ++k) {
        const int outer = tets[t].adj[k];
        if (outer >= 0 && in_cavity[outer]) continue;
        const std::array<int, 4> v = replaced(tets[t].v, k, p);
        const int nt = make_tet(v);
        tets[nt].adj[k] = outer;
        if (outer >= 0) {
          for (int m = 0; m < 4; ++m) {
            if (tets[outer].adj[m] == t) tets[outer].adj[m] = nt;
          }
        }
        // the other three faces contain q; pair them up through their shared edge
        for (int m = 0; m < 4; ++m) {
          if (m == k) continue;
          std::array<int, 2> e{};
          int c = 0;
          for (int r = 0; r < 4; ++r) {
            if (r != k && r != m) e[c++] = v[r];
          }
          const auto key = std::minmax(e[0], e[1]);
          auto it = open_edges.find(key);
          if (it == open_edges.end()) {
            open_edges.emplace(key, std::make_pair(nt, m));
          } else {
            tets[nt].adj[m] = it->second.first;
            tets[it->second.first].adj[it->second.second] = nt;
            open_edges.erase(it);
          }
        }
      }
    }
    for (const int t : cavity) {
      tets[t].alive = false;
      in_cavity[t] = 0;
    }
    last = static_cast<int>(tets.size()) - 1;
  }

  std::vector<std::array<int, 4>> out;
  for (const auto& t : tets) {
    if (!t.alive) continue;
    if (std::any_of(t.v.begin(), t.v.end(), [n](int v) { return v >= n; })) continue;
    out.push_back(t.v);
  }
  return out;
}

TriangleMesh alpha_shape(std::span<const Point3> points, const AlphaParams& params) {
  params.validate();
  if (points.size() < 3) throw Error(ErrorCode::MeshEmpty, "alpha shape needs at least 3 points");
  const auto tets = delaunay_tetrahedra(points);
  if (tets.empty()) return alpha_shape_exhaustive(points, params);

  std::vector<std::array<int, 3>> faces;
  faces.reserve(tets.size() * 4);
  for (const auto& v : tets) {
    faces.push_back(sorted_face(v[0], v[1], v[2]));
    faces.push_back(sorted_face(v[0], v[1], v[3]));
    faces.push_back(sorted_face(v[0], v[2], v[3]));
    faces.push_back(sorted_face(v[1], v[2], v[3]));
  }
  std::sort(faces.begin(), faces.end());
  faces.erase(std::unique(faces.begin(), faces.end()), faces.end());

  const KdTree tree(points);
  std::vector<Triangle> triangles;
  for (const auto& f : faces) {
    if (auto t = exposed_winding(points, tree, f[0], f[1], f[2], params.alpha)) triangles.push_back(*t);
  }
  return finish_mesh(points, std::move(triangles));
}

TriangleMesh alpha_shape_exhaustive(std::span<const Point3> points, const AlphaParams& params) {
  params.validate();
  if (points.size() < 3) throw Error(ErrorCode::MeshEmpty, "alpha shape needs at least 3 points");
  const KdTree tree(points);
  const double reach = 2.0 * params.alpha;
  std::vector<Triangle> triangles;
  for (int a = 0; a < static_cast<int>(points.size()); ++a) {
    std::vector<int> nbrs;
    for (const auto& nb : tree.radius_search(points[a], reach)) {
      if (static_cast<int>(nb.index) > a) nbrs.push_back(static_cast<int>(nb.index));
    }
    std::sort(nbrs.begin(), nbrs.end());
    for (std::size_t p = 0; p < nbrs.size(); ++p) {
      for (std::size_t q = p + 1; q < nbrs.size(); ++q) {
        const int b = nbrs[p];
        const int c = nbrs[q];
        if ((points[b] - points[c]).norm() > reach) continue;
        if (auto t = exposed_winding(points, tree, a, b, c, params.alpha)) triangles.push_back(*t);
      }
    }
  }
  return finish_mesh(points, std::move(triangles));
}

std::string to_string(SurfaceMethod method) {
  return method == SurfaceMethod::ball_pivot ? "ball_pivot" : "alpha_shape";
}

SurfaceMethod surface_method_from_string(const std::string& name) {
  if (name == "ball_pivot" || name == "bpa") return SurfaceMethod::ball_pivot;
  if (name == "alpha_shape" || name == "alpha") return SurfaceMethod::alpha_shape;
  throw Error(ErrorCode::InvalidArgument, "unknown surface method '" + name + "'");
}

void SurfaceParams::validate() const {
  bpa.validate();
  alpha.validate();
  require(min_points >= 3, "surface completion min_points must be >= 3");
}

SurfaceResult complete_surface(const ObjectInstance& instance, const Point3& sensor_origin,
                               const SurfaceParams& params) {
  params.validate();
  const auto& pts = instance.points.points;
  if (pts.size() < params.min_points) {
    throw Error(ErrorCode::TooFewPoints,
                std::to_string(pts.size()) + " points < minimum " + std::to_string(params.min_points));
  }

  SurfaceResult result;
  const NormalEstimate normals = estimate_normals(pts, sensor_origin, params.bpa.normal_k);
  result.degenerate_normals = normals.degenerate.size();

  std::ostringstream prov;
  prov << to_string(params.method);
  if (params.method == SurfaceMethod::ball_pivot) {
    prov << " radii=" << params.bpa.radii.size() << "x[" << params.bpa.radii.front() << ".."
         << params.bpa.radii.back() << "] normal_k=" << params.bpa.normal_k;
    result.mesh = ball_pivot(pts, normals.normals, params.bpa);
  } else {
    prov << " alpha=" << params.alpha.alpha;
    result.mesh = alpha_shape(pts, params.alpha);
    result.mesh.normals = normals.normals;
  }
  result.provenance = prov.str();
  return result;
}

}  // namespace semican
