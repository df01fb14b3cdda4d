#include "semican/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "semican/sampling.hpp"
#include "semican/spatial_index.hpp"

namespace semican {

DistanceStats summarize_distances(std::vector<double> d) {
  if (d.empty()) throw Error(ErrorCode::EmptyCloud, "no distances to summarize");
  std::sort(d.begin(), d.end());
  DistanceStats s;
  s.count = d.size();
  s.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  const std::size_t n = d.size();
  s.median = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  s.p95 = d[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1)];
  s.max = d.back();
  return s;
}

DistanceStats point_to_mesh_stats(std::span<const Point3> points, const TriangleMesh& mesh) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "no points to measure");
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "reference mesh has no triangles");
  const MeshDistanceQuery query(mesh);
  std::vector<double> d;
  d.reserve(points.size());
  for (const auto& p : points) d.push_back(query.distance(p));
  return summarize_distances(std::move(d));
}

double surface_fidelity(const TriangleMesh& completed, const TriangleMesh& ground_truth, std::size_t samples,
                        std::uint64_t seed) {
  const auto pts = uniform_surface_sample(completed, samples, seed);
  return point_to_mesh_stats(pts, ground_truth).median;
}

double mean_nn_spacing(std::span<const Point3> points) {
  if (points.size() < 2) throw Error(ErrorCode::EmptyCloud, "spacing needs at least two points");
  const KdTree tree(points);
  double sum = 0.0;
  for (const auto& p : points) {
    const auto nn = tree.knn(p, 2);
    // the first neighbour is the point itself unless it is duplicated
    sum += nn.size() > 1 ? nn[1].distance : 0.0;
  }
  return sum / static_cast<double>(points.size());
}

NormalizationMetrics eval_normalization(const PointCloud& raw_a, const PointCloud& raw_b,
                                        const PointCloud& normalized_a, const PointCloud& normalized_b,
                                        const TriangleMesh* ground_truth, double d_ideal) {
  for (const PointCloud* c : {&raw_a, &raw_b, &normalized_a, &normalized_b}) {
    if (c->empty()) throw Error(ErrorCode::EmptyCloud, "evaluation needs four non-empty clouds");
  }
  NormalizationMetrics m;
  m.d_ideal = d_ideal;
  m.raw_chamfer = chamfer_distance(raw_a, raw_b);
  m.normalized_chamfer = chamfer_distance(normalized_a, normalized_b);
  auto spacing = [](const PointCloud& c) { return c.size() > 1 ? mean_nn_spacing(c.points) : 0.0; };
  m.raw_a_spacing = spacing(raw_a);
  m.raw_b_spacing = spacing(raw_b);
  m.normalized_a_spacing = spacing(normalized_a);
  m.normalized_b_spacing = spacing(normalized_b);
  if (ground_truth != nullptr) {
    m.has_ground_truth = true;
    m.normalized_a_to_mesh = point_to_mesh_stats(normalized_a.points, *ground_truth);
    m.normalized_b_to_mesh = point_to_mesh_stats(normalized_b.points, *ground_truth);
  }
  return m;
}

std::string NormalizationMetrics::to_json() const {
  using nlohmann::json;
  auto stats = [](const DistanceStats& s) {
    return json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p95", s.p95}, {"max", s.max}};
  };
  json j{{"raw_chamfer", raw_chamfer},
         {"normalized_chamfer", normalized_chamfer},
         {"d_ideal", d_ideal},
         {"spacing",
          {{"raw_a", raw_a_spacing},
           {"raw_b", raw_b_spacing},
           {"normalized_a", normalized_a_spacing},
           {"normalized_b", normalized_b_spacing},
           {"normalized_a_ratio", normalized_a_spacing / d_ideal},
           {"normalized_b_ratio", normalized_b_spacing / d_ideal}}}};
  if (has_ground_truth) {
    j["point_to_mesh"] = {{"normalized_a", stats(normalized_a_to_mesh)}, {"normalized_b", stats(normalized_b_to_mesh)}};
  }
  return j.dump(2);
}

}  // namespace semican
