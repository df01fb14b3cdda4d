#include "semican/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "semican/spatial_index.hpp"

namespace semican {

std::string to_string(SamplingStrategy strategy) {
  switch (strategy) {
    case SamplingStrategy::vres: return "vres";
    case SamplingStrategy::surface_area: return "surface-area";
    case SamplingStrategy::virtual_lidar: return "virtual-lidar";
  }
  return "vres";
}

SamplingStrategy sampling_strategy_from_string(const std::string& name) {
  if (name == "vres") return SamplingStrategy::vres;
  if (name == "surface-area" || name == "surface_area" || name == "sa") return SamplingStrategy::surface_area;
  if (name == "virtual-lidar" || name == "virtual_lidar" || name == "vl") return SamplingStrategy::virtual_lidar;
  throw Error(ErrorCode::InvalidArgument, "unknown sampling strategy '" + name + "'");
}

void SamplingParams::validate() const {
  require(d_ideal > 0.0, "d_ideal must be positive");
  require(sa_density > 0.0, "sa_density must be positive");
  require(min_beta >= 1.0, "min_beta must be >= 1");
  require(beta_max >= min_beta, "beta_max must be >= min_beta");
}

double upsampling_factor(double d_o, const SensorConfig& config, const SamplingParams& params) {
  require(d_o >= 0.0, "object distance must be non-negative");
  params.validate();
  const double d_v = vertical_point_distance(d_o, config);
  return std::clamp(d_v / params.d_ideal, params.min_beta, params.beta_max);
}

std::size_t target_count(std::size_t original, double beta) {
  require(beta >= 0.0 && std::isfinite(beta), "beta must be finite and non-negative");
  const auto scaled = static_cast<std::size_t>(std::llround(beta * static_cast<double>(original)));
  return std::max(original, scaled);
}

namespace {

/// 53-bit canonical double in [0, 1), identical on every platform.
double canonical(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<Point3> uniform_surface_sample(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyMesh, "mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::vector<Point3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = canonical(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& tri = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
    const double s = std::sqrt(canonical(rng));
    const double r = canonical(rng);
    const Point3& a = mesh.vertices[tri[0]];
    const Point3& b = mesh.vertices[tri[1]];
    const Point3& c = mesh.vertices[tri[2]];
    out.push_back((1.0 - s) * a + s * (1.0 - r) * b + s * r * c);
  }
  return out;
}

PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n_target, std::uint64_t seed) {
  require(n_target >= 1, "n_target must be >= 1");
  constexpr std::size_t kOversample = 5;
  const std::vector<Point3> pool = uniform_surface_sample(mesh, kOversample * n_target, seed);
  const double area = mesh.surface_area();

  const double r_max = std::sqrt(area / (2.0 * std::sqrt(3.0) * static_cast<double>(n_target)));
  const double reach = 2.0 * r_max;
  const KdTree tree(pool);

  auto weight = [reach](double d) { return std::pow(1.0 - d / reach, 8); };

  std::vector<std::vector<std::pair<std::size_t, double>>> neighbours(pool.size());
  std::vector<double> w(pool.size(), 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    tree.for_each_in_radius(pool[i], reach, [&](std::size_t j, double d2) {
      if (j == i) return;
      const double d = std::sqrt(d2);
      if (d >= reach) return;
      neighbours[i].emplace_back(j, weight(d));
      w[i] += weight(d);
    });
  }

  // heaviest first, lowest index among equals
  auto heavier = [](const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::set<std::pair<double, std::size_t>, decltype(heavier)> heap(heavier);
  for (std::size_t i = 0; i < pool.size(); ++i) heap.emplace(w[i], i);

  std::vector<char> alive(pool.size(), 1);
  std::size_t remaining = pool.size();
  while (remaining > n_target) {
    const auto top = *heap.begin();
    heap.erase(heap.begin());
    const std::size_t i = top.second;
    alive[i] = 0;
    --remaining;
    for (const auto& [j, wij] : neighbours[i]) {
      if (!alive[j]) continue;
      heap.erase({w[j], j});
      w[j] -= wij;
      heap.emplace(w[j], j);
    }
  }

  PointCloud out;
  out.points.reserve(n_target);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (alive[i]) out.points.push_back(pool[i]);
  }
  return out;
}

PointCloud raycast_sample(const TriangleMesh& mesh, const SensorPattern& pattern, const Point3& sensor_origin) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "cannot ray-cast an empty mesh");
  Scene scene;
  scene.ground_plane = false;
  SceneObject obj;
  obj.mesh = mesh;
  Eigen::AlignedBox3d bounds;
  for (const auto& v : mesh.vertices) bounds.extend(v);
  obj.box.center = bounds.center();
  obj.box.dims = bounds.sizes().cwiseMax(1e-6);
  scene.objects.push_back(std::move(obj));

  const LabeledScan hits = scan(scene, pattern, RigidTransform::translation(sensor_origin));
  if (hits.cloud.empty()) throw Error(ErrorCode::NoHits, "no pattern ray hits the mesh");
  PointCloud out;
  out.points.reserve(hits.cloud.size());
  for (const auto& p : hits.cloud.points) out.points.push_back(p + sensor_origin);
  return out;
}

SampledObject sample_semi_canonical(const TriangleMesh& mesh, const ObjectInstance& instance,
                                    const SensorConfig& config, const SamplingParams& params,
                                    const SampleContext& context) {
  params.validate();
  mesh.validate();
  SampledObject out;
  switch (params.strategy) {
    case SamplingStrategy::vres: {
      out.beta = upsampling_factor(instance.origin_distance, config, params);
      out.target = target_count(instance.points.size(), out.beta);
      out.cloud = poisson_disk_sample(mesh, out.target, context.seed);
      break;
    }
    case SamplingStrategy::surface_area: {
      const auto n = static_cast<std::size_t>(std::llround(params.sa_density * mesh.surface_area()));
      out.target = std::max<std::size_t>(n, 1);
      out.cloud = poisson_disk_sample(mesh, out.target, context.seed);
      break;
    }
    case SamplingStrategy::virtual_lidar: {
      require(context.target_pattern != nullptr, "virtual-lidar sampling needs a target pattern");
      out.cloud = raycast_sample(mesh, *context.target_pattern, context.sensor_origin);
      out.target = out.cloud.size();
      break;
    }
  }

  float mean_intensity = 0.0f;
  if (instance.points.has_intensity() && !instance.points.empty()) {
    const double sum = std::accumulate(instance.points.intensity.begin(), instance.points.intensity.end(), 0.0);
    mean_intensity = static_cast<float>(sum / static_cast<double>(instance.points.size()));
  }
  out.cloud.intensity.assign(out.cloud.size(), mean_intensity);
  out.cloud.frame_id = instance.parent_frame;
  return out;
}

}  // namespace semican
