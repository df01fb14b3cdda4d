#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "semican/geometry.hpp"
#include "semican/isolation.hpp"
#include "semican/scan_sim.hpp"

namespace semican {

enum class SamplingStrategy { vres, surface_area, virtual_lidar };

std::string to_string(SamplingStrategy strategy);
/// Accepts "vres", "surface-area"/"surface_area", "virtual-lidar"/"virtual_lidar".
SamplingStrategy sampling_strategy_from_string(const std::string& name);

struct SamplingParams {
  SamplingStrategy strategy = SamplingStrategy::vres;
  double d_ideal = 0.05;     // meters
  double sa_density = 500;   // points per square meter
  double beta_max = 50.0;
  double min_beta = 1.0;

  void validate() const;
};

/// clamp(d_v / d_ideal, min_beta, beta_max) with d_v the ring spacing at d_o.
double upsampling_factor(double d_o, const SensorConfig& config, const SamplingParams& params);

/// max(original, round(beta * original)).
std::size_t target_count(std::size_t original, double beta);

/// Exactly n_target blue-noise points on the mesh surface: uniform
/// area-weighted oversampling by 5x followed by weighted sample elimination.
/// Deterministic in (mesh, n_target, seed). Throws EmptyMesh.
PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n_target, std::uint64_t seed);

/// Plain area-weighted uniform surface samples (the oversampling stage).
std::vector<Point3> uniform_surface_sample(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

/// Nearest mesh hit for every ray of the pattern cast from sensor_origin
/// (pattern axes aligned with the frame axes). Throws NoHits.
PointCloud raycast_sample(const TriangleMesh& mesh, const SensorPattern& pattern, const Point3& sensor_origin);

struct SampleContext {
  std::uint64_t seed = 0;
  /// Required by the virtual-lidar strategy.
  const SensorPattern* target_pattern = nullptr;
  Point3 sensor_origin = Point3::Zero();
};

struct SampledObject {
  PointCloud cloud;  // intensity set to the instance mean, or 0
  std::size_t target = 0;
  double beta = 1.0;
};

/// Resamples a completed mesh according to params.strategy.
SampledObject sample_semi_canonical(const TriangleMesh& mesh, const ObjectInstance& instance,
                                    const SensorConfig& config, const SamplingParams& params,
                                    const SampleContext& context = {});

}  // namespace semican
