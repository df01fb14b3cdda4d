#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semican/isolation.hpp"
#include "semican/sampling.hpp"
#include "semican/surface.hpp"

namespace semican {

enum class IsolationMode { source_boxes, target_masks };
enum class OutputFormat { same_as_input, bin, ply };

std::string to_string(IsolationMode mode);
IsolationMode isolation_mode_from_string(const std::string& name);
std::string to_string(OutputFormat format);
OutputFormat output_format_from_string(const std::string& name);

struct PipelineConfig {
  /// Ring geometry; `origin` is relative to the raw sensor frame and is
  /// shifted by z_offset together with the cloud.
  SensorConfig sensor;
  ClusterParams cluster;
  SurfaceParams sc;
  SamplingParams sampling;
  double z_offset = 0.0;
  IsolationMode mode = IsolationMode::source_boxes;
  bool replace_objects = true;
  double mask_shrink = 0.02;
  /// Label / mask classes to process; empty keeps all.
  std::vector<std::string> classes{"Car"};
  double min_score = 0.5;
  std::uint64_t seed = 0;
  /// Scan pattern preset used by the virtual-lidar strategy.
  std::string target_pattern = "kitti64";
  std::size_t jobs = 1;
  OutputFormat format = OutputFormat::same_as_input;

  void validate() const;

  /// Sensor origin after the z offset is applied.
  Point3 shifted_origin() const { return sensor.origin + Point3(0.0, 0.0, z_offset); }
};

/// Named ring geometry: "kitti", "nuscenes", "waymo" or "baraja".
SensorConfig sensor_preset(const std::string& name);

/// Applies flat TOML keys (dashes or underscores) over `config`. Unknown keys
/// and type mismatches throw MalformedFile naming `source`.
void apply_toml(PipelineConfig& config, const std::string& toml_text, const std::string& source = "<config>");

/// Reads and applies a TOML file over defaults. Throws IoError or MalformedFile.
PipelineConfig load_config(const std::filesystem::path& path);

/// Flat TOML rendering that load_config reads back to the same values.
std::string to_toml(const PipelineConfig& config);

}  // namespace semican
