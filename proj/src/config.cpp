#include "semican/config.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "semican/io.hpp"
#include "toml.hpp"

namespace semican {

std::string to_string(IsolationMode mode) {
  return mode == IsolationMode::source_boxes ? "source_boxes" : "target_masks";
}

IsolationMode isolation_mode_from_string(const std::string& name) {
  if (name == "source_boxes" || name == "source-boxes" || name == "boxes") return IsolationMode::source_boxes;
  if (name == "target_masks" || name == "target-masks" || name == "masks") return IsolationMode::target_masks;
  throw Error(ErrorCode::InvalidArgument, "unknown isolation mode '" + name + "'");
}

std::string to_string(OutputFormat format) {
  switch (format) {
    case OutputFormat::same_as_input: return "same";
    case OutputFormat::bin: return "bin";
    case OutputFormat::ply: return "ply";
  }
  return "same";
}

OutputFormat output_format_from_string(const std::string& name) {
  if (name == "same" || name == "same_as_input" || name == "input") return OutputFormat::same_as_input;
  if (name == "bin" || name == "kitti") return OutputFormat::bin;
  if (name == "ply") return OutputFormat::ply;
  throw Error(ErrorCode::InvalidArgument, "unknown output format '" + name + "'");
}

SensorConfig sensor_preset(const std::string& name) {
  if (name == "kitti") return SensorConfig::kitti();
  if (name == "nuscenes") return SensorConfig::nuscenes();
  if (name == "waymo") return SensorConfig::waymo();
  if (name == "baraja") return SensorConfig::baraja();
  throw Error(ErrorCode::UnknownPreset, "unknown sensor preset '" + name + "'");
}

void PipelineConfig::validate() const {
  sensor.validate();
  cluster.validate();
  sc.validate();
  sampling.validate();
  require(std::isfinite(z_offset), "z_offset must be finite");
  require(mask_shrink >= 0.0 && mask_shrink < 1.0, "mask_shrink must lie in [0, 1)");
  require(jobs >= 1, "jobs must be >= 1");
  if (sampling.strategy == SamplingStrategy::virtual_lidar) make_pattern(target_pattern);
}

namespace {

[[noreturn]] void bad_value(const std::string& source, const std::string& key, const std::string& expected) {
  throw Error(ErrorCode::MalformedFile, source + ": key '" + key + "' expects " + expected);
}

double as_double(const toml::node& node, const std::string& source, const std::string& key) {
  if (auto v = node.value<double>()) return *v;
  bad_value(source, key, "a number");
}

std::int64_t as_int(const toml::node& node, const std::string& source, const std::string& key) {
  if (node.is_integer()) return *node.value<std::int64_t>();
  bad_value(source, key, "an integer");
}

bool as_bool(const toml::node& node, const std::string& source, const std::string& key) {
  if (node.is_boolean()) return *node.value<bool>();
  bad_value(source, key, "a boolean");
}

std::string as_string(const toml::node& node, const std::string& source, const std::string& key) {
  if (node.is_string()) return *node.value<std::string>();
  bad_value(source, key, "a string");
}

}  // namespace

void apply_toml(PipelineConfig& config, const std::string& toml_text, const std::string& source) {
  toml::table table;
  try {
    table = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ": " << e.description();
    throw Error(ErrorCode::MalformedFile, msg.str());
  }

  double bpa_max = config.sc.bpa.radii.back();
  auto bpa_count = static_cast<std::int64_t>(config.sc.bpa.radii.size());
  bool radii_touched = false;

  for (const auto& [raw_key, node] : table) {
    std::string key(raw_key.str());
    std::replace(key.begin(), key.end(), '-', '_');
    try {
      if (key == "seed") {
        config.seed = static_cast<std::uint64_t>(as_int(node, source, key));
      } else if (key == "z_offset") {
        config.z_offset = as_double(node, source, key);
      } else if (key == "mode") {
        config.mode = isolation_mode_from_string(as_string(node, source, key));
      } else if (key == "keep_original") {
        config.replace_objects = !as_bool(node, source, key);
      } else if (key == "replace_objects") {
        config.replace_objects = as_bool(node, source, key);
      } else if (key == "jobs") {
        config.jobs = static_cast<std::size_t>(std::max<std::int64_t>(1, as_int(node, source, key)));
      } else if (key == "format") {
        config.format = output_format_from_string(as_string(node, source, key));
      } else if (key == "sensor") {
        const Point3 origin = config.sensor.origin;
        config.sensor = sensor_preset(as_string(node, source, key));
        config.sensor.origin = origin;
      } else if (key == "vfov_deg") {
        config.sensor.vfov_deg = as_double(node, source, key);
      } else if (key == "num_rings") {
        config.sensor.num_rings = static_cast<int>(as_int(node, source, key));
      } else if (key == "alpha") {
        config.cluster.alpha = as_double(node, source, key);
      } else if (key == "min_pts") {
        config.cluster.min_pts = static_cast<int>(as_int(node, source, key));
      } else if (key == "mask_shrink") {
        config.mask_shrink = as_double(node, source, key);
      } else if (key == "classes") {
        const auto* arr = node.as_array();
        if (!arr) bad_value(source, key, "an array of strings");
        config.classes.clear();
        for (const auto& item : *arr) config.classes.push_back(as_string(item, source, key));
      } else if (key == "min_score") {
        config.min_score = as_double(node, source, key);
      } else if (key == "method") {
        config.sc.method = surface_method_from_string(as_string(node, source, key));
      } else if (key == "min_points") {
        config.sc.min_points = static_cast<std::size_t>(as_int(node, source, key));
      } else if (key == "bpa_max_radius") {
        bpa_max = as_double(node, source, key);
        radii_touched = true;
      } else if (key == "bpa_radius_count") {
        bpa_count = as_int(node, source, key);
        radii_touched = true;
      } else if (key == "normal_k") {
        config.sc.bpa.normal_k = static_cast<std::size_t>(as_int(node, source, key));
      } else if (key == "alpha_radius") {
        config.sc.alpha.alpha = as_double(node, source, key);
      } else if (key == "strategy") {
        config.sampling.strategy = sampling_strategy_from_string(as_string(node, source, key));
      } else if (key == "d_ideal") {
        config.sampling.d_ideal = as_double(node, source, key);
      } else if (key == "sa_density") {
        config.sampling.sa_density = as_double(node, source, key);
      } else if (key == "beta_max") {
        config.sampling.beta_max = as_double(node, source, key);
      } else if (key == "target_pattern") {
        config.target_pattern = as_string(node, source, key);
      } else {
        throw Error(ErrorCode::MalformedFile, source + ": unknown key '" + std::string(raw_key.str()) + "'");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedFile) throw;
      throw Error(ErrorCode::MalformedFile, source + ": key '" + key + "': " + e.what());
    }
  }
  if (radii_touched) {
    if (bpa_count < 1 || !(bpa_max > 0.0)) {
      throw Error(ErrorCode::MalformedFile, source + ": BPA radius schedule needs a positive maximum and count");
    }
    config.sc.bpa.radii = BpaParams::linear_radii(bpa_max, static_cast<std::size_t>(bpa_count));
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig config;
  apply_toml(config, read_text_file(path), path.string());
  return config;
}

std::string to_toml(const PipelineConfig& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  auto quoted = [](const std::string& s) { return "\"" + s + "\""; };
  out << "seed = " << c.seed << "\n"
      << "z_offset = " << c.z_offset << "\n"
      << "mode = " << quoted(to_string(c.mode)) << "\n"
      << "replace_objects = " << (c.replace_objects ? "true" : "false") << "\n"
      << "jobs = " << c.jobs << "\n"
      << "format = " << quoted(to_string(c.format)) << "\n"
      << "vfov_deg = " << c.sensor.vfov_deg << "\n"
      << "num_rings = " << c.sensor.num_rings << "\n"
      << "alpha = " << c.cluster.alpha << "\n"
      << "min_pts = " << c.cluster.min_pts << "\n"
      << "mask_shrink = " << c.mask_shrink << "\n"
      << "classes = [";
  for (std::size_t i = 0; i < c.classes.size(); ++i) out << (i ? ", " : "") << quoted(c.classes[i]);
  out << "]\n"
      << "min_score = " << c.min_score << "\n"
      << "method = " << quoted(to_string(c.sc.method)) << "\n"
      << "min_points = " << c.sc.min_points << "\n"
      << "bpa_max_radius = " << c.sc.bpa.radii.back() << "\n"
      << "bpa_radius_count = " << c.sc.bpa.radii.size() << "\n"
      << "normal_k = " << c.sc.bpa.normal_k << "\n"
      << "alpha_radius = " << c.sc.alpha.alpha << "\n"
      << "strategy = " << quoted(to_string(c.sampling.strategy)) << "\n"
      << "d_ideal = " << c.sampling.d_ideal << "\n"
      << "sa_density = " << c.sampling.sa_density << "\n"
      << "beta_max = " << c.sampling.beta_max << "\n"
      << "target_pattern = " << quoted(c.target_pattern) << "\n";
  return out.str();
}

}  // namespace semican
