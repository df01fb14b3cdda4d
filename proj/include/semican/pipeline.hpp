#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semican/config.hpp"
#include "semican/io.hpp"

namespace semican {

/// Annotations for one frame, in the raw sensor frame (before z_offset).
struct FrameInputs {
  std::vector<LabeledBox> boxes;
  std::vector<InstanceMask> masks;
  std::optional<Calibration> camera;
};

enum class InstanceStatus { completed, pass_through, skipped, failed };
std::string to_string(InstanceStatus status);

struct InstanceRecord {
  std::size_t input_index = 0;
  std::string class_label;
  std::string source;  // "box" or "mask"
  InstanceStatus status = InstanceStatus::skipped;
  std::size_t points_before = 0;
  std::size_t points_after = 0;
  double origin_distance = 0.0;
  double cluster_radius = 0.0;
  double beta = 1.0;
  std::size_t triangles = 0;
  std::string provenance;
  /// Error code name and message when skipped or failed.
  std::string skip_code;
  std::string skip_reason;
  /// Points this instance shared with another mask or box.
  std::size_t overlap_points = 0;
  /// Of those, how many were handed to a nearer instance.
  std::size_t overlap_lost = 0;
};

struct PhaseTimings {
  double isolate_ms = 0.0;
  double complete_ms = 0.0;
  double sample_ms = 0.0;
  double total_ms = 0.0;
};

struct FrameReport {
  std::string frame_id;
  std::uint64_t seed = 0;
  std::size_t input_points = 0;
  std::size_t output_points = 0;
  std::vector<InstanceRecord> instances;
  PhaseTimings timings;

  std::string to_json() const;
};

struct SemiCanonicalObject {
  std::size_t record = 0;  // index into FrameReport::instances
  PointCloud samples;
  TriangleMesh mesh;
};

struct SemiCanonicalCloud {
  /// Input points (after z_offset) not replaced by any object.
  PointCloud background;
  std::vector<SemiCanonicalObject> objects;
  /// background followed by every object's samples, in record order.
  PointCloud assembled;
  /// 1 for sampled points, parallel to `assembled`.
  std::vector<std::uint8_t> synthetic;
};

struct FrameResult {
  SemiCanonicalCloud cloud;
  FrameReport report;
};

/// Deterministic per-frame seed from the global seed and the frame id.
std::uint64_t frame_seed(std::uint64_t global_seed, const std::string& frame_id);

/// Isolate, complete and resample every instance of one frame. Per-instance
/// failures are recorded in the report; the frame itself never aborts.
/// Throws InvalidArgument for an invalid config or missing calibration in
/// mask mode.
FrameResult run_frame(const PointCloud& cloud, const FrameInputs& inputs, const PipelineConfig& config,
                      std::uint64_t seed);

struct FrameFailure {
  std::string frame_id;
  std::string reason;
};

struct DatasetSummary {
  std::size_t frames = 0;
  std::size_t succeeded = 0;
  std::vector<FrameFailure> failures;
  std::map<std::string, std::size_t> skip_reasons;
  std::map<std::string, std::size_t> instance_status;
  PhaseTimings timings;

  /// 0 when every frame succeeded, 2 when some failed.
  int exit_code() const { return failures.empty() ? 0 : 2; }
  std::string to_json() const;
};

/// Processes `in_dir/velodyne/*.{bin,ply}` with optional `calib/`, `label_2/`
/// and `masks/` siblings, writing `out_dir/velodyne`, `out_dir/reports` and
/// `out_dir/summary.json`. Frame-level failures are recorded; throws only
/// for an invalid config, a missing input directory or an unwritable output.
DatasetSummary run_dataset(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                           const PipelineConfig& config);

}  // namespace semican
