#include "semican/isolation.hpp"

#include <algorithm>
#include <cmath>

namespace semican {

void SensorConfig::validate() const {
  require(vfov_deg > 0.0 && vfov_deg < 180.0, "vertical FOV must lie in (0, 180) degrees");
  require(num_rings >= 1, "ring count must be >= 1");
  require(origin.allFinite(), "sensor origin must be finite");
}

void ClusterParams::validate() const {
  require(alpha > 0.0, "cluster alpha must be positive");
  require(min_pts >= 1, "cluster min_pts must be >= 1");
}

void Calibration::validate() const {
  require(intrinsic(0, 0) > 0.0 && intrinsic(1, 1) > 0.0, "focal lengths must be positive");
  require(width > 0 && height > 0, "image dimensions must be positive");
}

std::size_t InstanceMask::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(raster.begin(), raster.end(), [](std::uint8_t v) { return v != 0; }));
}

double vres(const SensorConfig& config) {
  config.validate();
  return config.vfov_deg / static_cast<double>(config.num_rings);
}

double vertical_point_distance(double d_o, const SensorConfig& config) {
  require(d_o >= 0.0, "object distance must be non-negative");
  return d_o * std::tan(deg2rad(vres(config)));
}

double cluster_radius(double d_o, const SensorConfig& config, const ClusterParams& params) {
  params.validate();
  return params.alpha * vertical_point_distance(d_o, config);
}

std::vector<Projection> project_to_image(const PointCloud& cloud, const Calibration& calib) {
  calib.validate();
  std::vector<Projection> out;
  const Eigen::Matrix3d rot = calib.extrinsic.rotation();
  const Eigen::Vector3d trans = calib.extrinsic.translation();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Eigen::Vector3d cam = rot * cloud.points[i] + trans;
    if (!(cam.z() > 0.0)) continue;
    const Eigen::Vector3d pix = calib.intrinsic * cam;
    const double u = pix.x() / pix.z();
    const double v = pix.y() / pix.z();
    if (u >= 0.0 && v >= 0.0 && u < calib.width && v < calib.height) out.push_back({i, u, v, cam.z()});
  }
  return out;
}

InstanceMask shrink_mask(const InstanceMask& mask, double fraction) {
  require(fraction >= 0.0 && fraction < 1.0, "shrink fraction must lie in [0, 1)");
  if (fraction == 0.0) return mask;

  int umin = mask.width, umax = -1, vmin = mask.height, vmax = -1;
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.at(u, v)) continue;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  if (umax < 0) return mask;

  const double diag = std::hypot(umax - umin + 1, vmax - vmin + 1);
  const int radius = std::max(1, static_cast<int>(std::lround(0.5 * fraction * diag)));
  std::vector<std::pair<int, int>> disk;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) disk.emplace_back(dx, dy);
    }
  }

  InstanceMask out = mask;
  std::fill(out.raster.begin(), out.raster.end(), 0);
  for (int v = vmin; v <= vmax; ++v) {
    for (int u = umin; u <= umax; ++u) {
      if (!mask.at(u, v)) continue;
      const bool keep =
          std::all_of(disk.begin(), disk.end(), [&](const auto& d) { return mask.at(u + d.first, v + d.second); });
      if (keep) out.set(u, v);
    }
  }
  return out;
}

std::vector<std::size_t> mask_select(const PointCloud& cloud, const InstanceMask& mask, const Calibration& calib) {
  require(mask.width == calib.width && mask.height == calib.height, "mask size differs from calibration image size");
  std::vector<std::size_t> out;
  for (const auto& proj : project_to_image(cloud, calib)) {
    // the last half pixel rounds past the border; it still belongs to the edge pixel
    const int u = std::min(static_cast<int>(std::lround(proj.u)), mask.width - 1);
    const int v = std::min(static_cast<int>(std::lround(proj.v)), mask.height - 1);
    if (mask.at(u, v)) out.push_back(proj.index);
  }
  return out;
}

PointCloud mask_isolate(const PointCloud& cloud, const InstanceMask& mask, const Calibration& calib) {
  const auto idx = mask_select(cloud, mask, calib);
  if (idx.empty()) throw Error(ErrorCode::EmptySelection, "no lidar points inside mask");
  return cloud.select(idx);
}

IsolationResult isolate_frame(const PointCloud& cloud, std::span<const BoundingBox3> boxes,
                              const IsolationOptions& options) {
  IsolationResult result;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    try {
      auto idx = crop_indices(cloud, boxes[k]);
      if (idx.empty()) throw Error(ErrorCode::EmptySelection, "no points inside box");
      ObjectInstance inst;
      inst.points = cloud.select(idx);
      inst.indices = std::move(idx);
      inst.source = InstanceSource::box;
      inst.origin_distance = (centroid(inst.points.points) - options.sensor.origin).norm();
      inst.parent_frame = cloud.frame_id;
      inst.pass_through = inst.points.size() < options.min_points;
      inst.input_index = k;
      result.instances.push_back(std::move(inst));
    } catch (const Error& e) {
      result.skipped.push_back({k, e.what()});
    }
  }
  return result;
}

IsolationResult isolate_frame(const PointCloud& cloud, std::span<const InstanceMask> masks, const Calibration& calib,
                              const IsolationOptions& options) {
  IsolationResult result;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    try {
      const InstanceMask shrunk = shrink_mask(masks[k], options.mask_shrink);
      if (shrunk.foreground_count() == 0) throw Error(ErrorCode::EmptySelection, "mask empty after shrinking");
      const auto selected = mask_select(cloud, shrunk, calib);
      if (selected.empty()) throw Error(ErrorCode::EmptySelection, "no lidar points inside mask");
      ObjectInstance inst = vres_cluster(cloud.select(selected), options.sensor, options.cluster);
      for (auto& i : inst.indices) i = selected[i];
      inst.class_label = masks[k].class_label;
      inst.pass_through = inst.points.size() < options.min_points;
      inst.input_index = k;
      result.instances.push_back(std::move(inst));
    } catch (const Error& e) {
      result.skipped.push_back({k, e.what()});
    }
  }
  return result;
}

}  // namespace semican
