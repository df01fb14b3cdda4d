#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "semican/io.hpp"

namespace semican {

namespace {

float load_le_float(const char* bytes) {
  std::uint32_t raw;
  std::memcpy(&raw, bytes, 4);
  if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
  return std::bit_cast<float>(raw);
}

void store_le_float(float value, char* bytes) {
  auto raw = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
  std::memcpy(bytes, &raw, 4);
}

std::string read_binary_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_atomically(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Closest proper rotation; rejects inputs that are not near-orthonormal.
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m, const std::string& what) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  if ((r - m).cwiseAbs().maxCoeff() > 1e-3) {
    throw Error(ErrorCode::MalformedFile, what + " is not a rotation");
  }
  return r;
}

}  // namespace

std::string read_text_file(const fs::path& path) { return read_binary_file(path); }

void write_text_file(const fs::path& path, const std::string& text) { write_atomically(path, text); }

PointCloud read_kitti_bin(const fs::path& path) {
  const std::string bytes = read_binary_file(path);
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorCode::MalformedFile,
                path.string() + " has " + std::to_string(bytes.size()) + " bytes, not a multiple of 16");
  }
  PointCloud cloud;
  cloud.frame_id = path.stem().string();
  const std::size_t n = bytes.size() / 16;
  cloud.points.reserve(n);
  cloud.intensity.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char* rec = bytes.data() + 16 * i;
    cloud.points.emplace_back(load_le_float(rec), load_le_float(rec + 4), load_le_float(rec + 8));
    cloud.intensity.push_back(load_le_float(rec + 12));
  }
  return cloud;
}

void write_kitti_bin(const fs::path& path, const PointCloud& cloud) {
  cloud.validate();
  std::string bytes(cloud.size() * 16, '\0');
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    char* rec = bytes.data() + 16 * i;
    const Point3& p = cloud.points[i];
    store_le_float(static_cast<float>(p.x()), rec);
    store_le_float(static_cast<float>(p.y()), rec + 4);
    store_le_float(static_cast<float>(p.z()), rec + 8);
    store_le_float(cloud.has_intensity() ? cloud.intensity[i] : 0.0f, rec + 12);
  }
  write_atomically(path, bytes);
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

KittiCalibration read_kitti_calib(const fs::path& path) {
  std::istringstream in(read_binary_file(path));
  std::map<std::string, std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    key.erase(std::remove_if(key.begin(), key.end(), [](unsigned char c) { return std::isspace(c); }), key.end());
    std::istringstream vals(line.substr(colon + 1));
    std::vector<double> v;
    std::string tok;
    while (vals >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedFile, path.string() + ": bad number '" + tok + "' in " + key);
      }
    }
    rows[key] = std::move(v);
  }

  auto matrix = [&](const std::string& key, std::size_t count) -> const std::vector<double>& {
    auto it = rows.find(key);
    if (it == rows.end()) throw Error(ErrorCode::MissingMatrix, path.string() + " lacks " + key);
    if (it->second.size() != count) {
      throw Error(ErrorCode::MalformedFile, path.string() + ": " + key + " needs " + std::to_string(count) + " values");
    }
    return it->second;
  };

  const auto& p2 = matrix("P2", 12);
  const auto& r0 = matrix("R0_rect", 9);
  const auto& tr = matrix("Tr_velo_to_cam", 12);

  Eigen::Matrix3d k;
  Eigen::Vector3d p2_col;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) k(r, c) = p2[4 * r + c];
    p2_col[r] = p2[4 * r + 3];
  }
  if (!(k(0, 0) > 0.0 && k(1, 1) > 0.0) || std::abs(k.determinant()) < 1e-12) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": P2 intrinsic block is singular");
  }

  Eigen::Matrix3d rect;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rect(r, c) = r0[3 * r + c];
  }
  Eigen::Matrix3d tr_rot;
  Eigen::Vector3d tr_t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) tr_rot(r, c) = tr[4 * r + c];
    tr_t[r] = tr[4 * r + 3];
  }

  KittiCalibration out;
  const RigidTransform rect_t = RigidTransform::from_parts(project_to_rotation(rect, "R0_rect"), Eigen::Vector3d::Zero());
  const RigidTransform velo_t = RigidTransform::from_parts(project_to_rotation(tr_rot, "Tr_velo_to_cam"), tr_t);
  out.rect_from_lidar = rect_t * velo_t;
  const Eigen::Vector3d baseline = k.lu().solve(p2_col);
  out.camera.extrinsic = RigidTransform::translation(baseline) * out.rect_from_lidar;
  out.camera.intrinsic = k / k(2, 2);
  out.camera.width = 1242;
  out.camera.height = 375;
  if (auto it = rows.find("image_size"); it != rows.end()) {
    if (it->second.size() != 2 || it->second[0] < 1 || it->second[1] < 1) {
      throw Error(ErrorCode::MalformedFile, path.string() + ": image_size needs two positive values");
    }
    out.camera.width = static_cast<int>(it->second[0]);
    out.camera.height = static_cast<int>(it->second[1]);
  }
  return out;
}

void write_kitti_calib(const fs::path& path, const KittiCalibration& calib) {
  const RigidTransform offset = calib.camera.extrinsic * calib.rect_from_lidar.inverse();
  require((offset.rotation() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9,
          "camera extrinsic must differ from the rectified frame by a translation only");
  const Eigen::Matrix3d& k = calib.camera.intrinsic;
  const Eigen::Vector3d p2_col = k * offset.translation();

  std::ostringstream out;
  out << std::setprecision(12);
  auto row = [&](const std::string& key, const Eigen::MatrixXd& m) {
    out << key << ":";
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) out << ' ' << m(r, c);
    }
    out << '\n';
  };
  Eigen::Matrix<double, 3, 4> p0;
  p0 << k, Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 3, 4> p2;
  p2 << k, p2_col;
  row("P0", p0);
  row("P1", p0);
  row("P2", p2);
  row("P3", p2);
  row("R0_rect", Eigen::Matrix3d::Identity());
  row("Tr_velo_to_cam", calib.rect_from_lidar.matrix().topRows<3>());
  row("Tr_imu_to_velo", Eigen::Matrix4d::Identity().topRows<3>());
  out << "image_size: " << calib.camera.width << ' ' << calib.camera.height << '\n';
  write_atomically(path, out.str());
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

BoundingBox3 label_to_lidar(const Eigen::Vector3d& location, const Eigen::Vector3d& hwl, double rotation_y,
                            const RigidTransform& rect_from_lidar) {
  const RigidTransform lidar_from_rect = rect_from_lidar.inverse();
  // KITTI locations are the bottom-face center; camera y points down
  const Eigen::Vector3d center_rect = location - Eigen::Vector3d(0.0, 0.5 * hwl[0], 0.0);
  const Eigen::Vector3d heading_rect(std::cos(rotation_y), 0.0, -std::sin(rotation_y));
  const Eigen::Vector3d heading = lidar_from_rect.apply_direction(heading_rect);
  BoundingBox3 box;
  box.center = lidar_from_rect.apply(center_rect);
  box.dims = Eigen::Vector3d(hwl[2], hwl[1], hwl[0]);
  box.yaw = wrap_angle(std::atan2(heading.y(), heading.x()));
  return box;
}

void lidar_to_label(const BoundingBox3& box, const RigidTransform& rect_from_lidar, Eigen::Vector3d& location,
                    Eigen::Vector3d& hwl, double& rotation_y) {
  hwl = Eigen::Vector3d(box.dims.z(), box.dims.y(), box.dims.x());
  location = rect_from_lidar.apply(box.center) + Eigen::Vector3d(0.0, 0.5 * hwl[0], 0.0);
  const Eigen::Vector3d heading =
      rect_from_lidar.apply_direction(Eigen::Vector3d(std::cos(box.yaw), std::sin(box.yaw), 0.0));
  rotation_y = wrap_angle(std::atan2(-heading.z(), heading.x()));
}

std::vector<LabeledBox> read_kitti_labels(const fs::path& path, const KittiCalibration& calib,
                                          const std::vector<std::string>& classes) {
  std::istringstream in(read_binary_file(path));
  std::vector<LabeledBox> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string type;
    if (!(fields >> type)) continue;  // blank line
    if (type == "DontCare") continue;
    std::vector<double> v;
    double x;
    while (fields >> x) v.push_back(x);
    if (!fields.eof() || v.size() < 14) {
      throw Error(ErrorCode::MalformedFile, path.string() + ":" + std::to_string(line_no) + ": expected 15 fields");
    }
    if (!classes.empty() && std::find(classes.begin(), classes.end(), type) == classes.end()) continue;
    // truncated occluded alpha x1 y1 x2 y2 h w l x y z ry [score]
    LabeledBox lb;
    lb.class_label = type;
    lb.box = label_to_lidar(Eigen::Vector3d(v[10], v[11], v[12]), Eigen::Vector3d(v[7], v[8], v[9]), v[13],
                            calib.rect_from_lidar);
    if (v.size() > 14) lb.score = v[14];
    lb.box.validate();
    out.push_back(lb);
  }
  return out;
}

void write_kitti_labels(const fs::path& path, const std::vector<LabeledBox>& boxes, const KittiCalibration& calib) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  const Calibration& cam = calib.camera;
  for (const auto& lb : boxes) {
    Eigen::Vector3d loc, hwl;
    double ry = 0.0;
    lidar_to_label(lb.box, calib.rect_from_lidar, loc, hwl, ry);

    double x1 = cam.width, y1 = cam.height, x2 = 0.0, y2 = 0.0;
    bool visible = false;
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d local(((c & 1) ? 0.5 : -0.5) * lb.box.dims.x(), ((c & 2) ? 0.5 : -0.5) * lb.box.dims.y(),
                                  ((c & 4) ? 0.5 : -0.5) * lb.box.dims.z());
      const Eigen::Vector3d p = cam.extrinsic.apply(lb.box.to_world(local));
      if (p.z() <= 0.1) continue;
      const Eigen::Vector3d pix = cam.intrinsic * p;
      x1 = std::min(x1, pix.x() / pix.z());
      x2 = std::max(x2, pix.x() / pix.z());
      y1 = std::min(y1, pix.y() / pix.z());
      y2 = std::max(y2, pix.y() / pix.z());
      visible = true;
    }
    if (visible) {
      x1 = std::clamp(x1, 0.0, cam.width - 1.0);
      x2 = std::clamp(x2, 0.0, cam.width - 1.0);
      y1 = std::clamp(y1, 0.0, cam.height - 1.0);
      y2 = std::clamp(y2, 0.0, cam.height - 1.0);
    } else {
      x1 = y1 = x2 = y2 = -1.0;
    }
    const double alpha = wrap_angle(ry - std::atan2(loc.x(), loc.z()));
    out << lb.class_label << " 0.00 0 " << alpha << ' ' << x1 << ' ' << y1 << ' ' << x2 << ' ' << y2 << ' '
        << hwl[0] << ' ' << hwl[1] << ' ' << hwl[2] << ' ' << loc.x() << ' ' << loc.y() << ' ' << loc.z() << ' ' << ry;
    if (lb.score != 1.0) out << ' ' << lb.score;
    out << '\n';
  }
  write_atomically(path, out.str());
}

}  // namespace semican
