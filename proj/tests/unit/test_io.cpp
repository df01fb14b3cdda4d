#include <cstring>

#include "doctest.h"
#include "semican/io.hpp"
#include "semican/scan_sim.hpp"
#include "support.hpp"

using namespace semican;
using testing::TempDir;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

const char* kIdentityCalib =
    "P2: 700 0 600 0 0 700 180 0 0 0 1 0\n"
    "R0_rect: 1 0 0 0 1 0 0 0 1\n"
    "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";

// lidar x forward, y left, z up; camera x right, y down, z forward
const char* kKittiAxesCalib =
    "P2: 721.5 0 609.5 44.85 0 721.5 172.8 0.2163 0 0 1 0.002746\n"
    "R0_rect: 1 0 0 0 1 0 0 0 1\n"
    "Tr_velo_to_cam: 0 -1 0 0 0 0 -1 -0.08 1 0 0 -0.27\n";

}  // namespace

TEST_CASE("velodyne bin files") {
  TempDir dir("bin");
  testing::write_bytes(dir / "empty.bin", "");
  CHECK(read_kitti_bin(dir / "empty.bin").empty());

  PointCloud two;
  two.push_back(Point3(1.5, -2.25, 0.125), 0.5f);
  two.push_back(Point3(-30, 12, -1.75), 1.0f);
  write_kitti_bin(dir / "two.bin", two);
  CHECK(std::filesystem::file_size(dir / "two.bin") == 32);
  const PointCloud back = read_kitti_bin(dir / "two.bin");
  CHECK(back.points == two.points);
  CHECK(back.intensity == two.intensity);

  // the exact little-endian float32 layout
  const std::string bytes = testing::read_bytes(dir / "two.bin");
  float first = 0.0f;
  std::memcpy(&first, bytes.data(), 4);
  CHECK(first == 1.5f);

  testing::write_bytes(dir / "odd.bin", std::string(17, '\0'));
  CHECK(code_of([&] { read_kitti_bin(dir / "odd.bin"); }) == ErrorCode::MalformedFile);
  CHECK(code_of([&] { read_kitti_bin(dir / "absent.bin"); }) == ErrorCode::IoError);
}

TEST_CASE("calibration files") {
  TempDir dir("calib");
  testing::write_bytes(dir / "id.txt", kIdentityCalib);
  const KittiCalibration id = read_kitti_calib(dir / "id.txt");
  CHECK(id.rect_from_lidar.matrix().isApprox(Eigen::Matrix4d::Identity()));
  CHECK(id.camera.extrinsic.matrix().isApprox(Eigen::Matrix4d::Identity()));
  CHECK(id.camera.intrinsic(0, 0) == 700.0);
  CHECK(id.camera.width == 1242);
  CHECK(id.camera.height == 375);

  testing::write_bytes(dir / "sized.txt", std::string(kIdentityCalib) + "image_size: 640 480\n");
  CHECK(read_kitti_calib(dir / "sized.txt").camera.width == 640);

  testing::write_bytes(dir / "no_tr.txt", "P2: 700 0 600 0 0 700 180 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n");
  CHECK(code_of([&] { read_kitti_calib(dir / "no_tr.txt"); }) == ErrorCode::MissingMatrix);
  testing::write_bytes(dir / "short.txt", "P2: 1 2 3\nR0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  CHECK(code_of([&] { read_kitti_calib(dir / "short.txt"); }) == ErrorCode::MalformedFile);

  // the P2 baseline column becomes a camera-frame translation
  testing::write_bytes(dir / "kitti.txt", kKittiAxesCalib);
  const KittiCalibration k = read_kitti_calib(dir / "kitti.txt");
  const Point3 ahead = k.rect_from_lidar.apply(Point3(10, 0, 0));
  CHECK((ahead - Point3(0, -0.08, 9.73)).norm() < 1e-12);
  const Eigen::Vector3d shift = k.camera.extrinsic.apply(Point3(10, 0, 0)) - ahead;
  const Eigen::Vector3d expected = k.camera.intrinsic.inverse() * Eigen::Vector3d(44.85, 0.2163, 0.002746);
  CHECK((shift - expected).norm() < 1e-12);

  write_kitti_calib(dir / "round.txt", k);
  const KittiCalibration again = read_kitti_calib(dir / "round.txt");
  CHECK(again.camera.extrinsic.matrix().isApprox(k.camera.extrinsic.matrix(), 1e-10));
  CHECK(again.rect_from_lidar.matrix().isApprox(k.rect_from_lidar.matrix(), 1e-10));
}

TEST_CASE("label rows map into the lidar frame") {
  TempDir dir("labels");
  testing::write_bytes(dir / "calib.txt", kKittiAxesCalib);
  const KittiCalibration calib = read_kitti_calib(dir / "calib.txt");
  testing::write_bytes(dir / "000000.txt",
                       "Car 0.00 0 -1.57 600 150 700 250 1.50 1.60 4.00 1.00 1.50 10.00 0.00\n"
                       "DontCare -1 -1 -10 0 0 10 10 -1 -1 -1 -1000 -1000 -1000 -10\n"
                       "\n"
                       "Pedestrian 0.00 0 0.2 100 150 130 250 1.80 0.60 0.80 -3.00 1.60 12.00 1.57\n");

  const auto all = read_kitti_labels(dir / "000000.txt", calib);
  REQUIRE(all.size() == 2);
  const BoundingBox3& car = all[0].box;
  // camera (1, 1.5 - 0.75, 10) in lidar axes, then the Tr translation undone
  CHECK((car.center - Point3(10.27, -1.0, -0.83)).norm() < 1e-9);
  CHECK((car.dims - Eigen::Vector3d(4.0, 1.6, 1.5)).norm() < 1e-12);
  CHECK(car.yaw == doctest::Approx(-kPi / 2));
  CHECK(all[1].box.yaw == doctest::Approx(wrap_angle(-1.57 - kPi / 2)));

  const auto cars = read_kitti_labels(dir / "000000.txt", calib, {"Car"});
  REQUIRE(cars.size() == 1);
  CHECK(cars[0].class_label == "Car");

  write_kitti_labels(dir / "round.txt", all, calib);
  const auto again = read_kitti_labels(dir / "round.txt", calib);
  REQUIRE(again.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((again[i].box.center - all[i].box.center).norm() < 1e-5);
    CHECK(again[i].box.yaw == doctest::Approx(all[i].box.yaw).epsilon(1e-5));
  }

  testing::write_bytes(dir / "bad.txt", "Car 0 0 0 1 2 3\n");
  CHECK(code_of([&] { read_kitti_labels(dir / "bad.txt", calib); }) == ErrorCode::MalformedFile);
}

TEST_CASE("ply round trips") {
  TempDir dir("ply");
  PointCloud cloud = testing::cloud_of(testing::random_points(50, 1, -20.0, 20.0));
  cloud.intensity.assign(50, 0.25f);
  for (const auto enc : {PlyEncoding::ascii, PlyEncoding::binary_little_endian}) {
    write_ply(dir / "cloud.ply", cloud, enc);
    const PointCloud back = read_ply_cloud(dir / "cloud.ply");
    REQUIRE(back.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) CHECK((back.points[i] - cloud.points[i]).norm() < 1e-12);
    CHECK(back.intensity == cloud.intensity);
  }

  const TriangleMesh car = car_proxy(4.0, 1.7, 1.5);
  write_ply(dir / "car.ply", car, PlyEncoding::ascii);
  const TriangleMesh back = read_ply_mesh(dir / "car.ply");
  CHECK(back.vertices == car.vertices);
  CHECK(back.triangles == car.triangles);
  for (std::size_t i = 0; i < car.normals.size(); ++i) CHECK((back.normals[i] - car.normals[i]).norm() < 1e-9);

  // a quad face without normals is fanned and gets area-weighted normals
  testing::write_bytes(dir / "quad.ply",
                       "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
                       "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
                       "0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
  const TriangleMesh quad = read_ply_mesh(dir / "quad.ply");
  CHECK(quad.triangles.size() == 2);
  CHECK_NOTHROW(quad.validate());
  for (const auto& n : quad.normals) CHECK((n - Eigen::Vector3d::UnitZ()).norm() < 1e-12);

  testing::write_bytes(dir / "junk.ply", "not a ply\n");
  CHECK(code_of([&] { read_ply_cloud(dir / "junk.ply"); }) == ErrorCode::MalformedFile);
  testing::write_bytes(dir / "cut.ply",
                       "ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\n"
                       "property float y\nproperty float z\nend_header\n" + std::string(20, '\0'));
  CHECK(code_of([&] { read_ply_cloud(dir / "cut.ply"); }) == ErrorCode::MalformedFile);
}

TEST_CASE("mask manifests") {
  TempDir dir("masks");
  InstanceMask a(8, 6), b(8, 6);
  a.set(1, 1);
  a.set(2, 1);
  a.class_label = "Car";
  a.score = 0.9;
  a.instance_id = 4;
  b.set(5, 5);
  b.class_label = "Pedestrian";
  b.score = 0.3;
  write_masks(dir.path(), "000007", {a, b});

  const auto loose = read_masks(dir.path(), "000007", 8, 6, MaskFilter{{}, 0.0});
  REQUIRE(loose.size() == 2);
  CHECK(loose[0].raster == a.raster);
  CHECK(loose[0].instance_id == 4);
  CHECK(loose[1].score == doctest::Approx(0.3));
  const auto strict = read_masks(dir.path(), "000007", 8, 6);
  REQUIRE(strict.size() == 1);
  CHECK(strict[0].class_label == "Car");
  CHECK(read_masks(dir.path(), "000007", 8, 6, MaskFilter{{"Cyclist"}, 0.0}).empty());

  write_masks(dir.path(), "000008", {});
  CHECK(read_masks(dir.path(), "000008", 8, 6).empty());

  CHECK(code_of([&] { read_masks(dir.path(), "000007", 10, 6); }) == ErrorCode::SizeMismatch);
  CHECK(code_of([&] { read_masks(dir.path(), "000009", 8, 6); }) == ErrorCode::ManifestMissing);
  testing::write_bytes(dir / "000010.json", "{\"masks\": 3}");
  CHECK(code_of([&] { read_masks(dir.path(), "000010", 8, 6); }) == ErrorCode::MalformedFile);
}
