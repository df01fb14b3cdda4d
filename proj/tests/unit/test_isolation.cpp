#include <set>

#include "doctest.h"
#include "semican/isolation.hpp"
#include "semican/simulate.hpp"
#include "support.hpp"

using namespace semican;
using testing::random_points;

namespace {

/// O(n^2) reference: cores by inclusive neighbour count, clusters as
/// connected components of cores, borders to the nearest core.
std::vector<int> brute_dbscan(const std::vector<Point3>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) count += (pts[i] - pts[j]).norm() <= eps;
    core[i] = count >= min_pts;
  }
  testing::UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && (pts[i] - pts[j]).norm() <= eps) uf.unite(static_cast<int>(i), static_cast<int>(j));

  std::vector<int> root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      root[i] = uf.find(static_cast<int>(i));
      continue;
    }
    double best = eps;
    int owner = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (!core[j]) continue;
      const double d = (pts[i] - pts[j]).norm();
      if (d <= eps && (owner < 0 || d < best)) {
        best = d;
        owner = static_cast<int>(j);
      }
    }
    if (owner >= 0) root[i] = uf.find(owner);
  }
  // relabel by first appearance
  std::map<int, int> ids;
  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (root[i] < 0) continue;
    auto [it, fresh] = ids.emplace(root[i], static_cast<int>(ids.size()));
    labels[i] = it->second;
  }
  return labels;
}

std::vector<Point3> blob(std::size_t n, const Point3& center, double spread, std::uint64_t seed) {
  auto pts = random_points(n, seed, -spread, spread);
  for (auto& p : pts) p += center;
  return pts;
}

}  // namespace

TEST_CASE("ring geometry") {
  CHECK(vres(SensorConfig::kitti()) == doctest::Approx(0.41875).epsilon(1e-12));
  CHECK(vres(SensorConfig::nuscenes()) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(vres(SensorConfig{16.0, 16, Point3::Zero()}) == 1.0);
  CHECK(vertical_point_distance(0.0, SensorConfig::nuscenes()) == 0.0);
  CHECK(vertical_point_distance(40.0, SensorConfig::nuscenes()) == doctest::Approx(0.872816).epsilon(1e-5));
  CHECK(vertical_point_distance(10.0, SensorConfig::kitti()) == doctest::Approx(0.0730870).epsilon(1e-5));
  CHECK(cluster_radius(10.0, SensorConfig::kitti(), {}) == doctest::Approx(0.365435).epsilon(1e-5));
  CHECK(cluster_radius(20.0, SensorConfig::nuscenes(), {}) == doctest::Approx(2.182).epsilon(1e-3));

  const double base = cluster_radius(13.7, SensorConfig::kitti(), {});
  CHECK(cluster_radius(27.4, SensorConfig::kitti(), {}) == 2.0 * base);
  CHECK(cluster_radius(13.7, SensorConfig::kitti(), ClusterParams{10.0, 3}) == 2.0 * base);
  CHECK_THROWS_AS(vres(SensorConfig{0.0, 64, Point3::Zero()}), Error);
  CHECK_THROWS_AS(vres(SensorConfig{26.8, 0, Point3::Zero()}), Error);
}

TEST_CASE("projection onto the image") {
  Calibration cam;
  cam.intrinsic << 700, 0, 600, 0, 700, 180, 0, 0, 1;
  cam.width = 1242;
  cam.height = 375;
  const auto axis = project_to_image(testing::cloud_of({Point3(0, 0, 5), Point3(0, 0, -5)}), cam);
  REQUIRE(axis.size() == 1);
  CHECK(axis[0].u == doctest::Approx(600));
  CHECK(axis[0].v == doctest::Approx(180));
  CHECK(axis[0].depth == doctest::Approx(5));

  cam.extrinsic = RigidTransform::translation(Eigen::Vector3d(0.1, -0.2, 0.3)) * RigidTransform::rotation_z(0.05);
  const Point3 p(1.3, -0.4, 8.0);
  const Eigen::Matrix3d r = cam.extrinsic.rotation();
  const Eigen::Vector3d q = r * p + Eigen::Vector3d(0.1, -0.2, 0.3);
  const auto hit = project_to_image(testing::cloud_of({p}), cam);
  REQUIRE(hit.size() == 1);
  CHECK(hit[0].u == doctest::Approx(700 * q.x() / q.z() + 600));
  CHECK(hit[0].v == doctest::Approx(700 * q.y() / q.z() + 180));
}

TEST_CASE("mask erosion") {
  InstanceMask square(120, 120);
  for (int v = 10; v < 110; ++v)
    for (int u = 10; u < 110; ++u) square.set(u, v);
  CHECK(shrink_mask(square, 0.0).raster == square.raster);
  const InstanceMask eroded = shrink_mask(square, 0.02);
  CHECK(eroded.foreground_count() == 98 * 98);
  CHECK(eroded.at(11, 11));
  CHECK_FALSE(eroded.at(10, 50));
  for (std::size_t i = 0; i < eroded.raster.size(); ++i) {
    if (eroded.raster[i]) CHECK(square.raster[i]);
  }

  InstanceMask tiny(10, 10);
  for (int v = 3; v < 6; ++v)
    for (int u = 3; u < 6; ++u) tiny.set(u, v);
  CHECK(shrink_mask(tiny, 0.5).foreground_count() <= 1);
  CHECK_THROWS_AS(shrink_mask(tiny, 1.0), Error);
}

TEST_CASE("mask selection is monotone in mask area") {
  Calibration cam = forward_camera(200, 100, 100.0, Eigen::Vector3d::Zero());
  auto pts = random_points(2000, 77, -10.0, 10.0);
  const PointCloud cloud = testing::cloud_of(pts);
  InstanceMask full(200, 100);
  std::fill(full.raster.begin(), full.raster.end(), 255);
  InstanceMask part(200, 100);
  for (int v = 20; v < 70; ++v)
    for (int u = 50; u < 120; ++u) part.set(u, v);

  const auto all = mask_select(cloud, full, cam);
  CHECK(all.size() == project_to_image(cloud, cam).size());
  const auto some = mask_select(cloud, part, cam);
  CHECK(std::includes(all.begin(), all.end(), some.begin(), some.end()));
  CHECK(some.size() < all.size());
  CHECK_THROWS_AS(mask_isolate(cloud, InstanceMask(200, 100), cam), Error);
  CHECK_THROWS_AS(mask_select(cloud, InstanceMask(20, 10), cam), Error);
}

TEST_CASE("dbscan matches brute-force connectivity") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    const auto pts = random_points(n, rng(), 0.0, 1.0 + static_cast<double>(rng() % 4));
    const double eps = 0.05 + 0.25 * static_cast<double>(rng() % 1000) / 1000.0;
    const int min_pts = 1 + static_cast<int>(rng() % 6);
    REQUIRE(dbscan(pts, eps, min_pts) == brute_dbscan(pts, eps, min_pts));
  }
}

TEST_CASE("vres_cluster picks the largest blob and ignores point order") {
  const SensorConfig kitti = SensorConfig::kitti();
  const double eps = cluster_radius(10.0, kitti, {});
  auto pts = blob(30, Point3(10, 0, 0), 0.05, 1);
  const auto small = blob(5, Point3(10, 10 * eps, 0), 0.02, 2);
  pts.insert(pts.begin() + 7, small.begin(), small.end());
  const ObjectInstance inst = vres_cluster(testing::cloud_of(pts), kitti, {});
  CHECK(inst.points.size() == 30);
  CHECK(inst.source == InstanceSource::mask);
  CHECK(inst.origin_distance == doctest::Approx(centroid(inst.points.points).norm()).epsilon(1e-12));
  for (const auto i : inst.indices) CHECK((i < 7 || i >= 12));

  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  std::vector<Point3> shuffled;
  for (const auto i : perm) shuffled.push_back(pts[i]);
  const ObjectInstance again = vres_cluster(testing::cloud_of(shuffled), kitti, {});
  std::set<std::size_t> a(inst.indices.begin(), inst.indices.end());
  std::set<std::size_t> b;
  for (const auto i : again.indices) b.insert(perm[i]);
  CHECK(a == b);

  CHECK_THROWS_AS(vres_cluster(testing::cloud_of({Point3(10, 0, 0), Point3(20, 0, 0)}), kitti, {}), Error);
}

TEST_CASE("boxes recover the simulator's object ids") {
  SceneSpec spec = random_scene_spec(3, 3, "kitti64", 8.0, 25.0);
  spec.camera.reset();
  const SimulatedFrame frame = simulate_frame(spec);
  std::vector<BoundingBox3> boxes;
  for (const auto& lb : frame.labels) boxes.push_back(lb.box);
  IsolationOptions options;
  options.sensor.origin = Point3::Zero();
  const IsolationResult iso = isolate_frame(frame.scan.cloud, boxes, options);
  REQUIRE(iso.instances.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < frame.scan.instance_ids.size(); ++i) {
      if (frame.scan.instance_ids[i] == frame.instance_ids[k]) truth.push_back(i);
    }
    CHECK(iso.instances[k].indices == truth);
    CHECK(iso.instances[k].pass_through == (truth.size() < 50));
  }
  CHECK(isolate_frame(frame.scan.cloud, std::vector<BoundingBox3>{}, options).instances.empty());
}

TEST_CASE("viewpoint misalignment leaks wall points that clustering removes") {
  SceneSpec spec;
  spec.ground_plane = false;
  SimObjectSpec box;
  box.shape = ObjectShape::box;
  box.box.center = Point3(10, 0, 1.73);
  box.box.dims = Eigen::Vector3d(1.0, 1.0, 1.0);
  box.instance_id = 1;
  spec.objects.push_back(box);
  BoundingBox3 wall;
  wall.center = Point3(20, 0, 1.73);
  wall.dims = Eigen::Vector3d(0.2, 10.0, 6.0);
  spec.walls.push_back(wall);
  spec.camera = CameraSpec{};
  spec.camera->offset = Eigen::Vector3d(0, 0.3, 0);
  const SimulatedFrame frame = simulate_frame(spec);
  REQUIRE(frame.masks.size() == 1);

  const auto picked = mask_select(frame.scan.cloud, frame.masks[0], frame.calib.camera);
  std::size_t wall_hits = 0;
  for (const auto i : picked) wall_hits += frame.scan.instance_ids[i] == 0;
  CHECK(wall_hits > 0);

  const ObjectInstance inst = vres_cluster(frame.scan.cloud.select(picked), SensorConfig::kitti(), {});
  for (const auto i : inst.indices) CHECK(frame.scan.instance_ids[picked[i]] == 1);
}

TEST_CASE("nuScenes car in front of a wall 8 m behind it") {
  SceneSpec spec;
  spec.pattern = "nuscenes32";
  spec.ground_plane = false;
  SimObjectSpec car;
  car.box.center = Point3(20, 0, 0.75);
  car.box.dims = Eigen::Vector3d(4.5, 1.8, 1.5);
  car.instance_id = 4;
  spec.objects.push_back(car);
  BoundingBox3 wall;
  wall.center = Point3(28, 0, 1.0);
  wall.dims = Eigen::Vector3d(0.2, 3.0, 2.0);
  spec.walls.push_back(wall);
  const SimulatedFrame frame = simulate_frame(spec);

  // one mask covering both surfaces: every return in the camera view
  InstanceMask all(frame.calib.camera.width, frame.calib.camera.height);
  std::fill(all.raster.begin(), all.raster.end(), 255);
  const auto picked = mask_select(frame.scan.cloud, all, frame.calib.camera);
  std::size_t car_pts = 0, wall_pts = 0;
  for (const auto i : picked) (frame.scan.instance_ids[i] == 4 ? car_pts : wall_pts)++;
  REQUIRE(car_pts > 0);
  REQUIRE(wall_pts > 0);
  const ObjectInstance inst = vres_cluster(frame.scan.cloud.select(picked), SensorConfig::nuscenes(), {});
  const PointCloud masked = frame.scan.cloud.select(picked);
  CHECK(inst.cluster_radius == cluster_radius(centroid(masked.points).norm(), SensorConfig::nuscenes(), {}));
  std::size_t selected_car = 0;
  for (const auto i : inst.indices) selected_car += frame.scan.instance_ids[picked[i]] == 4;
  CHECK(selected_car == inst.indices.size());
  CHECK(selected_car == car_pts);
}

TEST_CASE("rendered masks isolate cars and tag sparse ones as pass-through") {
  SceneSpec spec;
  SimObjectSpec near_car;
  near_car.box.center = Point3(10, 2, 0.75);
  near_car.box.dims = Eigen::Vector3d(4.5, 1.8, 1.5);
  near_car.instance_id = 1;
  SimObjectSpec small;
  small.shape = ObjectShape::box;
  small.box.center = Point3(30, -4, 0.3);
  small.box.dims = Eigen::Vector3d(0.6, 0.6, 0.6);
  small.instance_id = 2;
  spec.objects = {near_car, small};
  const SimulatedFrame frame = simulate_frame(spec);
  REQUIRE(frame.masks.size() == 2);

  IsolationOptions options;
  options.sensor.origin = Point3::Zero();
  const IsolationResult iso = isolate_frame(frame.scan.cloud, frame.masks, frame.calib.camera, options);
  REQUIRE(iso.instances.size() == 2);
  CHECK(iso.instances[0].points.size() >= 50);
  CHECK_FALSE(iso.instances[0].pass_through);
  CHECK(iso.instances[1].points.size() < 50);
  CHECK(iso.instances[1].pass_through);
  for (std::size_t k = 0; k < 2; ++k) {
    for (const auto i : iso.instances[k].indices) CHECK(frame.scan.instance_ids[i] == frame.masks[k].instance_id);
  }
}
