#include "doctest.h"
#include "semican/geometry.hpp"
#include "support.hpp"

using namespace semican;
using testing::random_points;

namespace {

double brute_chamfer(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  auto one_way = [](const std::vector<Point3>& from, const std::vector<Point3>& to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * one_way(a, b) + 0.5 * one_way(b, a);
}

/// Closest point on a triangle by minimizing over a dense barycentric grid
/// and the three edges in closed form.
double brute_triangle_distance(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  auto seg = [&](const Point3& u, const Point3& v) {
    const double t = std::clamp((p - u).dot(v - u) / (v - u).squaredNorm(), 0.0, 1.0);
    return (p - (u + t * (v - u))).norm();
  };
  double best = std::min({seg(a, b), seg(b, c), seg(c, a)});
  // interior: orthogonal projection if it lands inside
  const Eigen::Vector3d n = (b - a).cross(c - a).normalized();
  const Point3 q = p - n * n.dot(p - a);
  const double area = (b - a).cross(c - a).norm();
  const double wa = (b - q).cross(c - q).dot(n) / area;
  const double wb = (c - q).cross(a - q).dot(n) / area;
  const double wc = 1.0 - wa - wb;
  if (wa >= 0 && wb >= 0 && wc >= 0) best = std::min(best, std::abs(n.dot(p - a)));
  return best;
}

TriangleMesh random_soup(std::size_t triangles, std::uint64_t seed) {
  TriangleMesh mesh;
  mesh.vertices = random_points(3 * triangles, seed, -2.0, 2.0);
  for (std::size_t t = 0; t < triangles; ++t) {
    const int i = static_cast<int>(3 * t);
    mesh.triangles.push_back({i, i + 1, i + 2});
  }
  return mesh;
}

}  // namespace

TEST_CASE("crop_by_box keeps interior and face points, rotates with yaw") {
  BoundingBox3 unit;
  PointCloud c = testing::cloud_of({Point3(0.4, 0, 0), Point3(0.5, 0.5, 0.5), Point3(1.0, 0, 0)});
  CHECK(crop_indices(c, unit) == std::vector<std::size_t>{0, 1});

  BoundingBox3 turned;
  turned.dims = Eigen::Vector3d(1.0, 0.2, 1.0);
  turned.yaw = kPi / 2;
  CHECK(crop_indices(testing::cloud_of({Point3(0, 0.49, 0)}), turned).size() == 1);
  CHECK(crop_indices(testing::cloud_of({Point3(0.49, 0, 0)}), turned).empty());

  BoundingBox3 any;
  any.center = Point3(3, -2, 1);
  any.dims = Eigen::Vector3d(2.0, 1.0, 0.5);
  any.yaw = 0.7;
  CHECK(crop_by_box(testing::cloud_of({any.center + Point3(2.0, 0, 0)}), any).empty());
}

TEST_CASE("crop_by_box is yaw-equivariant") {
  const auto pts = random_points(500, 3, -3.0, 3.0);
  BoundingBox3 box;
  box.center = Point3(0.5, -0.3, 0.1);
  box.dims = Eigen::Vector3d(2.5, 1.2, 1.0);
  box.yaw = 0.4;
  const auto base = crop_indices(testing::cloud_of(pts), box);
  CHECK(!base.empty());
  for (const double angle : {0.3, 1.7, -2.9}) {
    const RigidTransform r = RigidTransform::rotation_z(angle);
    BoundingBox3 moved = box;
    moved.center = r.apply(box.center);
    moved.yaw = wrap_angle(box.yaw + angle);
    std::vector<Point3> rotated;
    for (const auto& p : pts) rotated.push_back(r.apply(p));
    CHECK(crop_indices(testing::cloud_of(rotated), moved) == base);
  }
}

TEST_CASE("chamfer distance matches the brute-force definition") {
  CHECK(chamfer_distance(testing::cloud_of({Point3(0, 0, 0)}), testing::cloud_of({Point3(1, 0, 0)})) ==
        doctest::Approx(1.0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = random_points(10, seed);
    const auto b = random_points(13, seed + 100);
    CHECK(chamfer_distance(a, b) == doctest::Approx(brute_chamfer(a, b)).epsilon(1e-12));
    CHECK(chamfer_distance(a, b) == chamfer_distance(b, a));
    CHECK(chamfer_distance(a, a) == 0.0);
  }
  CHECK_THROWS_AS(chamfer_distance(PointCloud{}, testing::cloud_of({Point3::Zero()})), Error);
}

TEST_CASE("point to mesh distance") {
  TriangleMesh big;
  big.vertices = {Point3(-10, -10, 0), Point3(10, -10, 0), Point3(0, 10, 0)};
  big.triangles = {{0, 1, 2}};
  const Point3 centroid_pt = (big.vertices[0] + big.vertices[1] + big.vertices[2]) / 3.0;
  CHECK(point_to_mesh_distance(centroid_pt + Point3(0, 0, 0.5), big) == doctest::Approx(0.5));
  CHECK(point_to_mesh_distance(big.vertices[1], big) == 0.0);
  CHECK_THROWS_AS(point_to_mesh_distance(Point3::Zero(), TriangleMesh{}), Error);

  const TriangleMesh soup = random_soup(50, 11);
  const MeshDistanceQuery query(soup);
  for (const auto& p : random_points(200, 12, -3.0, 3.0)) {
    double oracle = 1e300;
    for (const auto& t : soup.triangles) {
      oracle = std::min(oracle, brute_triangle_distance(p, soup.vertices[t[0]], soup.vertices[t[1]], soup.vertices[t[2]]));
    }
    CHECK(point_to_mesh_distance(p, soup) == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(query.distance(p) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("kernels are scalar-generic") {
  using V = Vec3<float>;
  const V q = closest_point_on_triangle<float>(V(0.2f, 0.2f, 1.0f), V(0, 0, 0), V(1, 0, 0), V(0, 1, 0));
  CHECK(q.z() == 0.0f);
  CHECK(q.x() == doctest::Approx(0.2f));
  const auto t = intersect_ray_triangle<double>(Vec3<double>(0.2, 0.2, 5), Vec3<double>(0, 0, -1),
                                                Vec3<double>(0, 0, 0), Vec3<double>(1, 0, 0), Vec3<double>(0, 1, 0));
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(5.0));
  CHECK_FALSE(intersect_ray_triangle<double>(Vec3<double>(2, 2, 5), Vec3<double>(0, 0, -1), Vec3<double>(0, 0, 0),
                                             Vec3<double>(1, 0, 0), Vec3<double>(0, 1, 0))
                  .has_value());
}

TEST_CASE("ball center sits on the winding side at the requested radius") {
  const Point3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  const auto center = ball_center<double>(a, b, c, 1.0);
  REQUIRE(center.has_value());
  for (const auto& p : {a, b, c}) CHECK((p - *center).norm() == doctest::Approx(1.0));
  CHECK(center->z() > 0.0);
  CHECK_FALSE(ball_center<double>(a, b, c, 0.5).has_value());
}

TEST_CASE("rigid transforms round-trip and reject non-rotations") {
  const RigidTransform t =
      RigidTransform::translation(Eigen::Vector3d(1, -2, 3)) * RigidTransform::rotation_z(0.83) *
      RigidTransform::from_parts(Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 1, 0).normalized()).toRotationMatrix(),
                                 Eigen::Vector3d(0.5, 0, 0));
  const RigidTransform inv = t.inverse();
  for (const auto& p : random_points(100, 5, -50.0, 50.0)) CHECK((inv.apply(t.apply(p)) - p).norm() < 1e-9);

  Eigen::Matrix4d scaled = Eigen::Matrix4d::Identity();
  scaled(0, 0) = 2.0;
  CHECK_THROWS_AS(RigidTransform::from_matrix(scaled), Error);
  Eigen::Matrix4d mirrored = Eigen::Matrix4d::Identity();
  mirrored(2, 2) = -1.0;
  CHECK_THROWS_AS(RigidTransform::from_matrix(mirrored), Error);
  Eigen::Matrix4d bottom = Eigen::Matrix4d::Identity();
  bottom(3, 0) = 0.1;
  CHECK_THROWS_AS(RigidTransform::from_matrix(bottom), Error);
}

TEST_CASE("value type invariants") {
  PointCloud bad = testing::cloud_of({Point3(0, 0, std::nan(""))});
  CHECK_THROWS_AS(bad.validate(), Error);
  PointCloud mismatched = testing::cloud_of({Point3::Zero(), Point3::Ones()});
  mismatched.intensity = {0.5f};
  CHECK_THROWS_AS(mismatched.validate(), Error);

  BoundingBox3 flat;
  flat.dims = Eigen::Vector3d(1, 0, 1);
  CHECK_THROWS_AS(flat.validate(), Error);

  TriangleMesh mesh;
  mesh.vertices = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(2, 0, 0)};
  mesh.normals.assign(3, Eigen::Vector3d::UnitZ());
  mesh.triangles = {{0, 1, 2}};
  CHECK_THROWS_AS(mesh.validate(), Error);
  mesh.triangles = {{0, 1, 3}};
  CHECK_THROWS_AS(mesh.validate(), Error);

  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
}
