#include "doctest.h"
#include "semican/config.hpp"
#include "support.hpp"

using namespace semican;

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

}  // namespace

TEST_CASE("defaults") {
  const PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.cluster.alpha == 5.0);
  CHECK(c.cluster.min_pts == 3);
  CHECK(c.sc.min_points == 50);
  CHECK(c.sc.bpa.radii.size() == 20);
  CHECK(c.sc.bpa.radii.back() == doctest::Approx(1.155));
  CHECK(c.sampling.d_ideal == 0.05);
  CHECK(c.sampling.strategy == SamplingStrategy::vres);
  CHECK(c.replace_objects);
  CHECK(c.mode == IsolationMode::source_boxes);
  CHECK(c.classes == std::vector<std::string>{"Car"});
}

TEST_CASE("toml keys override defaults") {
  PipelineConfig c;
  apply_toml(c,
             "seed = 9\n"
             "z-offset = 1.73\n"
             "mode = \"target_masks\"\n"
             "keep_original = true\n"
             "sensor = \"nuscenes\"\n"
             "alpha = 4.0\n"
             "min_pts = 5\n"
             "classes = [\"Car\", \"Van\"]\n"
             "method = \"alpha_shape\"\n"
             "min_points = 30\n"
             "bpa_max_radius = 0.8\n"
             "bpa_radius_count = 4\n"
             "strategy = \"surface_area\"\n"
             "sa_density = 250\n"
             "format = \"ply\"\n");
  CHECK(c.seed == 9);
  CHECK(c.z_offset == 1.73);
  CHECK(c.mode == IsolationMode::target_masks);
  CHECK_FALSE(c.replace_objects);
  CHECK(c.sensor.num_rings == 32);
  CHECK(c.sensor.vfov_deg == 40.0);
  CHECK(c.cluster.alpha == 4.0);
  CHECK(c.cluster.min_pts == 5);
  CHECK(c.classes == std::vector<std::string>{"Car", "Van"});
  CHECK(c.sc.method == SurfaceMethod::alpha_shape);
  CHECK(c.sc.min_points == 30);
  REQUIRE(c.sc.bpa.radii.size() == 4);
  CHECK(c.sc.bpa.radii[0] == doctest::Approx(0.2));
  CHECK(c.sc.bpa.radii[3] == doctest::Approx(0.8));
  CHECK(c.sampling.strategy == SamplingStrategy::surface_area);
  CHECK(c.sampling.sa_density == 250.0);
  CHECK(c.format == OutputFormat::ply);
  CHECK(c.shifted_origin() == Point3(0, 0, 1.73));
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("bad toml is rejected with the key named") {
  PipelineConfig c;
  CHECK(code_of([&] { apply_toml(c, "colour = 3\n"); }) == ErrorCode::MalformedFile);
  try {
    apply_toml(c, "alpha = \"wide\"\n", "my.toml");
    FAIL("expected MalformedFile");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    CHECK(std::string(e.what()).find("my.toml") != std::string::npos);
  }
  CHECK(code_of([&] { apply_toml(c, "min_pts = 2.5\n"); }) == ErrorCode::MalformedFile);
  CHECK(code_of([&] { apply_toml(c, "mode = \"lasers\"\n"); }) == ErrorCode::MalformedFile);
  CHECK(code_of([&] { apply_toml(c, "sensor = \"hdl32\"\n"); }) == ErrorCode::MalformedFile);
  CHECK(code_of([&] { apply_toml(c, "alpha = \n"); }) == ErrorCode::MalformedFile);
  CHECK(code_of([&] { apply_toml(c, "bpa_radius_count = 0\n"); }) == ErrorCode::MalformedFile);

  PipelineConfig negative;
  apply_toml(negative, "d_ideal = -0.05\n");
  CHECK_THROWS_AS(negative.validate(), Error);
  PipelineConfig vl;
  apply_toml(vl, "strategy = \"virtual_lidar\"\ntarget_pattern = \"hdl32\"\n");
  CHECK(code_of([&] { vl.validate(); }) == ErrorCode::UnknownPreset);
}

TEST_CASE("to_toml round-trips through load_config") {
  PipelineConfig c;
  c.seed = 123456789012345ULL;
  c.z_offset = 1.73;
  c.sensor = sensor_preset("baraja");
  c.cluster.alpha = 3.3;
  c.sc.bpa.radii = BpaParams::linear_radii(0.9, 7);
  c.sampling.d_ideal = 0.03;
  c.classes = {"Car", "Truck"};
  c.replace_objects = false;
  c.target_pattern = "waymo64";

  testing::TempDir dir("config");
  testing::write_bytes(dir / "c.toml", to_toml(c));
  const PipelineConfig back = load_config(dir / "c.toml");
  CHECK(to_toml(back) == to_toml(c));
  CHECK(back.seed == c.seed);
  CHECK(back.sc.bpa.radii == c.sc.bpa.radii);
  CHECK(back.sensor.num_rings == 128);

  CHECK(code_of([&] { load_config(dir / "missing.toml"); }) == ErrorCode::IoError);
}
