#include <doctest.h>

#include <filesystem>
#include <numbers>

#include "helpers.hpp"
#include "svpsf/depth.hpp"
#include "svpsf/error.hpp"

using namespace svpsf;
using std::numbers::pi;

namespace {

ParamMap z3_map(std::vector<std::pair<double, double>> a1_a3, int w) {
  ParamMap m;
  m.model = PsfModel::Zernike3;
  m.grid_w = w;
  m.grid_h = static_cast<int>(a1_a3.size()) / w;
  for (auto [a1, a3] : a1_a3) m.cells.push_back({PsfModel::Zernike3, {a1, 1.0, a3}, 0.0});
  return m;
}

DepthMap depth_of(std::vector<double> z) {
  DepthMap d;
  d.grid_w = static_cast<int>(z.size());
  d.grid_h = 1;
  d.z = std::move(z);
  return d;
}

}  // namespace

TEST_SUITE("depth") {
  TEST_CASE("signed depth from astigmatism") {
    const DepthMap d = depth_from_params(z3_map({{0.0, 0.3}, {1.7, pi / 2}, {2.0, pi - 1e-12}, {2.0, 1e-12}}, 2));
    CHECK(d.at(0, 0) == 0.0);
    CHECK(d.at(1, 0) == doctest::Approx(0.0));
    CHECK(d.at(0, 1) == doctest::Approx(2.0));
    CHECK(d.at(1, 1) == doctest::Approx(-2.0));
    CHECK(d.units == DepthUnits::ModelUnits);
    ParamMap g = make_param_map(64, 64, PsfModel::Zernike2, {32, 32, 32, 0.5});
    CHECK_THROWS_AS(depth_from_params(g), Error);
  }

  TEST_CASE("sign consistency and scale covariance") {
    std::vector<std::pair<double, double>> cells;
    for (int i = 0; i < 12; ++i) cells.emplace_back(0.2 + 0.3 * i, 0.1 + 0.25 * i);
    const ParamMap m = z3_map(cells, 4);
    const DepthMap d = depth_from_params(m);
    ParamMap scaled = m;
    for (auto& c : scaled.cells) c.a[0] *= 2.5;
    const DepthMap ds = depth_from_params(scaled);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      CHECK((cells[i].second > pi / 2) == (d.z[i] > 0.0));
      CHECK(ds.z[i] == doctest::Approx(2.5 * d.z[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("calibration fits") {
    const DepthMap gt = depth_of({-3.0, -1.0, 0.5, 2.0, 4.0});
    const auto same = calibrate_depth(gt, gt);
    CHECK(same.alpha == doctest::Approx(1.0));
    CHECK(same.beta == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(same.r2 == doctest::Approx(1.0));
    CHECK(same.abs_err_um == doctest::Approx(0.0).epsilon(1e-12));

    DepthMap est = gt;
    for (double& z : est.z) z = 2.0 * z + 5.0;
    const auto fit = calibrate_depth(est, gt);
    CHECK(fit.alpha == doctest::Approx(0.5));
    CHECK(fit.beta == doctest::Approx(-2.5));
    CHECK(fit.r2 == doctest::Approx(1.0));
    const DepthMap cal = apply_calibration(est, {fit.alpha, fit.beta});
    CHECK(cal.units == DepthUnits::Micrometers);
    for (std::size_t i = 0; i < gt.z.size(); ++i) CHECK(cal.z[i] == doctest::Approx(gt.z[i]));

    CHECK_THROWS_AS(calibrate_depth(est, depth_of({1.0, 1.0, 1.0, 1.0, 1.0})), Error);
    CHECK_THROWS_AS(calibrate_depth(depth_of({1.0, 2.0}), gt), Error);
  }

  TEST_CASE("calibration R2 is invariant to affine changes of the estimate") {
    const DepthMap gt = depth_of({-3.0, -1.0, 0.5, 2.0, 4.0, 5.0});
    const DepthMap est = depth_of({-2.5, -1.3, 0.9, 1.7, 4.4, 4.8});
    DepthMap moved = est;
    for (double& z : moved.z) z = -7.0 * z + 3.0;
    CHECK(calibrate_depth(moved, gt).r2 == doctest::Approx(calibrate_depth(est, gt).r2).epsilon(1e-12));
  }

  TEST_CASE("tilted plane geometry") {
    TiltedPlaneSpec spec;
    spec.field_um = 655.0;
    spec.axis = TiltAxis::Diagonal;
    // Reported ranges for 3, 6 and 10 degree tilts.
    const double reported[] = {48.2, 94.7, 159.9};
    const double tilts[] = {3.0, 6.0, 10.0};
    for (int i = 0; i < 3; ++i) {
      spec.tilt_deg = tilts[i];
      CHECK(spec.depth_range_um() == doctest::Approx(reported[i]).epsilon(0.025));
    }
    spec.tilt_deg = 10.0;
    CHECK(spec.depth_range_um() == doctest::Approx(159.9).epsilon(0.01));
    spec.axis = TiltAxis::Rows;
    spec.tilt_deg = 3.0;
    CHECK(spec.depth_range_um() == doctest::Approx(655.0 * std::sin(3.0 * pi / 180.0)));
    CHECK(spec.depth_at(10.0, 127.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(spec.depth_at(0.0, 255.0) - spec.depth_at(0.0, 0.0) == doctest::Approx(spec.depth_range_um()));
    spec.tilt_deg = 50.0;
    CHECK_THROWS_AS(spec.validate(), Error);
  }

  TEST_CASE("simulated scene ground truth") {
    TiltedPlaneSpec spec;
    spec.image_size = 96;
    spec.kernel_side = 15;
    const AstigmaticScene s = simulate_astigmatic_scene(spec, {64, 0.5, 1.0});
    CHECK(s.blurred.width() == 96);
    CHECK(s.params.grid_w == 5);
    CHECK(s.depth.grid_h == 5);
    CHECK(s.depth.units == DepthUnits::Micrometers);
    // Depth is affine in the row index and constant along rows.
    const double step = s.depth.at(0, 1) - s.depth.at(0, 0);
    for (int r = 0; r < s.depth.grid_h; ++r)
      for (int c = 0; c < s.depth.grid_w; ++c)
        CHECK(s.depth.at(c, r) == doctest::Approx(s.depth.at(0, 0) + r * step));
    for (int r = 0; r < s.depth.grid_h; ++r) {
      const auto& p = s.params.at(0, r);
      if (s.depth.at(0, r) > 0.0) CHECK(p.a[2] > pi / 2);
      if (s.depth.at(0, r) < 0.0) CHECK(p.a[2] < pi / 2);
      CHECK(p.a[0] == doctest::Approx(spec.defocus_per_um * std::abs(s.depth.at(0, r))));
    }
    CHECK(simulate_astigmatic_scene(spec, {64, 0.5, 1.0}).blurred == s.blurred);
  }

  TEST_CASE("a row in focus gets the minimal-blur kernel") {
    TiltedPlaneSpec spec;
    spec.image_size = 80;
    spec.patch = 32;
    spec.stride = 8;
    spec.kernel_side = 15;
    const AstigmaticScene s = simulate_astigmatic_scene(spec, {64, 0.5, 1.0});
    // Cell centers at 16, 24, ..., 64; row 3 is centered at y = 40, near the focal row 39.5.
    double best = 1e9;
    int best_row = -1;
    for (int r = 0; r < s.params.grid_h; ++r)
      if (s.params.at(0, r).a[0] < best) {
        best = s.params.at(0, r).a[0];
        best_row = r;
      }
    CHECK(best_row == 3);
  }

  TEST_CASE("depth lattice") {
    const ParamLattice l = depth_lattice(1.0, 0.25, 1.0, 0.05);
    CHECK(l.model == PsfModel::Zernike3);
    CHECK(l.size() == 10);
    for (std::size_t i = 0; i < l.size(); ++i) CHECK_NOTHROW(l.at(i).validate());
  }

  TEST_CASE("csv round trip") {
    const auto dir = test::temp_dir("depth_rt");
    DepthMap d = depth_of({-1.25, 0.0, 3.5});
    d = apply_calibration(d, {2.0, 1.0});
    write_depth_csv(dir / "d.csv", d);
    const DepthMap back = read_depth_csv(dir / "d.csv");
    CHECK(back.units == DepthUnits::Micrometers);
    CHECK(back.calibration == d.calibration);
    for (std::size_t i = 0; i < d.z.size(); ++i) CHECK(back.z[i] == doctest::Approx(d.z[i]).epsilon(1e-12));
    write_depth_png(dir / "d.png", d);
    CHECK(std::filesystem::exists(dir / "d.png"));
  }
}
