#include <doctest.h>

#include "helpers.hpp"
#include "svpsf/degrade.hpp"
#include "svpsf/error.hpp"

using namespace svpsf;

TEST_SUITE("degrade") {
  TEST_CASE("delta kernel is the identity") {
    const Image img = test::random_image(33, 17, 3);
    CHECK(max_abs_diff(convolve(img, Psf::delta(9)), img) < 1e-12);
  }

  TEST_CASE("convolution preserves the mean of a constant image") {
    const Image img(40, 40, 0.37);
    const Image out = convolve(img, render_psf({PsfModel::Zernike2, {2.0, 1.0}, 0.0}, 31));
    CHECK(max_abs_diff(out, img) < 1e-12);
  }

  TEST_CASE("replicate boundary") {
    const Image img = test::random_image(5, 4, 5);
    const Image p = pad(img, 2, 2, Boundary::Replicate);
    CHECK(p(0, 0) == img(0, 0));
    CHECK(p(8, 7) == img(4, 3));
    const Image k = gaussian_psf({PsfModel::Gaussian1, {1.0}, 0.0}, 5).kernel;
    const Image out = convolve(test::random_image(20, 20, 6), Psf{k, 1.0}, Boundary::Replicate);
    CHECK(out.width() == 20);
  }

  TEST_CASE("noise statistics") {
    const Image img(500, 400, 50.0);
    const Image noisy = add_noise(img, {1.0, 3.0, 11});
    CHECK(noisy.mean() == doctest::Approx(50.0).epsilon(0.002));
    CHECK(noisy.variance() == doctest::Approx(59.0).epsilon(0.01));
    const Image scaled = add_noise(img, {0.5, 0.0, 12});
    CHECK(scaled.mean() == doctest::Approx(25.0).epsilon(0.002));
    CHECK(scaled.variance() == doctest::Approx(12.5).epsilon(0.02));
  }

  TEST_CASE("pure read noise and pure shot noise") {
    CHECK(add_noise(Image(30, 30, 0.0), {1.0, 0.0, 3}) == Image(30, 30, 0.0));
    const Image read = add_noise(Image(1000, 1000, 7.0), {0.0, 2.0, 4});
    CHECK(std::abs(read.mean()) <= 0.01);
    CHECK(std::abs(read.variance() - 4.0) <= 0.05);
    const Image shot = add_noise(Image(1000, 1000, 100.0), {1.0, 0.0, 5});
    CHECK(std::abs(shot.variance() - 100.0) <= 1.5);
    const Image low = add_noise(Image(1000, 1000, 2.5), {1.0, 0.0, 6});
    CHECK(std::abs(low.mean() - 2.5) <= 0.01);
    CHECK(std::abs(low.variance() - 2.5) <= 0.03);
  }

  TEST_CASE("noise is deterministic in the seed") {
    const Image img = test::random_image(30, 30, 1, 0.0, 100.0);
    CHECK(add_noise(img, {1.0, 2.0, 7}) == add_noise(img, {1.0, 2.0, 7}));
    CHECK_FALSE(add_noise(img, {1.0, 2.0, 7}) == add_noise(img, {1.0, 2.0, 8}));
    CHECK(add_noise(img, {1.0, 0.0, 7}).min() >= 0.0);
  }

  TEST_CASE("noise configuration is checked") {
    const Image img(4, 4, 1.0);
    CHECK_THROWS_AS(add_noise(img, {1.5, 0.0, 0}), Error);
    CHECK_THROWS_AS(add_noise(img, {1.0, -1.0, 0}), Error);
  }

  TEST_CASE("illumination perturbations") {
    const Image img(11, 7, 2.0);
    CHECK(illumination_perturb(img, {IlluminationKind::GlobalGain, 0.2, 1, Axis::X})(3, 3) == doctest::Approx(2.4));
    CHECK(illumination_perturb(img, {IlluminationKind::GlobalGain, 0.2, -1, Axis::X})(3, 3) == doctest::Approx(1.6));
    const Image g = illumination_perturb(img, {IlluminationKind::Gradient, 0.3, 1, Axis::X});
    CHECK(g(0, 2) == doctest::Approx(1.4));
    CHECK(g(10, 2) == doctest::Approx(2.6));
    CHECK(g.mean() == doctest::Approx(2.0));
    const Image gy = illumination_perturb(img, {IlluminationKind::Gradient, 0.3, -1, Axis::Y});
    CHECK(gy(4, 0) == doctest::Approx(2.6));
    CHECK(illumination_perturb(img, {IlluminationKind::Gradient, 0.0, 1, Axis::X}) == img);
  }

  TEST_CASE("validity check") {
    CHECK(validity_check(Image(16, 16, 0.0), 1e-4, 0.5));
    CHECK(validity_check(Image(16, 16, 0.99), 1e-4, 0.5));
    CHECK_FALSE(validity_check(test::random_image(16, 16, 3), 1e-4, 0.5));
    Image white = test::random_image(16, 16, 3, 0.0, 0.5);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 16; ++x) white(x, y) = 1.0;
    CHECK(validity_check(white, 1e-4, 0.5));
    CHECK_FALSE(validity_check(test::random_image(16, 16, 3, 0.0, 100.0), 1e-4, 0.5, 100.0));
    CHECK_THROWS_AS(validity_check(Image(), 1e-4, 0.5), Error);
  }

  TEST_CASE("synthetic point sources") {
    const Image pts = synth_points(60, 128, 4);
    int n = 0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        if (pts(x, y) == 0.0) continue;
        ++n;
        CHECK(pts(x, y) >= 0.5);
        CHECK(pts(x, y) <= 1.0);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || x + dx < 0 || y + dy < 0 || x + dx >= 128 || y + dy >= 128) continue;
            CHECK(pts(x + dx, y + dy) == 0.0);
          }
      }
    CHECK(n == 60);
    CHECK(synth_points(60, 128, 4) == pts);
  }

  TEST_CASE("synthetic cells") {
    const Image cells = synth_cells(30, 128, 2);
    CHECK(cells.max() == doctest::Approx(1.0));
    CHECK(cells.min() >= 0.0);
    CHECK(cells.variance() > 1e-3);
    CHECK(synth_cells(30, 128, 2) == cells);
  }
}
