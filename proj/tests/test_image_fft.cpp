#include <doctest.h>

#include "helpers.hpp"
#include "svpsf/degrade.hpp"
#include "svpsf/error.hpp"
#include "svpsf/fft.hpp"

using namespace svpsf;

TEST_SUITE("image_fft") {
  TEST_CASE("crop and rotation") {
    const Image img = test::pattern(5, 3);
    CHECK(img.crop(1, 1, 3, 2)(0, 0) == img(1, 1));
    CHECK_THROWS_AS(img.crop(3, 0, 3, 1), Error);
    const Image r1 = img.rotated90(1);
    CHECK(r1.width() == 3);
    CHECK(r1.height() == 5);
    CHECK(img.rotated90(4) == img);
    CHECK(img.rotated90(1).rotated90(3) == img);
    CHECK(img.rotated90(2) == img.rotated90(1).rotated90(1));
  }

  TEST_CASE("fast sizes have only small prime factors") {
    for (int n = 1; n < 600; n += 7) {
      int m = fft::fast_size(n);
      CHECK(m >= n);
      for (int p : {2, 3, 5, 7})
        while (m % p == 0) m /= p;
      CHECK(m == 1);
    }
  }

  TEST_CASE("forward then inverse is the identity") {
    const Image img = test::random_image(30, 21, 4);
    CHECK(max_abs_diff(fft::inverse(fft::forward(img)), img) < 1e-12);
  }

  TEST_CASE("FFT convolution matches the direct spatial oracle") {
    const Image img = test::random_image(40, 33, 9);
    const Psf psf = gaussian_psf({PsfModel::Gaussian2, {3.0, 1.5}, 0.0}, 11);
    CHECK(max_abs_diff(convolve(img, psf), test::direct_convolve(img, psf.kernel)) < 1e-12);
  }

  TEST_CASE("convolution matches frozen reference values") {
    // scipy.ndimage.convolve(mode="reflect"), see tests/oracles.
    const Image out = convolve(test::pattern(20, 16), gaussian_psf({PsfModel::Gaussian2, {2.0, 1.0}, 0.0}, 7));
    CHECK(out(0, 0) == doctest::Approx(0.82885916793920955).epsilon(1e-12));
    CHECK(out(7, 5) == doctest::Approx(0.40043837576007163).epsilon(1e-12));
    CHECK(out(19, 15) == doctest::Approx(0.57994648064823784).epsilon(1e-12));
    CHECK(out(3, 14) == doctest::Approx(0.25517909318785814).epsilon(1e-12));
  }

  TEST_CASE("reflect padding and its adjoint") {
    const Image img = test::random_image(6, 5, 1);
    const Image p = pad(img, 3, 2, Boundary::Reflect);
    CHECK(p(2, 2) == img(0, 0));
    CHECK(p(0, 2) == img(2, 0));
    CHECK(p(9, 2) == img(5, 0));
    CHECK_THROWS_AS(pad(img, 7, 0, Boundary::Reflect), Error);
    // <P x, y> == <x, P^T y>
    const Image q = test::random_image(12, 9, 2);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) lhs += p.pixels()[i] * q.pixels()[i];
    const Image f = fold_padding(q, 3, 2, 6, 5);
    for (std::size_t i = 0; i < img.size(); ++i) rhs += img.pixels()[i] * f.pixels()[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }

  TEST_CASE("kernel wider than the image is a size error") {
    const Image img(10, 10, 1.0);
    CHECK_THROWS_AS(convolve(img, gaussian_psf({PsfModel::Gaussian1, {2.0}, 0.0}, 31)), Error);
  }
}
