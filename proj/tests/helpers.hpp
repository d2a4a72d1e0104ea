#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>

#include "svpsf/image.hpp"
#include "svpsf/psf.hpp"

namespace svpsf::test {

inline Image pattern(int w, int h, double phase = 0.0) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img(x, y) = 0.5 + 0.3 * std::sin(0.7 * x + 0.2 * y + phase) + 0.2 * std::cos(0.05 * x * y);
  return img;
}

inline Image random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(w, h);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const char* base = std::getenv("SVPSF_TMP");
  auto dir = (base ? std::filesystem::path(base) : std::filesystem::temp_directory_path() / "svpsf_tests") / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Direct spatial "same" convolution with half-sample symmetric extension.
inline Image direct_convolve(const Image& img, const Image& k) {
  const int r = k.width() / 2;
  auto refl = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
    return i;
  };
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j)
        for (int i = -r; i <= r; ++i) s += k(i + r, j + r) * img(refl(x - i, img.width()), refl(y - j, img.height()));
      out(x, y) = s;
    }
  return out;
}

}  // namespace svpsf::test
