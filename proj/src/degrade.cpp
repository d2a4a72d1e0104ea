#include "svpsf/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "svpsf/error.hpp"
#include "svpsf/fft.hpp"

namespace svpsf {
namespace {

int boundary_index(int i, int n, Boundary boundary) {
  if (i >= 0 && i < n) return i;
  if (boundary == Boundary::Replicate) return std::clamp(i, 0, n - 1);
  return i < 0 ? -i - 1 : 2 * n - 1 - i;
}

double poisson_sample(double lambda, std::mt19937_64& rng) {
  if (!(lambda > 0.0)) return 0.0;
  return static_cast<double>(std::poisson_distribution<long long>(lambda)(rng));
}

}  // namespace

Image pad(const Image& image, int rx, int ry, Boundary boundary) {
  if (image.empty()) fail(ErrorKind::Size, "cannot pad an empty image");
  if (rx < 0 || ry < 0 || rx > image.width() || ry > image.height())
    fail(ErrorKind::Size, "padding exceeds the image extent");
  const int w = image.width() + 2 * rx;
  const int h = image.height() + 2 * ry;
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy = boundary_index(y - ry, image.height(), boundary);
    for (int x = 0; x < w; ++x) out(x, y) = image(boundary_index(x - rx, image.width(), boundary), sy);
  }
  return out;
}

Image fold_padding(const Image& padded, int rx, int ry, int width, int height) {
  if (padded.width() != width + 2 * rx || padded.height() != height + 2 * ry)
    fail(ErrorKind::DimensionMismatch, "padded field does not match the requested margins");
  Image out(width, height);
  for (int y = 0; y < padded.height(); ++y) {
    const int sy = boundary_index(y - ry, height, Boundary::Reflect);
    for (int x = 0; x < padded.width(); ++x)
      out(boundary_index(x - rx, width, Boundary::Reflect), sy) += padded(x, y);
  }
  return out;
}

Image convolve(const Image& image, const Psf& psf, Boundary boundary) {
  const int r = psf.side() / 2;
  if (psf.side() % 2 == 0 || psf.kernel.height() != psf.side())
    fail(ErrorKind::Size, "PSF must be square with an odd side");
  if (r > image.width() || r > image.height())
    fail(ErrorKind::Size, "kernel larger than the padded image supports");
  const Image padded = pad(image, r, r, boundary);
  const int fw = fft::fast_size(padded.width());
  const int fh = fft::fast_size(padded.height());
  Image field(fw, fh);
  for (int y = 0; y < padded.height(); ++y)
    for (int x = 0; x < padded.width(); ++x) field(x, y) = padded(x, y);
  auto spectrum = fft::forward(field);
  fft::multiply(spectrum, fft::kernel_spectrum(psf.kernel, fw, fh));
  const Image full = fft::inverse(std::move(spectrum));
  return full.crop(r, r, image.width(), image.height());
}

void NoiseConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorKind::Config, "noise beta must lie in [0, 1]");
  if (!(sigma >= 0.0)) fail(ErrorKind::Config, "noise sigma must be nonnegative");
}

Image add_noise(const Image& image, const NoiseConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> read_noise(0.0, 1.0);
  Image out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double photons = config.beta > 0.0 ? poisson_sample(image.pixels()[i], rng) : 0.0;
    const double b = config.sigma > 0.0 ? config.sigma * read_noise(rng) : 0.0;
    out.pixels()[i] = config.beta * photons + b;
  }
  return out;
}

Image illumination_perturb(const Image& image, const Illumination& ill) {
  Image out = image;
  if (ill.strength == 0.0) return out;
  const double s = ill.strength;
  if (ill.kind == IlluminationKind::GlobalGain) {
    out *= 1.0 + (ill.sign >= 0 ? s : -s);
    return out;
  }
  const int n = ill.axis == Axis::X ? image.width() : image.height();
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      int i = ill.axis == Axis::X ? x : y;
      if (ill.sign < 0) i = n - 1 - i;
      const double t = n > 1 ? static_cast<double>(i) / (n - 1) : 0.5;
      out(x, y) *= 1.0 - s + 2.0 * s * t;
    }
  }
  return out;
}

Illumination random_illumination(IlluminationKind kind, double strength, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  Illumination ill{kind, strength, coin(rng) ? 1 : -1, Axis::X};
  ill.axis = coin(rng) ? Axis::X : Axis::Y;
  return ill;
}

bool validity_check(const Image& patch, double var_threshold, double white_ratio_threshold,
                    double dynamic_range) {
  if (patch.empty()) fail(ErrorKind::Size, "validity check on an empty patch");
  if (var_threshold < 0.0 || white_ratio_threshold < 0.0)
    fail(ErrorKind::Domain, "validity thresholds must be nonnegative");
  if (!(dynamic_range > 0.0)) fail(ErrorKind::Domain, "dynamic range must be positive");
  const double normalized_var = patch.variance() / (dynamic_range * dynamic_range);
  const double white_level = 0.95 * dynamic_range;
  const auto white = std::count_if(patch.pixels().begin(), patch.pixels().end(),
                                   [&](double v) { return v > white_level; });
  const double white_ratio = static_cast<double>(white) / patch.size();
  return normalized_var < var_threshold || white_ratio > white_ratio_threshold;
}

Image synth_points(int count, int size, std::uint64_t seed) {
  if (size < 1 || count < 0) fail(ErrorKind::Size, "invalid point image request");
  if (count > ((size + 1) / 2) * ((size + 1) / 2))
    fail(ErrorKind::Size, "too many isolated points for the image size");
  Image img(size, size);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pos(0, size - 1);
  std::uniform_real_distribution<double> level(0.5, 1.0);
  int placed = 0;
  for (long attempts = 0; placed < count; ++attempts) {
    if (attempts > 1000L * (count + 1)) fail(ErrorKind::Size, "could not place isolated points");
    const int x = pos(rng);
    const int y = pos(rng);
    bool free = true;
    for (int dy = -1; dy <= 1 && free; ++dy)
      for (int dx = -1; dx <= 1 && free; ++dx) {
        const int xx = x + dx, yy = y + dy;
        if (xx >= 0 && yy >= 0 && xx < size && yy < size && img(xx, yy) > 0.0) free = false;
      }
    if (!free) continue;
    img(x, y) = level(rng);
    ++placed;
  }
  return img;
}

Image synth_cells(int count, int size, std::uint64_t seed) {
  if (size < 1 || count < 0) fail(ErrorKind::Size, "invalid cell image request");
  Image img(size, size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = std::max(4.0, size / 16.0);
  auto add_ellipse = [&](double cx, double cy, double ax, double ay, double angle, double level, double edge) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double reach = std::max(ax, ay) + 2.0 * edge;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double u = ((x - cx) * ca + (y - cy) * sa) / ax;
        const double v = (-(x - cx) * sa + (y - cy) * ca) / ay;
        // Signed distance proxy in pixels from the ellipse boundary, smoothed over `edge`.
        const double d = (std::sqrt(u * u + v * v) - 1.0) * std::min(ax, ay);
        const double t = std::clamp(0.5 - d / (2.0 * edge), 0.0, 1.0);
        img(x, y) += level * t * t * (3.0 - 2.0 * t);
      }
    }
  };
  for (int i = 0; i < count; ++i) {
    const double cx = unit(rng) * size;
    const double cy = unit(rng) * size;
    const double ax = scale * (0.6 + 0.8 * unit(rng));
    const double ay = ax * (0.5 + 0.5 * unit(rng));
    const double angle = unit(rng) * std::numbers::pi;
    const double level = 0.3 + 0.5 * unit(rng);
    add_ellipse(cx, cy, ax, ay, angle, level, 1.0 + 1.5 * unit(rng));
    const double nucleus = 0.3 + 0.2 * unit(rng);
    add_ellipse(cx + (unit(rng) - 0.5) * ax * 0.4, cy + (unit(rng) - 0.5) * ay * 0.4, ax * nucleus,
                ay * nucleus * (0.8 + 0.4 * unit(rng)), unit(rng) * std::numbers::pi, 0.4 * unit(rng) + 0.2, 0.8);
    const int granules = static_cast<int>(4 + 6 * unit(rng));
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int g = 0; g < granules; ++g) {
      const double r = std::sqrt(unit(rng)) * 0.8;
      const double phi = unit(rng) * 2.0 * std::numbers::pi;
      const double ex = ax * r * std::cos(phi), ey = ay * r * std::sin(phi);
      const double radius = 0.8 + 1.2 * unit(rng);
      add_ellipse(cx + ex * ca - ey * sa, cy + ex * sa + ey * ca, radius, radius, 0.0, 0.15 + 0.25 * unit(rng), 0.5);
    }
  }
  const double peak = img.max();
  if (peak > 0.0) img *= 1.0 / peak;
  return img;
}

}  // namespace svpsf
