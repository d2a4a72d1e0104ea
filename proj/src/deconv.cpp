#include "svpsf/deconv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svpsf/degrade.hpp"
#include "svpsf/error.hpp"

namespace svpsf {
namespace {

std::vector<std::vector<double>> tent_weights(int cells, int extent, int patch, int stride) {
  std::vector<std::vector<double>> w(cells, std::vector<double>(extent, 0.0));
  if (cells == 1) {
    std::fill(w[0].begin(), w[0].end(), 1.0);
    return w;
  }
  const double first = patch / 2;
  const double last = first + static_cast<double>(cells - 1) * stride;
  for (int x = 0; x < extent; ++x) {
    const double xc = std::clamp(static_cast<double>(x), first, last);
    const int i = std::min(static_cast<int>((xc - first) / stride), cells - 2);
    const double f = (xc - (first + static_cast<double>(i) * stride)) / stride;
    w[i][x] = 1.0 - f;
    w[i + 1][x] = f;
  }
  return w;
}

Image embed(const Image& src, int fw, int fh, int ox, int oy) {
  Image field(fw, fh);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) field(x + ox, y + oy) = src(x, y);
  return field;
}

// 1D Gaussian taps for the SSIM window.
std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(size);
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

Image filter_valid(const Image& in, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int w = in.width() - k + 1, h = in.height() - k + 1;
  Image rows(w, in.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * in(x + i, y);
      rows(x, y) = s;
    }
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * rows(x, y + i);
      out(x, y) = s;
    }
  return out;
}

void check_same_dims(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    fail(ErrorKind::DimensionMismatch, "images differ in size");
}

}  // namespace

Image MaskSet::mask(std::size_t m) const {
  if (m >= size()) fail(ErrorKind::DimensionMismatch, "mask index out of range");
  Image out(width, height);
  const auto& ax = wx[m % grid_w];
  const auto& ay = wy[m / grid_w];
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out(x, y) = ax[x] * ay[y];
  return out;
}

MaskSet build_masks(int width, int height, int grid_w, int grid_h, int patch_w, int patch_h, int stride) {
  if (width < 1 || height < 1) fail(ErrorKind::Size, "mask dimensions must be positive");
  if (grid_w < 1 || grid_h < 1) fail(ErrorKind::Size, "mask grid must hold at least one cell");
  if (stride < 1) fail(ErrorKind::Config, "stride must be positive");
  MaskSet m;
  m.width = width;
  m.height = height;
  m.grid_w = grid_w;
  m.grid_h = grid_h;
  m.wx = tent_weights(grid_w, width, patch_w, stride);
  m.wy = tent_weights(grid_h, height, patch_h, stride);
  return m;
}

MaskSet build_masks(int width, int height, const ParamMap& map) {
  return build_masks(width, height, map.grid_w, map.grid_h, map.config.patch_w, map.config.patch_h,
                     map.config.stride);
}

SvOperator::SvOperator(std::span<const Psf> bank, MaskSet masks) : masks_(std::move(masks)) {
  if (bank.size() != masks_.size()) fail(ErrorKind::DimensionMismatch, "PSF bank and mask set differ in size");
  for (const auto& p : bank) {
    if (p.side() % 2 == 0 || p.kernel.height() != p.side()) fail(ErrorKind::Size, "PSF must be square with an odd side");
    radius_ = std::max(radius_, p.side() / 2);
  }
  if (radius_ > masks_.width || radius_ > masks_.height)
    fail(ErrorKind::Size, "kernel larger than the padded image supports");
  field_w_ = fft::fast_size(masks_.width + 2 * radius_);
  field_h_ = fft::fast_size(masks_.height + 2 * radius_);
  spectra_.reserve(bank.size());
  for (const auto& p : bank) spectra_.push_back(fft::kernel_spectrum(p.kernel, field_w_, field_h_));
}

Image SvOperator::apply(const Image& x) const {
  if (x.width() != masks_.width || x.height() != masks_.height)
    fail(ErrorKind::DimensionMismatch, "image does not match the mask set");
  fft::Spectrum acc{field_w_, field_h_, {}};
  acc.data.assign(static_cast<std::size_t>(field_w_ / 2 + 1) * field_h_, {0.0, 0.0});
  Image masked(x.width(), x.height());
  for (std::size_t m = 0; m < spectra_.size(); ++m) {
    const auto& ax = masks_.wx[m % masks_.grid_w];
    const auto& ay = masks_.wy[m / masks_.grid_w];
    for (int yy = 0; yy < x.height(); ++yy)
      for (int xx = 0; xx < x.width(); ++xx) masked(xx, yy) = ax[xx] * ay[yy] * x(xx, yy);
    const auto s = fft::forward(embed(pad(masked, radius_, radius_, Boundary::Reflect), field_w_, field_h_, 0, 0));
    fft::multiply_add(acc, s, spectra_[m]);
  }
  return fft::inverse(std::move(acc)).crop(radius_, radius_, x.width(), x.height());
}

Image SvOperator::adjoint(const Image& r) const {
  if (r.width() != masks_.width || r.height() != masks_.height)
    fail(ErrorKind::DimensionMismatch, "image does not match the mask set");
  const auto base = fft::forward(embed(r, field_w_, field_h_, radius_, radius_));
  const int pw = r.width() + 2 * radius_, ph = r.height() + 2 * radius_;
  Image out(r.width(), r.height());
  for (std::size_t m = 0; m < spectra_.size(); ++m) {
    auto s = base;
    fft::multiply(s, spectra_[m], true);
    const Image folded = fold_padding(fft::inverse(std::move(s)).crop(0, 0, pw, ph), radius_, radius_, r.width(), r.height());
    const auto& ax = masks_.wx[m % masks_.grid_w];
    const auto& ay = masks_.wy[m / masks_.grid_w];
    for (int y = 0; y < r.height(); ++y)
      for (int x = 0; x < r.width(); ++x) out(x, y) += ax[x] * ay[y] * folded(x, y);
  }
  return out;
}

Image sv_convolve(const Image& x, std::span<const Psf> bank, const MaskSet& masks) {
  return SvOperator(bank, masks).apply(x);
}

void DeconvConfig::validate() const {
  if (!(lambda_tv >= 0.0 && lambda_tv < 1.0)) fail(ErrorKind::Config, "lambda_tv must lie in [0, 1)");
  if (iterations < 1) fail(ErrorKind::Config, "iterations must be >= 1");
  if (!(tv_epsilon > 0.0)) fail(ErrorKind::Config, "tv_epsilon must be positive");
}

Image tv_factor(const Image& x, double lambda, double eps) {
  const int w = x.width(), h = x.height();
  Image px(w, h), py(w, h);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      const double gx = xx + 1 < w ? x(xx + 1, y) - x(xx, y) : 0.0;
      const double gy = y + 1 < h ? x(xx, y + 1) - x(xx, y) : 0.0;
      const double mag = std::sqrt(gx * gx + gy * gy + eps * eps);
      px(xx, y) = gx / mag;
      py(xx, y) = gy / mag;
    }
  Image f(w, h);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      const double div = px(xx, y) - (xx > 0 ? px(xx - 1, y) : 0.0) + py(xx, y) - (y > 0 ? py(xx, y - 1) : 0.0);
      f(xx, y) = 1.0 - lambda * div;
    }
  return f;
}

Image tv_rl_deconvolve(const Image& y, std::span<const Psf> bank, const MaskSet& masks, const DeconvConfig& config,
                       const IterationCallback& on_iteration) {
  config.validate();
  if (y.width() != masks.width || y.height() != masks.height)
    fail(ErrorKind::DimensionMismatch, "image does not match the mask set");
  if (!y.all_finite()) fail(ErrorKind::Numerical, "input image holds non-finite values");
  if (!(y.max() > 0.0)) fail(ErrorKind::DegenerateInput, "input image is all zero");
  // Rounding residue from upstream FFTs is tolerated and clipped.
  if (y.min() < -1e-9 * y.max()) fail(ErrorKind::Domain, "Richardson-Lucy input must be nonnegative");

  Image yc = y;
  for (double& v : yc.pixels()) v = std::max(v, 0.0);
  const SvOperator op(bank, masks);
  Image norm = op.adjoint(Image(y.width(), y.height(), 1.0));
  for (double& v : norm.pixels()) v = std::max(v, 1e-12);
  const double range = yc.max() - yc.min();
  const double eps = config.tv_epsilon * (range > 0.0 ? range : yc.max());

  Image x = yc;
  Image ratio(y.width(), y.height());
  for (int it = 1; it <= config.iterations; ++it) {
    const Image ax = op.apply(x);
    for (std::size_t i = 0; i < ratio.size(); ++i) ratio.pixels()[i] = yc.pixels()[i] / std::max(ax.pixels()[i], 1e-12);
    const Image corr = op.adjoint(ratio);
    if (config.lambda_tv > 0.0) {
      const Image tv = tv_factor(x, config.lambda_tv, eps);
      for (std::size_t i = 0; i < x.size(); ++i)
        x.pixels()[i] *= corr.pixels()[i] / norm.pixels()[i] / std::max(tv.pixels()[i], 1e-3);
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) x.pixels()[i] *= corr.pixels()[i] / norm.pixels()[i];
    }
    if (config.nonneg_clamp)
      for (double& v : x.pixels()) v = std::max(v, 0.0);
    if (!x.all_finite()) fail(ErrorKind::Numerical, "non-finite estimate at iteration " + std::to_string(it));
    if (on_iteration) on_iteration(it, x);
  }
  return x;
}

Image correlate(const Image& image, const Psf& psf) {
  const int r = psf.side() / 2;
  const Image padded = pad(image, r, r, Boundary::Reflect);
  const int fw = fft::fast_size(padded.width()), fh = fft::fast_size(padded.height());
  auto s = fft::forward(embed(padded, fw, fh, 0, 0));
  fft::multiply(s, fft::kernel_spectrum(psf.kernel, fw, fh), true);
  return fft::inverse(std::move(s)).crop(r, r, image.width(), image.height());
}

double snr(const Image& ref, const Image& test) {
  check_same_dims(ref, test);
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double r = ref.pixels()[i], d = r - test.pixels()[i];
    signal += r * r;
    noise += d * d;
  }
  if (noise == 0.0) return signal == 0.0 ? 0.0 : kSnrCap;
  if (signal == 0.0) return -kSnrCap;
  return std::clamp(10.0 * std::log10(signal / noise), -kSnrCap, kSnrCap);
}

double ssim(const Image& ref, const Image& test) {
  check_same_dims(ref, test);
  constexpr int kWindow = 11;
  if (ref.width() < kWindow || ref.height() < kWindow) fail(ErrorKind::Size, "SSIM needs images of at least 11x11");
  const double lo = ref.min(), hi = ref.max();
  if (!(hi > lo)) fail(ErrorKind::DegenerateInput, "SSIM reference is constant");
  const double scale = 255.0 / (hi - lo);
  Image a(ref.width(), ref.height()), b(ref.width(), ref.height());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    a.pixels()[i] = (ref.pixels()[i] - lo) * scale;
    b.pixels()[i] = (test.pixels()[i] - lo) * scale;
  }
  Image aa = a, bb = b, ab = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa.pixels()[i] *= a.pixels()[i];
    bb.pixels()[i] *= b.pixels()[i];
    ab.pixels()[i] *= b.pixels()[i];
  }
  const auto g = gaussian_taps(kWindow, 1.5);
  const Image mu_a = filter_valid(a, g), mu_b = filter_valid(b, g);
  const Image s_aa = filter_valid(aa, g), s_bb = filter_valid(bb, g), s_ab = filter_valid(ab, g);
  const double c1 = std::pow(0.01 * 255.0, 2), c2 = std::pow(0.03 * 255.0, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.pixels()[i], mb = mu_b.pixels()[i];
    const double va = s_aa.pixels()[i] - ma * ma, vb = s_bb.pixels()[i] - mb * mb, cov = s_ab.pixels()[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace svpsf
