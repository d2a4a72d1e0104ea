#pragma once

#include <functional>
#include <span>
#include <vector>

#include "svpsf/fft.hpp"
#include "svpsf/image.hpp"
#include "svpsf/psf.hpp"
#include "svpsf/psf_map.hpp"

namespace svpsf {

// Separable bilinear tents: mask m = (col, row) is wx[col](x) * wy[row](y). Tents are centered on
// the cell's patch center with half-width equal to the stride; pixels outside the lattice of
// centers take the weights of the nearest center, so the masks sum to one everywhere.
struct MaskSet {
  int width = 0;
  int height = 0;
  int grid_w = 0;
  int grid_h = 0;
  std::vector<std::vector<double>> wx;
  std::vector<std::vector<double>> wy;

  std::size_t size() const noexcept { return static_cast<std::size_t>(grid_w) * grid_h; }
  double weight(std::size_t m, int x, int y) const { return wx[m % grid_w][x] * wy[m / grid_w][y]; }
  Image mask(std::size_t m) const;
};

MaskSet build_masks(int width, int height, int grid_w, int grid_h, int patch_w, int patch_h, int stride);
MaskSet build_masks(int width, int height, const ParamMap& map);

// Overlap-add operator x -> sum_m h_m * (phi_m x) on a reflect-extended field, and its adjoint.
class SvOperator {
 public:
  SvOperator(std::span<const Psf> bank, MaskSet masks);

  Image apply(const Image& x) const;
  Image adjoint(const Image& r) const;
  const MaskSet& masks() const noexcept { return masks_; }

 private:
  MaskSet masks_;
  int radius_ = 0;
  int field_w_ = 0;
  int field_h_ = 0;
  std::vector<fft::Spectrum> spectra_;
};

Image sv_convolve(const Image& x, std::span<const Psf> bank, const MaskSet& masks);

struct DeconvConfig {
  double lambda_tv = 0.1;
  int iterations = 20;
  double tv_epsilon = 1e-6;  // relative to the dynamic range of y
  bool nonneg_clamp = true;

  void validate() const;
};

using IterationCallback = std::function<void(int iteration, const Image& estimate)>;

// Multiplicative Richardson-Lucy on the overlap-add operator with a TV denominator, x0 = y.
Image tv_rl_deconvolve(const Image& y, std::span<const Psf> bank, const MaskSet& masks, const DeconvConfig& config,
                       const IterationCallback& on_iteration = {});

// 1 - lambda * div(grad x / sqrt(|grad x|^2 + eps^2)), forward differences, reflect boundary.
Image tv_factor(const Image& x, double lambda, double eps);

// Correlation with the kernel, i.e. convolution with the flipped kernel h(-r).
Image correlate(const Image& image, const Psf& psf);

constexpr double kSnrCap = 300.0;

// 10 log10(sum ref^2 / sum (ref - test)^2), clamped to +-kSnrCap.
double snr(const Image& ref, const Image& test);
// Single-scale SSIM, both images mapped to 0..255 by the reference range, 11x11 Gaussian
// window with sigma 1.5 over the valid region.
double ssim(const Image& ref, const Image& test);

}  // namespace svpsf
