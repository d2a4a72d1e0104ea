#pragma once

#include <cstdint>

#include "svpsf/image.hpp"
#include "svpsf/psf.hpp"

namespace svpsf {

// Reflect mirrors about the outer pixel edge (abc|cba); replicate repeats the edge pixel.
enum class Boundary { Reflect, Replicate };

// Extends the image by rx columns and ry rows on each side. The extension may not exceed
// the image extent along that axis.
Image pad(const Image& image, int rx, int ry, Boundary boundary);

// Adjoint of pad() for Boundary::Reflect: folds the margins back onto the interior.
Image fold_padding(const Image& padded, int rx, int ry, int width, int height);

// Linear "same" convolution computed in the frequency domain on a field extended by the
// kernel radius, cropped back to the input size.
Image convolve(const Image& image, const Psf& psf, Boundary boundary = Boundary::Reflect);

struct NoiseConfig {
  double beta = 1.0;   // quantum efficiency, in [0, 1]
  double sigma = 0.0;  // read-noise standard deviation (same units as the image)
  std::uint64_t seed = 0;

  void validate() const;
};

// beta * Poisson(pixel) + N(0, sigma^2), independently per pixel. Deterministic in seed.
Image add_noise(const Image& image, const NoiseConfig& config);

enum class IlluminationKind { GlobalGain, Gradient };
enum class Axis { X, Y };

struct Illumination {
  IlluminationKind kind = IlluminationKind::GlobalGain;
  double strength = 0.0;  // in [0, 1]
  int sign = 1;           // gain (1 + sign * strength); for gradients the ramp direction
  Axis axis = Axis::X;
};

Image illumination_perturb(const Image& image, const Illumination& illumination);
Illumination random_illumination(IlluminationKind kind, double strength, std::uint64_t seed);

struct ValidityConfig {
  double var_threshold = 1e-4;        // on variance / dynamic_range^2
  double white_ratio_threshold = 0.5;  // fraction of pixels above 0.95 * dynamic_range
  bool operator==(const ValidityConfig&) const = default;
};

// true when the patch lacks usable texture (a0 = 1): its variance, relative to the squared
// dynamic range, is below var_threshold or too many pixels are near saturation.
bool validity_check(const Image& patch, double var_threshold, double white_ratio_threshold,
                    double dynamic_range = 1.0);
inline bool validity_check(const Image& patch, const ValidityConfig& config, double dynamic_range = 1.0) {
  return validity_check(patch, config.var_threshold, config.white_ratio_threshold, dynamic_range);
}

// Isolated single-pixel points (no two 8-connected) of intensity in [0.5, 1] on black.
Image synth_points(int count, int size, std::uint64_t seed);
// Overlapping soft-edged elliptic cells with nuclei and granules, normalized to peak 1.
Image synth_cells(int count, int size, std::uint64_t seed);

}  // namespace svpsf
