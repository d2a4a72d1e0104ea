#pragma once

#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svpsf/image.hpp"

namespace svpsf {

enum class PsfModel { Zernike1, Zernike2, Zernike3, Gaussian1, Gaussian2 };

// Number of free parameters a_1..a_N of a model (the validity flag a_0 is extra).
int param_count(PsfModel model) noexcept;
bool is_zernike(PsfModel model) noexcept;
// Canonical short names: "Z-1", "Z-2", "Z-3", "G-1", "G-2".
std::string_view to_string(PsfModel model) noexcept;
// Accepts the canonical names and the spelled-out forms ("zernike3", "gaussian1", ...).
PsfModel parse_psf_model(std::string_view text);

// Regression target: model, physical parameters a_1..a_N and validity flag a_0 (1 = untextured).
//   Zernike: a = [defocus (rad), cylinder (rad), axis (rad, in (0, pi))], truncated to N.
//   Gaussian: a = [variance along x (px^2), variance along y (px^2)], truncated to N.
struct PsfParams {
  PsfModel model = PsfModel::Gaussian1;
  std::vector<double> a;
  double a0 = 0.0;

  bool invalid() const noexcept { return a0 >= 0.5; }
  // Throws ErrorKind::Domain when the parameter vector breaks the model's invariants.
  void validate() const;
  bool operator==(const PsfParams&) const = default;
};

struct ParamRange {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const ParamRange&) const = default;
};

// Linear maps between the unit interval used for regression and physical parameter values.
struct ParamRanges {
  ParamRange defocus{0.0, 6.0};
  ParamRange cylinder{0.0, 3.0};
  ParamRange axis{0.0, std::numbers::pi};
  ParamRange variance{0.5, 16.0};

  const ParamRange& range(PsfModel model, int index) const;
  // Physical -> [0, 1] coordinates (not clamped).
  std::vector<double> normalize(const PsfParams& params) const;
  // [0, 1] -> physical; inputs are clamped to [0, 1] and the axis to the open interval (0, pi).
  PsfParams denormalize(PsfModel model, std::span<const double> unit, double a0 = 0.0) const;
  bool contains(const PsfParams& params) const;
  bool operator==(const ParamRanges&) const = default;
};

struct PupilConfig {
  int side = 256;                // samples across the pupil plane
  double aperture_radius = 0.5;  // fraction of the grid half-width
  double wavelength = 1.0;       // normalized units
  bool operator==(const PupilConfig&) const = default;
};

// Pupil plane sampled on a side x side grid; phase holds the aberration (radians at unit
// wavelength) and is zero outside the aperture disk.
struct PupilGrid {
  int side = 0;
  double aperture_radius = 0.0;
  double wavelength = 1.0;
  Image phase;

  static PupilGrid make(const PupilConfig& config);
  double radius_samples() const noexcept { return aperture_radius * side / 2.0; }
  bool inside(int x, int y) const noexcept;
};

// Discrete nonnegative kernel of odd side, centered at ((side-1)/2, (side-1)/2), summing to 1.
struct Psf {
  Image kernel;
  // Fraction of the untruncated intensity that survived cropping (1 for sampled Gaussians).
  double captured_energy = 1.0;

  int side() const noexcept { return kernel.width(); }
  static Psf delta(int side);
};

PupilGrid zernike_phase(const PsfParams& params, PupilGrid grid);
Psf psf_from_pupil(const PupilGrid& grid, int kernel_side);
Psf gaussian_psf(const PsfParams& params, int kernel_side);
// Unnormalized separable Gaussian density sampled on the kernel grid.
Image gaussian_density(double var_x, double var_y, int kernel_side);
Psf render_psf(const PsfParams& params, int kernel_side, const PupilConfig& pupil = {});

// Second central moment sum_r |r|^2 h(r) of a kernel around its center pixel.
double second_moment(const Image& kernel);

// Binary kernel file: "PSF1", u32 side, side*side little-endian float32, row-major.
void write_psf1(const std::filesystem::path& path, const Psf& psf);
Psf read_psf1(const std::filesystem::path& path);
// 16-bit PNG scaled so the kernel maximum maps to 65535.
void write_psf_png(const std::filesystem::path& path, const Psf& psf);

}  // namespace svpsf
