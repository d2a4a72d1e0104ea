#include "svpsf/psf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "svpsf/error.hpp"
#include "svpsf/fft.hpp"
#include "svpsf/png_io.hpp"

namespace svpsf {
namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt3 = std::sqrt(3.0);
const double kSqrt6 = std::sqrt(6.0);

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

int param_count(PsfModel model) noexcept {
  switch (model) {
    case PsfModel::Zernike1: return 1;
    case PsfModel::Zernike2: return 2;
    case PsfModel::Zernike3: return 3;
    case PsfModel::Gaussian1: return 1;
    case PsfModel::Gaussian2: return 2;
  }
  return 0;
}

bool is_zernike(PsfModel model) noexcept {
  return model == PsfModel::Zernike1 || model == PsfModel::Zernike2 || model == PsfModel::Zernike3;
}

std::string_view to_string(PsfModel model) noexcept {
  switch (model) {
    case PsfModel::Zernike1: return "Z-1";
    case PsfModel::Zernike2: return "Z-2";
    case PsfModel::Zernike3: return "Z-3";
    case PsfModel::Gaussian1: return "G-1";
    case PsfModel::Gaussian2: return "G-2";
  }
  return "?";
}

PsfModel parse_psf_model(std::string_view text) {
  const std::string t = lower(text);
  static const std::array<std::pair<const char*, PsfModel>, 15> names{{
      {"z-1", PsfModel::Zernike1}, {"z1", PsfModel::Zernike1}, {"zernike1", PsfModel::Zernike1},
      {"z-2", PsfModel::Zernike2}, {"z2", PsfModel::Zernike2}, {"zernike2", PsfModel::Zernike2},
      {"z-3", PsfModel::Zernike3}, {"z3", PsfModel::Zernike3}, {"zernike3", PsfModel::Zernike3},
      {"g-1", PsfModel::Gaussian1}, {"g1", PsfModel::Gaussian1}, {"gaussian1", PsfModel::Gaussian1},
      {"g-2", PsfModel::Gaussian2}, {"g2", PsfModel::Gaussian2}, {"gaussian2", PsfModel::Gaussian2},
  }};
  for (const auto& [name, model] : names)
    if (t == name) return model;
  fail(ErrorKind::Config, "unknown PSF model '" + std::string(text) + "'");
}

void PsfParams::validate() const {
  const int n = param_count(model);
  if (static_cast<int>(a.size()) != n)
    fail(ErrorKind::Domain, std::string(to_string(model)) + " expects " + std::to_string(n) +
                                " parameters, got " + std::to_string(a.size()));
  if (!(a0 >= 0.0 && a0 <= 1.0)) fail(ErrorKind::Domain, "validity flag a0 must lie in [0, 1]");
  for (double v : a)
    if (!std::isfinite(v)) fail(ErrorKind::Domain, "non-finite PSF parameter");
  if (!is_zernike(model)) {
    for (double v : a)
      if (!(v > 0.0)) fail(ErrorKind::Domain, "Gaussian variances must be positive");
  } else if (n == 3 && !(a[2] > 0.0 && a[2] < kPi)) {
    fail(ErrorKind::Domain, "astigmatism axis must lie in (0, pi)");
  }
}

const ParamRange& ParamRanges::range(PsfModel model, int index) const {
  if (index < 0 || index >= param_count(model)) fail(ErrorKind::Domain, "parameter index out of range");
  if (!is_zernike(model)) return variance;
  switch (index) {
    case 0: return defocus;
    case 1: return cylinder;
    default: return axis;
  }
}

std::vector<double> ParamRanges::normalize(const PsfParams& params) const {
  std::vector<double> u(params.a.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& r = range(params.model, static_cast<int>(i));
    u[i] = (params.a[i] - r.lo) / (r.hi - r.lo);
  }
  return u;
}

PsfParams ParamRanges::denormalize(PsfModel model, std::span<const double> unit, double a0) const {
  const int n = param_count(model);
  if (static_cast<int>(unit.size()) != n) fail(ErrorKind::DimensionMismatch, "normalized vector length mismatch");
  PsfParams p{model, std::vector<double>(n), a0};
  for (int i = 0; i < n; ++i) {
    const auto& r = range(model, i);
    const double u = std::clamp(std::isfinite(unit[i]) ? unit[i] : 0.0, 0.0, 1.0);
    p.a[i] = r.lo + u * (r.hi - r.lo);
  }
  if (is_zernike(model) && n == 3) p.a[2] = std::clamp(p.a[2], 1e-6, kPi - 1e-6);
  return p;
}

bool ParamRanges::contains(const PsfParams& params) const {
  if (static_cast<int>(params.a.size()) != param_count(params.model)) return false;
  for (std::size_t i = 0; i < params.a.size(); ++i) {
    const auto& r = range(params.model, static_cast<int>(i));
    if (params.a[i] < r.lo || params.a[i] > r.hi) return false;
  }
  return true;
}

PupilGrid PupilGrid::make(const PupilConfig& config) {
  if (config.side < 2 || config.side % 2 != 0) fail(ErrorKind::Domain, "pupil side must be even and >= 2");
  if (!(config.aperture_radius > 0.0 && config.aperture_radius <= 1.0))
    fail(ErrorKind::Domain, "aperture radius must lie in (0, 1]");
  if (!(config.wavelength > 0.0)) fail(ErrorKind::Domain, "wavelength must be positive");
  return PupilGrid{config.side, config.aperture_radius, config.wavelength, Image(config.side, config.side)};
}

bool PupilGrid::inside(int x, int y) const noexcept {
  const double dx = x - side / 2;
  const double dy = y - side / 2;
  const double r = radius_samples();
  return dx * dx + dy * dy <= r * r;
}

Psf Psf::delta(int side) {
  if (side < 1 || side % 2 == 0) fail(ErrorKind::Size, "kernel side must be odd");
  Psf p{Image(side, side), 1.0};
  p.kernel(side / 2, side / 2) = 1.0;
  return p;
}

PupilGrid zernike_phase(const PsfParams& params, PupilGrid grid) {
  if (!is_zernike(params.model)) fail(ErrorKind::ModelMismatch, "zernike_phase requires a Zernike model");
  params.validate();
  const int n = param_count(params.model);
  const double defocus = params.a[0];
  const double cylinder = n >= 2 ? params.a[1] : 0.0;
  const double axis = n >= 3 ? params.a[2] : 0.0;
  const double c2 = std::cos(2.0 * axis);
  const double s2 = std::sin(2.0 * axis);
  const double r = grid.radius_samples();
  const double r2 = r * r;
  const int c = grid.side / 2;
  for (int y = 0; y < grid.side; ++y) {
    for (int x = 0; x < grid.side; ++x) {
      if (!grid.inside(x, y)) {
        grid.phase(x, y) = 0.0;
        continue;
      }
      const double dx = x - c;
      const double dy = y - c;
      const double rho2 = (dx * dx + dy * dy) / r2;
      // rho^2 cos(2 (theta - axis)) expanded in Cartesian form.
      const double astig = ((dx * dx - dy * dy) * c2 + 2.0 * dx * dy * s2) / r2;
      grid.phase(x, y) = defocus * kSqrt3 * (2.0 * rho2 - 1.0) + cylinder * kSqrt6 * astig;
    }
  }
  return grid;
}

Psf psf_from_pupil(const PupilGrid& grid, int kernel_side) {
  if (kernel_side < 1 || kernel_side % 2 == 0) fail(ErrorKind::Size, "kernel side must be odd");
  if (kernel_side > grid.side / 2) fail(ErrorKind::Size, "kernel side exceeds half the pupil grid");
  const int n = grid.side;
  std::vector<std::complex<double>> pupil(static_cast<std::size_t>(n) * n);
  std::size_t open = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (grid.inside(x, y)) {
        pupil[static_cast<std::size_t>(y) * n + x] = std::polar(1.0, grid.phase(x, y) / grid.wavelength);
        ++open;
      }
  if (open == 0) fail(ErrorKind::DegeneratePupil, "aperture contains no samples");

  const auto field = fft::forward_complex(std::move(pupil), n, n);
  double total = 0.0;
  for (const auto& v : field) total += std::norm(v);
  if (!(total > 0.0)) fail(ErrorKind::DegeneratePupil, "pupil transform has no energy");

  // Zero frequency sits at index 0; the crop re-centers it at the kernel center.
  Psf psf{Image(kernel_side, kernel_side), 0.0};
  const int half = kernel_side / 2;
  double kept = 0.0;
  for (int ky = 0; ky < kernel_side; ++ky) {
    const int fy = ((ky - half) % n + n) % n;
    for (int kx = 0; kx < kernel_side; ++kx) {
      const int fx = ((kx - half) % n + n) % n;
      const double v = std::norm(field[static_cast<std::size_t>(fy) * n + fx]);
      psf.kernel(kx, ky) = v;
      kept += v;
    }
  }
  psf.kernel *= 1.0 / kept;
  psf.captured_energy = kept / total;
  return psf;
}

Image gaussian_density(double var_x, double var_y, int kernel_side) {
  if (!(var_x > 0.0) || !(var_y > 0.0)) fail(ErrorKind::Domain, "Gaussian variances must be positive");
  if (kernel_side < 1 || kernel_side % 2 == 0) fail(ErrorKind::Size, "kernel side must be odd");
  const int half = kernel_side / 2;
  std::vector<double> gx(kernel_side), gy(kernel_side);
  for (int i = 0; i < kernel_side; ++i) {
    const double d = i - half;
    gx[i] = std::exp(-0.5 * d * d / var_x) / std::sqrt(2.0 * kPi * var_x);
    gy[i] = std::exp(-0.5 * d * d / var_y) / std::sqrt(2.0 * kPi * var_y);
  }
  Image k(kernel_side, kernel_side);
  for (int y = 0; y < kernel_side; ++y)
    for (int x = 0; x < kernel_side; ++x) k(x, y) = gx[x] * gy[y];
  return k;
}

Psf gaussian_psf(const PsfParams& params, int kernel_side) {
  if (is_zernike(params.model)) fail(ErrorKind::ModelMismatch, "gaussian_psf requires a Gaussian model");
  params.validate();
  const double vx = params.a[0];
  const double vy = params.model == PsfModel::Gaussian2 ? params.a[1] : params.a[0];
  Psf psf{gaussian_density(vx, vy, kernel_side), 1.0};
  psf.kernel *= 1.0 / psf.kernel.sum();
  return psf;
}

Psf render_psf(const PsfParams& params, int kernel_side, const PupilConfig& pupil) {
  if (params.invalid()) fail(ErrorKind::InvalidSample, "cannot render a PSF for an invalid (a0 = 1) sample");
  if (!is_zernike(params.model)) return gaussian_psf(params, kernel_side);
  return psf_from_pupil(zernike_phase(params, PupilGrid::make(pupil)), kernel_side);
}

double second_moment(const Image& kernel) {
  const double cx = (kernel.width() - 1) / 2.0;
  const double cy = (kernel.height() - 1) / 2.0;
  double m = 0.0;
  for (int y = 0; y < kernel.height(); ++y)
    for (int x = 0; x < kernel.width(); ++x)
      m += ((x - cx) * (x - cx) + (y - cy) * (y - cy)) * kernel(x, y);
  return m;
}

void write_psf1(const std::filesystem::path& path, const Psf& psf) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os.write("PSF1", 4);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(psf.side()));
  for (double v : psf.kernel.pixels()) detail::write_le<float>(os, static_cast<float>(v));
  if (!os) fail(ErrorKind::Io, "failed writing " + path.string());
}

Psf read_psf1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  std::uint32_t side = 0;
  if (!is.read(magic, 4) || std::string(magic, 4) != "PSF1" || !detail::read_le(is, side))
    fail(ErrorKind::Io, path.string() + " is not a PSF1 file");
  if (side == 0 || side > 1u << 14) fail(ErrorKind::Io, path.string() + ": implausible kernel side");
  Psf psf{Image(static_cast<int>(side), static_cast<int>(side)), 1.0};
  for (double& v : psf.kernel.pixels()) {
    float f = 0;
    if (!detail::read_le(is, f)) fail(ErrorKind::Io, path.string() + ": truncated kernel data");
    v = f;
  }
  return psf;
}

void write_psf_png(const std::filesystem::path& path, const Psf& psf) {
  write_png16_scaled(path, psf.kernel, 0.0, psf.kernel.max());
}

}  // namespace svpsf
