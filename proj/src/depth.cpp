#include "svpsf/depth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json_convert.hpp"
#include "svpsf/deconv.hpp"
#include "svpsf/degrade.hpp"
#include "svpsf/error.hpp"
#include "svpsf/png_io.hpp"

namespace svpsf {
namespace {

std::filesystem::path sidecar(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  return p.replace_extension(".json");
}

// Smoothed uniform noise in [0, 1].
Image plane_texture(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image noise(size, size);
  for (double& v : noise.pixels()) v = u(rng);
  Image t = convolve(noise, gaussian_psf({PsfModel::Gaussian1, {1.0}, 0.0}, 7));
  const double lo = t.min(), hi = t.max();
  for (double& v : t.pixels()) v = (v - lo) / (hi - lo);
  return t;
}

}  // namespace

DepthMap depth_from_params(const ParamMap& map) {
  if (map.model != PsfModel::Zernike3) fail(ErrorKind::ModelMismatch, "depth needs a Z-3 parameter map");
  DepthMap d;
  d.grid_w = map.grid_w;
  d.grid_h = map.grid_h;
  d.z.reserve(map.cells.size());
  for (const auto& c : map.cells) d.z.push_back(c.a[0] * (2.0 * c.a[2] / std::numbers::pi - 1.0));
  return d;
}

void TiltedPlaneSpec::validate() const {
  if (!(tilt_deg > 0.0 && tilt_deg < 45.0)) fail(ErrorKind::Config, "tilt must lie in (0, 45) degrees");
  if (!(field_um > 0.0)) fail(ErrorKind::Config, "field size must be positive");
  if (patch < 1 || stride < 1 || stride > patch || image_size < patch)
    fail(ErrorKind::Config, "invalid scene patch layout");
  if (kernel_side < 1 || kernel_side % 2 == 0) fail(ErrorKind::Config, "kernel side must be odd");
  if (!(defocus_per_um >= 0.0) || !(cylinder >= 0.0)) fail(ErrorKind::Config, "PSF scales must be nonnegative");
  if (!(axis_epsilon > 0.0 && axis_epsilon < std::numbers::pi / 2)) fail(ErrorKind::Config, "axis epsilon out of range");
}

double TiltedPlaneSpec::depth_range_um() const {
  const double s = std::sin(tilt_deg * std::numbers::pi / 180.0) * field_um;
  return axis == TiltAxis::Diagonal ? std::numbers::sqrt2 * s : s;
}

double TiltedPlaneSpec::depth_at(double x, double y) const {
  const double n = image_size - 1;
  const double t = axis == TiltAxis::Diagonal ? (x + y) / (2.0 * n) : y / n;
  return (t - 0.5) * depth_range_um();
}

AstigmaticScene simulate_astigmatic_scene(const TiltedPlaneSpec& spec, const PupilConfig& pupil) {
  spec.validate();
  AstigmaticScene scene;
  scene.sharp = plane_texture(spec.image_size, spec.seed);
  const MapConfig cfg{spec.patch, spec.patch, spec.stride, 0.5};
  scene.params = make_param_map(spec.image_size, spec.image_size, PsfModel::Zernike3, cfg);
  scene.depth.grid_w = scene.params.grid_w;
  scene.depth.grid_h = scene.params.grid_h;
  scene.depth.units = DepthUnits::Micrometers;
  scene.depth.z.assign(scene.params.cells.size(), 0.0);
  for (int row = 0; row < scene.params.grid_h; ++row)
    for (int col = 0; col < scene.params.grid_w; ++col) {
      const double z = spec.depth_at(scene.params.anchor_x(col) + spec.patch / 2, scene.params.anchor_y(row) + spec.patch / 2);
      const double axis = z > 0.0 ? std::numbers::pi - spec.axis_epsilon : spec.axis_epsilon;
      scene.params.at(col, row) = {PsfModel::Zernike3, {spec.defocus_per_um * std::abs(z), spec.cylinder, axis}, 0.0};
      scene.depth.at(col, row) = z;
    }
  const auto bank = psfs_from_map(scene.params, spec.kernel_side, pupil);
  scene.blurred = sv_convolve(scene.sharp, bank, build_masks(spec.image_size, spec.image_size, scene.params));
  return scene;
}

ParamLattice depth_lattice(double defocus_max, double defocus_step, double cylinder, double axis_epsilon) {
  if (!(defocus_step > 0.0) || !(defocus_max >= 0.0)) fail(ErrorKind::Config, "invalid defocus lattice");
  ParamLattice lattice{PsfModel::Zernike3, {{}, {cylinder}, {axis_epsilon, std::numbers::pi - axis_epsilon}}};
  const int n = static_cast<int>(std::floor(defocus_max / defocus_step + 1e-9));
  for (int i = 0; i <= n; ++i) lattice.axes[0].push_back(i * defocus_step);
  return lattice;
}

ParamMap oracle_param_map(const Image& blurred, const Image& sharp, const GridSearchOracle& oracle, PsfModel model,
                          const MapConfig& config, int kernel_side) {
  if (blurred.width() != sharp.width() || blurred.height() != sharp.height())
    fail(ErrorKind::DimensionMismatch, "sharp reference and blurred image differ in size");
  const int r = kernel_side / 2;
  const Image padded = pad(sharp, r, r, Boundary::Reflect);
  return map_params(blurred, model, config, [&](const Image& patch, int col, int row) {
    const Image window = padded.crop(col * config.stride, row * config.stride, config.patch_w + 2 * r, config.patch_h + 2 * r);
    return oracle.estimate(patch, window);
  });
}

DepthCalibrationReport calibrate_depth(const DepthMap& est, const DepthMap& gt) {
  if (est.grid_w != gt.grid_w || est.grid_h != gt.grid_h || est.z.size() != gt.z.size())
    fail(ErrorKind::DimensionMismatch, "depth maps differ in size");
  const std::size_t n = gt.z.size();
  if (n < 2) fail(ErrorKind::DegenerateInput, "calibration needs at least two cells");
  double me = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    me += est.z[i];
    mg += gt.z[i];
  }
  me /= n;
  mg /= n;
  double see = 0.0, seg = 0.0, sgg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    see += (est.z[i] - me) * (est.z[i] - me);
    seg += (est.z[i] - me) * (gt.z[i] - mg);
    sgg += (gt.z[i] - mg) * (gt.z[i] - mg);
  }
  if (!(sgg > 0.0)) fail(ErrorKind::DegenerateInput, "ground-truth depth is constant");
  DepthCalibrationReport r;
  r.alpha = see > 0.0 ? seg / see : 0.0;
  r.beta = mg - r.alpha * me;
  double ss_res = 0.0, abs_sum = 0.0;
  double lo = gt.z.front(), hi = gt.z.front();
  for (std::size_t i = 0; i < n; ++i) {
    const double e = r.alpha * est.z[i] + r.beta - gt.z[i];
    ss_res += e * e;
    abs_sum += std::abs(e);
    lo = std::min(lo, gt.z[i]);
    hi = std::max(hi, gt.z[i]);
  }
  r.r2 = 1.0 - ss_res / sgg;
  r.abs_err_um = abs_sum / n;
  r.rel_err_pct = 100.0 * r.abs_err_um / (hi - lo);
  return r;
}

DepthMap apply_calibration(const DepthMap& est, const DepthCalibration& calibration) {
  DepthMap out = est;
  for (double& v : out.z) v = calibration.alpha * v + calibration.beta;
  out.units = DepthUnits::Micrometers;
  out.calibration = calibration;
  return out;
}

void write_depth_csv(const std::filesystem::path& path, const DepthMap& depth) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  char buf[64];
  for (int row = 0; row < depth.grid_h; ++row) {
    for (int col = 0; col < depth.grid_w; ++col) {
      std::snprintf(buf, sizeof(buf), "%s%.17g", col ? "," : "", depth.at(col, row));
      os << buf;
    }
    os << "\n";
  }
  if (!os) fail(ErrorKind::Io, "failed writing " + path.string());
  json header = {{"format", "svpsf-depth-map"},
                 {"version", 1},
                 {"grid_w", depth.grid_w},
                 {"grid_h", depth.grid_h},
                 {"units", depth.units == DepthUnits::Micrometers ? "micrometers" : "model_units"}};
  if (depth.calibration) header["calibration"] = {{"alpha", depth.calibration->alpha}, {"beta", depth.calibration->beta}};
  std::ofstream hs(sidecar(path));
  if (!(hs << header.dump(2) << "\n")) fail(ErrorKind::Io, "cannot write " + sidecar(path).string());
}

DepthMap read_depth_csv(const std::filesystem::path& path) {
  DepthMap d;
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    int cols = 0;
    while (std::getline(ss, field, ',')) {
      d.z.push_back(std::stod(field));
      ++cols;
    }
    if (d.grid_h == 0) d.grid_w = cols;
    if (cols != d.grid_w) fail(ErrorKind::Io, "ragged depth CSV");
    ++d.grid_h;
  }
  std::ifstream hs(sidecar(path));
  if (hs) {
    try {
      const json header = json::parse(hs);
      if (header.at("grid_w").get<int>() != d.grid_w || header.at("grid_h").get<int>() != d.grid_h)
        fail(ErrorKind::Io, "depth sidecar does not match the CSV grid");
      d.units = header.at("units").get<std::string>() == "micrometers" ? DepthUnits::Micrometers : DepthUnits::ModelUnits;
      if (header.contains("calibration"))
        d.calibration = DepthCalibration{header["calibration"].at("alpha").get<double>(),
                                         header["calibration"].at("beta").get<double>()};
    } catch (const json::exception& e) {
      fail(ErrorKind::Io, std::string("malformed depth sidecar: ") + e.what());
    }
  }
  return d;
}

void write_depth_png(const std::filesystem::path& path, const DepthMap& depth, int cell_px) {
  if (depth.z.empty() || cell_px < 1) fail(ErrorKind::Size, "empty depth map");
  Image img(depth.grid_w * cell_px, depth.grid_h * cell_px);
  double lo = depth.z.front(), hi = depth.z.front();
  for (double v : depth.z) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img(x, y) = depth.at(x / cell_px, y / cell_px);
  write_png_colormap(path, img, lo, hi > lo ? hi : lo + 1.0);
}

void write_calibration_json(const std::filesystem::path& path, const DepthCalibrationReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const json j = {{"alpha", report.alpha},
                  {"beta", report.beta},
                  {"r2", report.r2},
                  {"abs_err_um", report.abs_err_um},
                  {"rel_err_pct", report.rel_err_pct}};
  std::ofstream os(path);
  if (!(os << j.dump(2) << "\n")) fail(ErrorKind::Io, "cannot write " + path.string());
}

}  // namespace svpsf
