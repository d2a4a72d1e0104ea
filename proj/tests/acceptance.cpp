#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "svpsf/dataset.hpp"
#include "svpsf/deconv.hpp"
#include "svpsf/degrade.hpp"
#include "svpsf/depth.hpp"
#include "svpsf/error.hpp"
#include "svpsf/estimator.hpp"
#include "svpsf/psf_map.hpp"

using namespace svpsf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path g_work;

fs::path model_path() { return g_work / "g1_regressor.svnn"; }

Outcome overlap_add_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    Image x(64, 64);
    for (double& v : x.pixels()) v = u(rng);
    const Psf psf = render_psf({PsfModel::Zernike3, {3.0 * u(rng), 1.5 * u(rng), 0.2 + 2.7 * u(rng)}, 0.0}, 15);
    const std::vector<Psf> bank(9, psf);
    const MaskSet masks = build_masks(64, 64, 3, 3, 32, 32, 16);
    const Image ref = convolve(x, psf);
    worst = std::max(worst, max_abs_diff(sv_convolve(x, bank, masks), ref) / std::max(ref.max(), -ref.min()));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-6 && t < 5.0, fmt("max relative error %.3g, %.2f s", worst, t)};
}

Outcome partition_of_unity() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int w = std::uniform_int_distribution<int>(16, 300)(rng);
    const int h = std::uniform_int_distribution<int>(16, 300)(rng);
    const int patch = std::uniform_int_distribution<int>(4, std::min(w, h))(rng);
    const int stride = std::uniform_int_distribution<int>(1, patch)(rng);
    const MaskSet m = build_masks(w, h, grid_count(w, patch, stride), grid_count(h, patch, stride), patch, patch,
                                  stride);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) s += m.weight(k, x, y);
        worst = std::max(worst, std::abs(s - 1.0));
      }
  }
  return {worst <= 1e-9, fmt("max |sum - 1| %.3g over 20 layouts", worst)};
}

Outcome noise_statistics() {
  const Image noisy = add_noise(Image(1000, 1000, 50.0), {1.0, 3.0, 303});
  const double mean = noisy.mean();
  const double var = noisy.variance();
  return {std::abs(mean - 50.0) <= 0.03 && std::abs(var - 59.0) <= 0.5, fmt("mean %.4f variance %.4f", mean, var)};
}

Outcome gradient_check() {
  const double worst = test::gradient_check_worst(404);
  return {worst <= 1e-4, fmt("worst relative error %.3g", worst)};
}

DatasetConfig g1_dataset(int count, std::uint64_t seed) {
  DatasetConfig c;
  c.sources = {SourceTag::Poi, SourceTag::Syn};
  c.model = PsfModel::Gaussian1;
  c.count = count;
  c.seed = seed;
  return c;
}

Outcome regression() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainingSet train_set = generate_dataset(g1_dataset(20000, 11));
  const TrainingSet valid_set = generate_dataset(g1_dataset(2000, 12));
  const TrainingSet test_set = generate_dataset(g1_dataset(2000, 13));
  std::printf("  datasets ready in %.0f s\n", seconds_since(t0));
  TrainConfig tc;
  tc.learning_rate = 0.003;
  tc.epochs = 8;
  const std::vector<TrainConfig> grid{tc};
  const TrainResult r = train(train_set, valid_set, grid, {}, [](const EpochLog& l) {
    std::printf("  epoch %d train %.5f valid %.5f (%.0f s)\n", l.epoch, l.train_loss, l.val_loss, l.seconds);
    std::fflush(stdout);
  });
  save_model(model_path(), r.model);
  const EvalReport rep = evaluate(r.model, test_set);
  const double t = seconds_since(t0);
  return {rep.r2_mean >= 0.8 && t <= 1800.0,
          fmt("test R2 %.4f on %d valid of %d, %.0f s", rep.r2_mean, rep.n_valid, rep.n_total, t)};
}

// Four-quadrant scenes: one PSF per 128x128 quadrant, blended by the overlap-add tents.
struct Scene {
  Image truth;
  Image blurred;
  std::vector<Psf> bank;
  MaskSet masks;
};

constexpr double kPeak = 1000.0;

Scene make_scene(int index, PsfModel degradation) {
  std::mt19937_64 rng(5000 + index);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene s;
  s.truth = synth_cells(40, 256, 100 + index);
  s.truth *= kPeak;
  ParamMap quad = make_param_map(256, 256, degradation, {128, 128, 128, 0.5});
  for (auto& c : quad.cells)
    c.a = {degradation == PsfModel::Gaussian1 ? 0.5 + 15.5 * u(rng) : 2.0 * u(rng)};
  s.bank = psfs_from_map(quad, 63);
  s.masks = build_masks(256, 256, quad);
  s.blurred = add_noise(sv_convolve(s.truth, s.bank, s.masks), {1.0, 0.02 * kPeak, 7000ull + index});
  for (double& v : s.blurred.pixels()) v = std::max(v, 0.0);
  return s;
}

ParamMap cnn_map(const Image& image, const RegressorModel& model) {
  const ParamMap raw = map_params(image, model, {64, 64, 32, 0.5});
  try {
    return infill_invalid(raw);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Infill) throw;
    ParamMap uniform = raw;
    for (auto& c : uniform.cells) c = {raw.model, {4.0}, 0.0};
    return uniform;
  }
}

Outcome deconvolution_gain(PsfModel degradation, double tolerance) {
  if (!fs::exists(model_path())) return {false, "no trained regressor at " + model_path().string()};
  const auto t0 = std::chrono::steady_clock::now();
  const RegressorModel model = load_model(model_path());
  DeconvConfig cfg;
  cfg.lambda_tv = 0.01;
  double gain_gt = 0.0, gain_cnn = 0.0, ssim_gt = 0.0, ssim_cnn = 0.0;
  const int scenes = 20;
  for (int i = 0; i < scenes; ++i) {
    const Scene s = make_scene(i, degradation);
    const double base = snr(s.truth, s.blurred);
    const double base_ssim = ssim(s.truth, s.blurred);
    const Image x_gt = tv_rl_deconvolve(s.blurred, s.bank, s.masks, cfg);
    const ParamMap est = cnn_map(s.blurred, model);
    const Image x_cnn = tv_rl_deconvolve(s.blurred, psfs_from_map(est, 63), build_masks(256, 256, est), cfg);
    const double dg = snr(s.truth, x_gt) - base;
    const double dc = snr(s.truth, x_cnn) - base;
    gain_gt += dg / scenes;
    gain_cnn += dc / scenes;
    ssim_gt += (ssim(s.truth, x_gt) - base_ssim) / scenes;
    ssim_cnn += (ssim(s.truth, x_cnn) - base_ssim) / scenes;
    std::printf("  scene %2d  dSNR gt %+.2f dB  cnn %+.2f dB\n", i, dg, dc);
    std::fflush(stdout);
  }
  const double t = seconds_since(t0);
  const bool pass = gain_gt >= 1.5 && std::abs(gain_cnn - gain_gt) <= tolerance && t <= 600.0;
  return {pass, fmt("mean dSNR gt %+.2f dB, cnn %+.2f dB (gap %.2f, limit %.1f); dSSIM gt %+.3f cnn %+.3f; %.0f s",
                    gain_gt, gain_cnn, std::abs(gain_cnn - gain_gt), tolerance, ssim_gt, ssim_cnn, t)};
}

Outcome depth_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  TiltedPlaneSpec spec;
  spec.tilt_deg = 3.0;
  const AstigmaticScene scene = simulate_astigmatic_scene(spec);
  const double max_defocus = spec.defocus_per_um * spec.depth_range_um() / 2.0 + 0.2;
  const GridSearchOracle oracle(depth_lattice(max_defocus, 0.1, spec.cylinder, spec.axis_epsilon), spec.kernel_side);
  const ParamMap est = oracle_param_map(scene.blurred, scene.sharp, oracle, PsfModel::Zernike3,
                                        {spec.patch, spec.patch, spec.stride, 0.5}, spec.kernel_side);
  const DepthCalibrationReport rep = calibrate_depth(depth_from_params(est), scene.depth);
  const double t = seconds_since(t0);
  return {rep.r2 >= 0.96 && rep.rel_err_pct <= 5.0 && t <= 300.0,
          fmt("R2 %.4f, mean abs error %.3f um, relative %.2f %%, %.0f s", rep.r2, rep.abs_err_um, rep.rel_err_pct, t)};
}

Outcome illumination_invariance() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (PsfModel m : {PsfModel::Gaussian1, PsfModel::Zernike3}) {
    RegressorModel model(m, {});
    model.network().init(rng());
    for (int i = 0; i < 10; ++i) {
      const Image patch = i % 2 ? synth_cells(6, 64, rng()) : synth_points(20, 64, rng());
      Image moved = patch;
      moved *= 0.01 + 100.0 * u(rng);
      moved += 200.0 * (u(rng) - 0.5);
      const auto a = model.forward(patch);
      const auto b = model.forward(moved);
      for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    }
  }
  return {worst <= 1e-5, fmt("max output change %.3g", worst)};
}

Outcome rl_fixed_points() {
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Image y(96, 80);
  for (double& v : y.pixels()) v = u(rng);
  const MaskSet masks = build_masks(96, 80, 3, 2, 48, 48, 24);
  DeconvConfig cfg;
  cfg.lambda_tv = 0.0;
  const double d_delta = max_abs_diff(tv_rl_deconvolve(y, std::vector<Psf>(6, Psf::delta(15)), masks, cfg), y);
  const std::vector<Psf> bank(6, render_psf({PsfModel::Zernike3, {1.5, 0.8, 0.7}, 0.0}, 31));
  const Image flat(96, 80, 0.7);
  const double d_flat = max_abs_diff(tv_rl_deconvolve(flat, bank, masks, cfg), flat) / 0.7;
  return {d_delta <= 1e-7 && d_flat <= 1e-5, fmt("delta bank %.3g, constant image %.3g (relative)", d_delta, d_flat)};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list{
      {"overlap-add equivalence", overlap_add_equivalence},
      {"mask partition of unity", partition_of_unity},
      {"noise statistics", noise_statistics},
      {"gradient correctness", gradient_check},
      {"regression R2", regression},
      {"deconvolution gain, G-1 degradation", [] { return deconvolution_gain(PsfModel::Gaussian1, 0.7); }},
      {"deconvolution gain, Z-1 degradation", [] { return deconvolution_gain(PsfModel::Zernike1, 1.0); }},
      {"depth recovery", depth_recovery},
      {"illumination invariance", illumination_invariance},
      {"RL fixed points", rl_fixed_points},
  };
  return list;
}

bool run(int n) {
  const auto& [name, fn] = criteria()[n - 1];
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  g_work = fs::temp_directory_path() / "svpsf_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc)
      only = std::atoi(argv[++i]);
    else if (arg == "--work" && i + 1 < argc)
      g_work = argv[++i];
    else {
      std::fprintf(stderr, "usage: %s [--criterion N] [--work DIR]\n", argv[0]);
      return 2;
    }
  }
  const int count = static_cast<int>(criteria().size());
  if (only < 0 || only > count) {
    std::fprintf(stderr, "criterion must be in 1..%d\n", count);
    return 2;
  }
  fs::create_directories(g_work);
  bool ok = true;
  for (int n = 1; n <= count; ++n)
    if (only == 0 || only == n) ok = run(n) && ok;
  return ok ? 0 : 1;
}
