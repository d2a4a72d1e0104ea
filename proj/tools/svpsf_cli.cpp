#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "svpsf/config.hpp"
#include "svpsf/dataset.hpp"
#include "svpsf/deconv.hpp"
#include "svpsf/depth.hpp"
#include "svpsf/error.hpp"
#include "svpsf/estimator.hpp"
#include "svpsf/png_io.hpp"
#include "svpsf/psf.hpp"
#include "svpsf/psf_map.hpp"

namespace fs = std::filesystem;
using namespace svpsf;

namespace {

struct Common {
  std::string config_path;
  int threads = 1;
  bool deterministic = false;
  std::vector<std::string> args;

  PipelineConfig load() const { return config_path.empty() ? default_config() : load_config(config_path); }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<SourceImage> user_sources(const PipelineConfig& cfg) {
  std::vector<SourceImage> out;
  for (auto tag : cfg.dataset.sources) {
    const fs::path dir = tag == SourceTag::Micr ? cfg.micr_dir : tag == SourceTag::Nat ? cfg.nat_dir : fs::path();
    if (dir.empty()) continue;
    auto imgs = load_image_folder(dir, tag);
    out.insert(out.end(), imgs.begin(), imgs.end());
  }
  return out;
}

// Parameter map from a regressor, infilled; falls back to one uniform PSF when nothing is valid.
ParamMap estimated_map(const Image& image, const RegressorModel& model, const PipelineConfig& cfg) {
  MapConfig mc = cfg.map;
  mc.patch_w = mc.patch_h = model.input_side();
  const ParamMap raw = map_params(image, model, mc);
  try {
    return infill_invalid(raw);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Infill) throw;
    std::cerr << "warning: no textured cell found, using one spatially uniform PSF\n";
    ParamMap uniform = raw;
    std::vector<double> mean(raw.cells.front().a.size(), 0.0);
    for (const auto& c : raw.cells)
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += c.a[k] / raw.cells.size();
    for (auto& c : uniform.cells) c = {raw.model, mean, 0.0};
    return uniform;
  }
}

void print_report(const EvalReport& r) {
  std::printf("samples %d valid %d\n", r.n_total, r.n_valid);
  for (std::size_t k = 0; k < r.r2_per_param.size(); ++k) std::printf("R2 a%zu %.6f\n", k + 1, r.r2_per_param[k]);
  std::printf("R2 mean %.6f\n", r.r2_mean);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially-variant PSF estimation, deconvolution and depth from astigmatism"};
  app.require_subcommand(1);
  Common common;
  for (int i = 0; i < argc; ++i) common.args.emplace_back(argv[i]);
  app.add_option("--config", common.config_path, "INI configuration file");
  app.add_option("--threads", common.threads, "worker thread bound (processing is single-threaded)")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", common.deterministic, "force bit-reproducible paths");

  // print-config
  auto* print_cfg = app.add_subcommand("print-config", "print the effective configuration with defaults");
  print_cfg->callback([&] { std::cout << render_config(common.load()); });

  // synth-psf
  auto* synth = app.add_subcommand("synth-psf", "render a PSF kernel");
  std::string synth_model = "G-1", synth_params, synth_out, synth_png;
  int synth_side = 0;
  bool synth_delta = false;
  synth->add_option("--model", synth_model, "PSF model");
  synth->add_option("--params", synth_params, "comma-separated a1..aN");
  synth->add_option("--kernel-side", synth_side, "odd kernel side (default from config)");
  synth->add_flag("--delta", synth_delta, "identity kernel");
  synth->add_option("--out", synth_out, "PSF1 output file")->required();
  synth->add_option("--png", synth_png, "optional 16-bit PNG preview");
  synth->callback([&] {
    const PipelineConfig cfg = common.load();
    const int side = synth_side > 0 ? synth_side : cfg.dataset.kernel_side;
    Psf psf;
    if (synth_delta) {
      if (side % 2 == 0) fail(ErrorKind::Config, "kernel side must be odd");
      psf = Psf::delta(side);
    } else {
      PsfParams p{parse_psf_model(synth_model), parse_list(synth_params), 0.0};
      psf = render_psf(p, side, cfg.dataset.pupil);
    }
    write_psf1(synth_out, psf);
    if (!synth_png.empty()) write_psf_png(synth_png, psf);
    std::printf("kernel %dx%d captured energy %.6f\n", side, side, psf.captured_energy);
    write_provenance(synth_out, "synth-psf", cfg, common.args);
  });

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "generate a training set");
  std::string gen_out;
  std::optional<int> gen_count;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--count", gen_count, "override dataset.count");
  gen->add_option("--seed", gen_seed, "override dataset.seed");
  gen->callback([&] {
    PipelineConfig cfg = common.load();
    if (gen_count) cfg.dataset.count = *gen_count;
    if (gen_seed) cfg.dataset.seed = *gen_seed;
    cfg.validate();
    const TrainingSet set = generate_dataset(cfg.dataset, user_sources(cfg));
    write_training_set(gen_out, set);
    std::printf("samples %zu manifest checksum %016llx\n", set.samples.size(),
                static_cast<unsigned long long>(manifest_checksum(set)));
    write_provenance(gen_out, "gen-dataset", cfg, common.args);
  });

  // train
  auto* tr = app.add_subcommand("train", "train the regressor");
  std::string tr_train, tr_valid, tr_out, tr_log;
  tr->add_option("--train", tr_train, "training set directory")->required();
  tr->add_option("--valid", tr_valid, "validation set directory")->required();
  tr->add_option("--out", tr_out, "model file")->required();
  tr->add_option("--log", tr_log, "per-epoch loss CSV");
  tr->callback([&] {
    const PipelineConfig cfg = common.load();
    const TrainingSet train_set = read_training_set(tr_train);
    const TrainingSet valid_set = read_training_set(tr_valid);
    if (train_set.config.model != cfg.dataset.model || valid_set.config.model != cfg.dataset.model)
      fail(ErrorKind::Config, "dataset PSF model differs from the configured model");
    if (train_set.config.patch_size != cfg.dataset.patch_size || valid_set.config.patch_size != cfg.dataset.patch_size)
      fail(ErrorKind::Config, "dataset patch size differs from the configured patch size");
    nn::ArchSpec arch;
    arch.input_side = cfg.dataset.patch_size;
    std::ofstream log;
    if (!tr_log.empty()) {
      log.open(tr_log);
      if (!log) fail(ErrorKind::Io, "cannot open " + tr_log);
      log << "candidate,epoch,learning_rate,train_loss,val_loss,seconds\n";
    }
    const TrainResult result = train(train_set, valid_set, cfg.train_grid, arch, [&](const EpochLog& e) {
      std::printf("candidate %d epoch %d lr %g train %.6f val %.6f (%.1fs)\n", e.candidate, e.epoch, e.learning_rate,
                  e.train_loss, e.val_loss, e.seconds);
      std::fflush(stdout);
      if (log.is_open()) log << e.candidate << ',' << e.epoch << ',' << e.learning_rate << ',' << e.train_loss << ','
                   << e.val_loss << ',' << e.seconds << "\n";
    });
    for (int d : result.diverged) std::fprintf(stderr, "candidate %d diverged\n", d);
    save_model(tr_out, result.model);
    std::printf("selected candidate %d epoch %d val %.6f\n", result.best_candidate, result.model.meta().best_epoch,
                result.model.meta().best_val_loss);
    write_provenance(tr_out, "train", cfg, common.args);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "R^2 of a model on a test set");
  std::string ev_test, ev_model;
  ev->add_option("--test", ev_test, "test set directory")->required();
  ev->add_option("--model", ev_model, "model file")->required();
  ev->callback([&] { print_report(evaluate(load_model(ev_model), read_training_set(ev_test))); });

  // estimate-map
  auto* em = app.add_subcommand("estimate-map", "sliding-window PSF parameter map");
  std::string em_image, em_model, em_out, em_montage;
  bool em_no_infill = false;
  em->add_option("--image", em_image, "input PNG")->required();
  em->add_option("--model", em_model, "model file")->required();
  em->add_option("--out", em_out, "map CSV (a JSON sidecar is written beside it)")->required();
  em->add_option("--montage", em_montage, "PSF bank montage PNG");
  em->add_flag("--no-infill", em_no_infill, "keep invalid cells");
  em->callback([&] {
    const PipelineConfig cfg = common.load();
    const RegressorModel model = load_model(em_model);
    const Image image = read_png(em_image);
    MapConfig mc = cfg.map;
    mc.patch_w = mc.patch_h = model.input_side();
    const ParamMap raw = map_params(image, model, mc);
    const ParamMap map = em_no_infill ? raw : infill_invalid(raw);
    write_param_map(em_out, map);
    if (!em_montage.empty()) {
      const auto bank = psfs_from_map(map, cfg.deconv_kernel_side, cfg.dataset.pupil);
      write_psf_montage(em_montage, bank, map.grid_w, map.grid_h);
    }
    std::printf("grid %dx%d invalid cells %d\n", map.grid_w, map.grid_h, raw.invalid_count());
    write_provenance(em_out, "estimate-map", cfg, common.args);
  });

  // deconvolve
  auto* dc = app.add_subcommand("deconvolve", "spatially-variant TV Richardson-Lucy");
  std::string dc_image, dc_map, dc_model, dc_psf, dc_out, dc_ref, dc_log, dc_dump;
  std::optional<double> dc_lambda;
  std::optional<int> dc_iters, dc_side;
  bool dc_clamp = true;
  int dc_every = 0;
  dc->add_option("--image", dc_image, "blurred PNG")->required();
  auto* src_map = dc->add_option("--map", dc_map, "parameter map CSV");
  auto* src_model = dc->add_option("--model", dc_model, "estimate the map with this model");
  auto* src_psf = dc->add_option("--psf", dc_psf, "single PSF1 kernel applied everywhere");
  src_map->excludes(src_model)->excludes(src_psf);
  src_model->excludes(src_psf);
  dc->add_option("--out", dc_out, "output 16-bit PNG")->required();
  dc->add_option("--lambda-tv", dc_lambda, "TV weight");
  dc->add_option("--iterations", dc_iters, "RL iterations");
  dc->add_option("--kernel-side", dc_side, "kernel side of the rendered bank");
  dc->add_flag("--clamp,!--no-clamp", dc_clamp, "clamp negatives after each iteration");
  dc->add_option("--reference", dc_ref, "sharp reference PNG for per-iteration SNR");
  dc->add_option("--log", dc_log, "per-iteration SNR CSV (needs --reference)");
  dc->add_option("--dump-every", dc_every, "dump the estimate every k iterations");
  dc->add_option("--dump-dir", dc_dump, "directory for dumped iterates");
  dc->callback([&] {
    PipelineConfig cfg = common.load();
    if (dc_lambda) cfg.deconv.lambda_tv = *dc_lambda;
    if (dc_iters) cfg.deconv.iterations = *dc_iters;
    if (dc_side) cfg.deconv_kernel_side = *dc_side;
    cfg.deconv.nonneg_clamp = dc_clamp;
    cfg.validate();
    Image y = read_png(dc_image);
    std::vector<Psf> bank;
    MaskSet masks;
    if (!dc_psf.empty()) {
      bank.push_back(read_psf1(dc_psf));
      masks = build_masks(y.width(), y.height(), 1, 1, y.width(), y.height(), 1);
    } else {
      ParamMap map;
      if (!dc_map.empty())
        map = infill_invalid(read_param_map(dc_map));
      else if (!dc_model.empty())
        map = estimated_map(y, load_model(dc_model), cfg);
      else
        fail(ErrorKind::Config, "one of --map, --model or --psf is required");
      if (map.image_w != y.width() || map.image_h != y.height())
        fail(ErrorKind::Config, "parameter map was built for a different image size");
      bank = psfs_from_map(map, cfg.deconv_kernel_side, cfg.dataset.pupil);
      masks = build_masks(y.width(), y.height(), map);
    }
    for (double& v : y.pixels()) v = std::max(v, 0.0);
    std::optional<Image> ref;
    if (!dc_ref.empty()) ref = read_png(dc_ref);
    std::ofstream log;
    if (!dc_log.empty()) {
      if (!ref) fail(ErrorKind::Config, "--log needs --reference");
      log.open(dc_log);
      if (!log) fail(ErrorKind::Io, "cannot open " + dc_log);
      log << "iteration,snr_db\n0," << snr(*ref, y) << "\n";
    }
    const Image x = tv_rl_deconvolve(y, bank, masks, cfg.deconv, [&](int it, const Image& est) {
      if (log.is_open()) log << it << ',' << snr(*ref, est) << "\n";
      if (dc_every > 0 && it % dc_every == 0 && !dc_dump.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "iter_%04d.png", it);
        write_png16(fs::path(dc_dump) / name, est);
      }
    });
    write_png16(dc_out, x);
    if (ref) std::printf("SNR input %.3f dB output %.3f dB\n", snr(*ref, y), snr(*ref, x));
    write_provenance(dc_out, "deconvolve", cfg, common.args);
  });

  // depth
  auto* dp = app.add_subcommand("depth", "depth map from an astigmatic image");
  std::string dp_image, dp_model, dp_sharp, dp_out, dp_png, dp_gt, dp_cal;
  double dp_defocus_max = 3.0, dp_step = 0.1, dp_cyl = 1.0, dp_eps = 0.05;
  int dp_side = 31, dp_patch = 32, dp_stride = 16;
  dp->add_option("--image", dp_image, "astigmatic PNG")->required();
  auto* dp_m = dp->add_option("--model", dp_model, "Z-3 regressor");
  auto* dp_s = dp->add_option("--sharp", dp_sharp, "sharp reference for grid-search estimation");
  dp_m->excludes(dp_s);
  dp->add_option("--out", dp_out, "depth CSV")->required();
  dp->add_option("--png", dp_png, "color-mapped depth PNG");
  dp->add_option("--gt", dp_gt, "ground-truth depth CSV for calibration");
  dp->add_option("--calibration", dp_cal, "calibration report JSON");
  dp->add_option("--defocus-max", dp_defocus_max, "grid search: largest defocus");
  dp->add_option("--defocus-step", dp_step, "grid search: defocus step");
  dp->add_option("--cylinder", dp_cyl, "grid search: cylinder");
  dp->add_option("--axis-epsilon", dp_eps, "grid search: axis code offset");
  dp->add_option("--kernel-side", dp_side, "grid search: kernel side");
  dp->add_option("--patch", dp_patch, "grid search: window side");
  dp->add_option("--stride", dp_stride, "grid search: window stride");
  dp->callback([&] {
    const PipelineConfig cfg = common.load();
    const Image image = read_png(dp_image);
    ParamMap map;
    if (!dp_sharp.empty()) {
      const GridSearchOracle oracle(depth_lattice(dp_defocus_max, dp_step, dp_cyl, dp_eps), dp_side, cfg.dataset.pupil);
      map = oracle_param_map(image, read_png(dp_sharp), oracle, PsfModel::Zernike3,
                             MapConfig{dp_patch, dp_patch, dp_stride, 0.5}, dp_side);
    } else if (!dp_model.empty()) {
      map = estimated_map(image, load_model(dp_model), cfg);
    } else {
      fail(ErrorKind::Config, "one of --model or --sharp is required");
    }
    DepthMap depth = depth_from_params(map);
    if (!dp_gt.empty()) {
      const DepthCalibrationReport r = calibrate_depth(depth, read_depth_csv(dp_gt));
      depth = apply_calibration(depth, {r.alpha, r.beta});
      std::printf("alpha %.6f beta %.6f R2 %.6f abs %.4f um rel %.3f%%\n", r.alpha, r.beta, r.r2, r.abs_err_um,
                  r.rel_err_pct);
      if (!dp_cal.empty()) write_calibration_json(dp_cal, r);
    }
    write_depth_csv(dp_out, depth);
    if (!dp_png.empty()) write_depth_png(dp_png, depth);
    write_provenance(dp_out, "depth", cfg, common.args);
  });

  // simulate-depth
  auto* sd = app.add_subcommand("simulate-depth", "render a tilted astigmatic test scene");
  TiltedPlaneSpec spec;
  std::string sd_out;
  bool sd_diag = false;
  sd->add_option("--tilt", spec.tilt_deg, "tilt in degrees");
  sd->add_option("--field-um", spec.field_um, "field side in micrometers");
  sd->add_flag("--diagonal", sd_diag, "tilt across the image diagonal");
  sd->add_option("--seed", spec.seed, "texture seed");
  sd->add_option("--defocus-per-um", spec.defocus_per_um, "defocus per micrometer");
  sd->add_option("--cylinder", spec.cylinder, "cylinder");
  sd->add_option("--out-dir", sd_out, "output directory")->required();
  sd->callback([&] {
    const PipelineConfig cfg = common.load();
    spec.axis = sd_diag ? TiltAxis::Diagonal : TiltAxis::Rows;
    const AstigmaticScene scene = simulate_astigmatic_scene(spec, cfg.dataset.pupil);
    fs::create_directories(sd_out);
    // 16-bit levels with the texture peak at 60000.
    Image sharp = scene.sharp, blurred = scene.blurred;
    sharp *= 60000.0;
    blurred *= 60000.0;
    write_png16(fs::path(sd_out) / "sharp.png", sharp);
    write_png16(fs::path(sd_out) / "blurred.png", blurred);
    write_depth_csv(fs::path(sd_out) / "gt_depth.csv", scene.depth);
    write_param_map(fs::path(sd_out) / "gt_map.csv", scene.params);
    std::printf("depth range %.3f um grid %dx%d\n", spec.depth_range_um(), scene.depth.grid_w, scene.depth.grid_h);
    write_provenance(sd_out, "simulate-depth", cfg, common.args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
