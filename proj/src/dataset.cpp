#include "svpsf/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "json_convert.hpp"
#include "seeds.hpp"
#include "svpsf/error.hpp"
#include "svpsf/png_io.hpp"

namespace svpsf {
namespace {

constexpr int kFormatVersion = 1;

std::string patch_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "patches/%06zu.png", i);
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double quantize(double v, double offset, double scale) {
  const double q = std::clamp(std::round((v + offset) * scale), 0.0, 65535.0);
  return q / scale - offset;
}

// Blurred, photon-scaled patch before noise. The crop window is extended by the kernel
// radius so the patch interior sees real neighbours instead of boundary extension.
Image clean_patch(const DatasetConfig& cfg, const Image& source, const Psf& psf, int crop_x, int crop_y) {
  const int p = cfg.patch_size;
  const int r = psf.side() / 2;
  const int x0 = std::max(0, crop_x - r), y0 = std::max(0, crop_y - r);
  const int x1 = std::min(source.width(), crop_x + p + r), y1 = std::min(source.height(), crop_y + p + r);
  Image blurred = convolve(source.crop(x0, y0, x1 - x0, y1 - y0), psf, Boundary::Reflect);
  const double peak = blurred.max();
  if (peak > 0.0) blurred *= cfg.photon_peak / peak;
  return blurred.crop(crop_x - x0, crop_y - y0, p, p);
}

Image finish_patch(const TrainingSet& set, const Image& clean, std::uint64_t sample_seed) {
  const auto& cfg = set.config;
  Image noisy = cfg.noise ? add_noise(clean, NoiseConfig{cfg.beta, cfg.sigma_rel * cfg.photon_peak,
                                                          detail::splitmix64(sample_seed)})
                          : clean;
  for (double& v : noisy.pixels()) v = quantize(v, set.png_offset, set.png_scale);
  return noisy;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

std::string manifest_header(PsfModel model) {
  std::string h = "path,model,a0";
  for (int i = 1; i <= param_count(model); ++i) h += ",a" + std::to_string(i);
  return h + ",source_tag,seed,source_index,rotation,crop_x,crop_y";
}

std::string manifest_row(std::size_t i, const TrainingSample& s) {
  std::string row = patch_name(i) + "," + std::string(to_string(s.params.model)) + "," + fmt_double(s.params.a0);
  for (double a : s.params.a) row += "," + fmt_double(a);
  row += "," + std::string(to_string(s.source_tag)) + "," + std::to_string(s.seed) + "," +
         std::to_string(s.source_index) + "," + std::to_string(s.rotation) + "," + std::to_string(s.crop_x) +
         "," + std::to_string(s.crop_y);
  return row;
}

}  // namespace

std::string_view to_string(SourceTag tag) noexcept {
  switch (tag) {
    case SourceTag::Poi: return "poi";
    case SourceTag::Syn: return "syn";
    case SourceTag::Micr: return "micr";
    case SourceTag::Nat: return "nat";
  }
  return "?";
}

SourceTag parse_source_tag(std::string_view text) {
  for (SourceTag t : {SourceTag::Poi, SourceTag::Syn, SourceTag::Micr, SourceTag::Nat})
    if (text == to_string(t)) return t;
  fail(ErrorKind::Config, "unknown source tag '" + std::string(text) + "'");
}

std::vector<SourceImage> load_image_folder(const std::filesystem::path& dir, SourceTag tag) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Io, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SourceImage> out;
  for (const auto& f : files) {
    Image img = read_png(f);
    const double peak = img.max();
    if (peak > 0.0) img *= 1.0 / peak;
    out.push_back({tag, std::move(img)});
  }
  return out;
}

void DatasetConfig::validate() const {
  if (sources.empty()) fail(ErrorKind::Config, "dataset needs at least one source");
  if (count < 1) fail(ErrorKind::Config, "dataset count must be >= 1");
  if (patch_size < 4) fail(ErrorKind::Config, "patch size must be >= 4");
  if (kernel_side < 1 || kernel_side % 2 == 0) fail(ErrorKind::Config, "kernel side must be odd");
  if (kernel_side / 2 > patch_size) fail(ErrorKind::Config, "kernel radius must not exceed the patch size");
  if (!(photon_peak > 0.0)) fail(ErrorKind::Config, "photon peak must be positive");
  if (!(black_fraction >= 0.0 && black_fraction < 1.0)) fail(ErrorKind::Config, "black fraction must lie in [0, 1)");
  if (source_size < patch_size) fail(ErrorKind::Config, "source size must be >= patch size");
  if (pool_size < 1) fail(ErrorKind::Config, "pool size must be >= 1");
  if (!(sigma_rel >= 0.0)) fail(ErrorKind::Config, "sigma_rel must be nonnegative");
  NoiseConfig{beta, sigma_rel * photon_peak, 0}.validate();
}

std::vector<SourceImage> build_source_pool(const DatasetConfig& cfg, std::span<const SourceImage> user_images) {
  std::vector<SourceImage> pool;
  for (SourceTag tag : cfg.sources) {
    const std::size_t before = pool.size();
    if (tag == SourceTag::Poi || tag == SourceTag::Syn) {
      for (int i = 0; i < cfg.pool_size; ++i) {
        const std::uint64_t s = detail::splitmix64(cfg.seed ^ (static_cast<std::uint64_t>(tag) << 40) ^ i);
        pool.push_back({tag, tag == SourceTag::Poi ? synth_points(cfg.points_per_source, cfg.source_size, s)
                                                   : synth_cells(cfg.cells_per_source, cfg.source_size, s)});
      }
    } else {
      for (const auto& img : user_images) {
        if (img.tag != tag) continue;
        if (img.image.width() < cfg.patch_size || img.image.height() < cfg.patch_size)
          fail(ErrorKind::Config, "source image smaller than the patch size");
        pool.push_back(img);
      }
    }
    if (pool.size() == before)
      fail(ErrorKind::Config, "source pool for '" + std::string(to_string(tag)) + "' is empty");
  }
  return pool;
}

TrainingSet generate_dataset(const DatasetConfig& cfg, std::span<const SourceImage> user_images) {
  cfg.validate();
  const auto pool = build_source_pool(cfg, user_images);
  TrainingSet set;
  set.config = cfg;
  set.png_offset = cfg.photon_peak;
  set.png_scale = 65535.0 / (3.0 * cfg.photon_peak);

  const int n = param_count(cfg.model);
  const int n_black = static_cast<int>(std::lround(cfg.black_fraction * cfg.count));
  set.samples.reserve(cfg.count + n_black);
  for (int k = 0; k < cfg.count + n_black; ++k) {
    TrainingSample s;
    s.seed = cfg.seed ^ static_cast<std::uint64_t>(k);
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> u(n);
    for (double& v : u) v = unit(rng);
    s.params = cfg.ranges.denormalize(cfg.model, u);

    Image clean;
    if (k < cfg.count) {
      s.source_index = std::uniform_int_distribution<int>(0, static_cast<int>(pool.size()) - 1)(rng);
      static constexpr std::array<int, 3> kTurns{0, 1, 3};
      s.rotation = kTurns[std::uniform_int_distribution<int>(0, 2)(rng)];
      s.source_tag = pool[s.source_index].tag;
      const Image source = pool[s.source_index].image.rotated90(s.rotation);
      s.crop_x = std::uniform_int_distribution<int>(0, source.width() - cfg.patch_size)(rng);
      s.crop_y = std::uniform_int_distribution<int>(0, source.height() - cfg.patch_size)(rng);
      clean = clean_patch(cfg, source, render_psf(s.params, cfg.kernel_side, cfg.pupil), s.crop_x, s.crop_y);
      s.params.a0 = validity_check(clean, cfg.validity, cfg.photon_peak) ? 1.0 : 0.0;
    } else {
      s.source_tag = cfg.sources.front();
      clean = Image(cfg.patch_size, cfg.patch_size);
      s.params.a0 = 1.0;
    }
    s.patch = finish_patch(set, clean, s.seed);
    set.samples.push_back(std::move(s));
  }
  return set;
}

Image redegrade_sample(const TrainingSet& set, std::span<const SourceImage> pool, const TrainingSample& sample) {
  const auto& cfg = set.config;
  Image clean(cfg.patch_size, cfg.patch_size);
  if (sample.source_index >= 0) {
    if (sample.source_index >= static_cast<int>(pool.size())) fail(ErrorKind::Config, "source index out of range");
    PsfParams params = sample.params;
    params.a0 = 0.0;
    const Image source = pool[sample.source_index].image.rotated90(sample.rotation);
    clean = clean_patch(cfg, source, render_psf(params, cfg.kernel_side, cfg.pupil), sample.crop_x, sample.crop_y);
  }
  return finish_patch(set, clean, sample.seed);
}

std::uint64_t manifest_checksum(const TrainingSet& set) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const std::string row = manifest_row(i, set.samples[i]);
    h = detail::fnv1a(row.data(), row.size(), h);
    const auto px = set.samples[i].patch.pixels();
    h = detail::fnv1a(px.data(), px.size_bytes(), h);
  }
  return h;
}

void write_training_set(const std::filesystem::path& dir, const TrainingSet& set) {
  std::filesystem::create_directories(dir / "patches");
  json header = {{"format", "svpsf-training-set"},
                 {"version", kFormatVersion},
                 {"config", set.config},
                 {"png_offset", set.png_offset},
                 {"png_scale", set.png_scale},
                 {"patch_size", set.config.patch_size},
                 {"ranges", set.config.ranges},
                 {"count", set.samples.size()}};
  std::ofstream hs(dir / "header.json");
  if (!(hs << header.dump(2) << "\n")) fail(ErrorKind::Io, "cannot write " + (dir / "header.json").string());

  std::ofstream ms(dir / "manifest.csv");
  if (!ms) fail(ErrorKind::Io, "cannot write " + (dir / "manifest.csv").string());
  ms << manifest_header(set.config.model) << "\n";
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto& s = set.samples[i];
    ms << manifest_row(i, s) << "\n";
    Image levels = s.patch;
    for (double& v : levels.pixels()) v = (v + set.png_offset) * set.png_scale;
    write_png16(dir / patch_name(i), levels);
  }
  if (!ms) fail(ErrorKind::Io, "failed writing manifest");
}

TrainingSet read_training_set(const std::filesystem::path& dir) {
  std::ifstream hs(dir / "header.json");
  if (!hs) fail(ErrorKind::Io, "cannot open " + (dir / "header.json").string());
  TrainingSet set;
  std::size_t declared = 0;
  try {
    const json header = json::parse(hs);
    if (header.at("version").get<int>() != kFormatVersion) fail(ErrorKind::Io, "unsupported dataset version");
    set.config = header.at("config").get<DatasetConfig>();
    set.png_offset = header.at("png_offset").get<double>();
    set.png_scale = header.at("png_scale").get<double>();
    declared = header.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, "malformed dataset header: " + std::string(e.what()));
  }

  std::ifstream ms(dir / "manifest.csv");
  if (!ms) fail(ErrorKind::Io, "cannot open " + (dir / "manifest.csv").string());
  std::string line;
  std::getline(ms, line);
  if (line != manifest_header(set.config.model)) fail(ErrorKind::Io, "manifest columns do not match the model");
  const int n = param_count(set.config.model);
  while (std::getline(ms, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (static_cast<int>(f.size()) != 9 + n) fail(ErrorKind::Io, "malformed manifest row: " + line);
    TrainingSample s;
    try {
      s.params.model = parse_psf_model(f[1]);
      s.params.a0 = std::stod(f[2]);
      for (int i = 0; i < n; ++i) s.params.a.push_back(std::stod(f[3 + i]));
      s.source_tag = parse_source_tag(f[3 + n]);
      s.seed = std::stoull(f[4 + n]);
      s.source_index = std::stoi(f[5 + n]);
      s.rotation = std::stoi(f[6 + n]);
      s.crop_x = std::stoi(f[7 + n]);
      s.crop_y = std::stoi(f[8 + n]);
    } catch (const std::exception& e) {
      fail(ErrorKind::Io, "malformed manifest row: " + line);
    }
    Image levels = read_png(dir / f[0]);
    for (double& v : levels.pixels()) v = v / set.png_scale - set.png_offset;
    s.patch = std::move(levels);
    set.samples.push_back(std::move(s));
  }
  if (set.samples.size() != declared)
    fail(ErrorKind::Io, "manifest holds " + std::to_string(set.samples.size()) + " samples, header declares " +
                            std::to_string(declared));
  return set;
}

}  // namespace svpsf
