#include "svpsf/config.hpp"

#include <fftw3.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "binary_io.hpp"
#include "json_convert.hpp"
#include "svpsf/error.hpp"

namespace svpsf {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || t.empty())
    fail(ErrorKind::Config, key + ": expected a number, got '" + text + "'");
  return v;
}

long long parse_int(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  long long v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || t.empty())
    fail(ErrorKind::Config, key + ": expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  fail(ErrorKind::Config, key + ": expected true or false, got '" + text + "'");
}

ParamRange parse_range(const std::string& text, const std::string& key) {
  const auto parts = split_list(text);
  if (parts.size() != 2) fail(ErrorKind::Config, key + ": expected 'lo, hi'");
  ParamRange r{parse_double(parts[0], key), parse_double(parts[1], key)};
  if (!(r.hi > r.lo)) fail(ErrorKind::Config, key + ": range must satisfy lo < hi");
  return r;
}

struct Binding {
  ConfigKey meta;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

template <typename Get, typename Set>
Binding bind(std::string section, std::string key, std::string help, Get get, Set set) {
  return {{std::move(section), std::move(key), std::move(help)}, get, set};
}

#define SVPSF_DOUBLE(sec, name, help, expr)                                                              \
  bind(sec, name, help, [](const PipelineConfig& c) { return format_double(c.expr); },                  \
       [](PipelineConfig& c, const std::string& v, const std::string& k) { c.expr = parse_double(v, k); })
#define SVPSF_INT(sec, name, help, expr)                                                                 \
  bind(sec, name, help, [](const PipelineConfig& c) { return std::to_string(c.expr); },                 \
       [](PipelineConfig& c, const std::string& v, const std::string& k) {                               \
         c.expr = static_cast<decltype(c.expr)>(parse_int(v, k));                                        \
       })
#define SVPSF_RANGE(name, help, field)                                                                   \
  bind("ranges", name, help,                                                                            \
       [](const PipelineConfig& c) {                                                                     \
         return format_double(c.dataset.ranges.field.lo) + ", " + format_double(c.dataset.ranges.field.hi); \
       },                                                                                                \
       [](PipelineConfig& c, const std::string& v, const std::string& k) { c.dataset.ranges.field = parse_range(v, k); })

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      bind("psf", "model", "PSF model: Z-1, Z-2, Z-3, G-1 or G-2",
           [](const PipelineConfig& c) { return std::string(to_string(c.dataset.model)); },
           [](PipelineConfig& c, const std::string& v, const std::string&) { c.dataset.model = parse_psf_model(trim(v)); }),
      SVPSF_INT("psf", "kernel_side", "kernel side for training data (odd)", dataset.kernel_side),
      SVPSF_INT("psf", "deconv_kernel_side", "kernel side for deconvolution banks (odd)", deconv_kernel_side),
      SVPSF_INT("psf", "pupil_side", "pupil grid samples (even, >= 2 x kernel side)", dataset.pupil.side),
      SVPSF_DOUBLE("psf", "aperture_radius", "aperture radius as a fraction of the grid half-width",
                   dataset.pupil.aperture_radius),
      SVPSF_DOUBLE("psf", "wavelength", "normalized wavelength", dataset.pupil.wavelength),
      SVPSF_RANGE("defocus", "defocus range in radians", defocus),
      SVPSF_RANGE("cylinder", "cylinder range in radians", cylinder),
      SVPSF_RANGE("axis", "astigmatism axis range in radians", axis),
      SVPSF_RANGE("variance", "Gaussian variance range in px^2", variance),
      bind("dataset", "sources", "comma-separated source tags: poi, syn, micr, nat",
           [](const PipelineConfig& c) {
             std::string s;
             for (auto t : c.dataset.sources) s += (s.empty() ? "" : ", ") + std::string(to_string(t));
             return s;
           },
           [](PipelineConfig& c, const std::string& v, const std::string& k) {
             c.dataset.sources.clear();
             for (const auto& t : split_list(v)) c.dataset.sources.push_back(parse_source_tag(t));
             if (c.dataset.sources.empty()) fail(ErrorKind::Config, k + ": no sources listed");
           }),
      SVPSF_INT("dataset", "count", "textured draws before black samples are appended", dataset.count),
      SVPSF_INT("dataset", "patch_size", "patch side, also the regressor input and map window", dataset.patch_size),
      bind("dataset", "noise", "apply Poisson-Gaussian noise",
           [](const PipelineConfig& c) { return std::string(c.dataset.noise ? "true" : "false"); },
           [](PipelineConfig& c, const std::string& v, const std::string& k) { c.dataset.noise = parse_bool(v, k); }),
      SVPSF_DOUBLE("dataset", "beta", "quantum efficiency", dataset.beta),
      SVPSF_DOUBLE("dataset", "sigma_rel", "read noise as a fraction of photon_peak", dataset.sigma_rel),
      SVPSF_DOUBLE("dataset", "photon_peak", "photon count at the brightest pixel of a window", dataset.photon_peak),
      SVPSF_DOUBLE("dataset", "black_fraction", "share of appended untextured samples", dataset.black_fraction),
      SVPSF_DOUBLE("dataset", "var_threshold", "variance threshold relative to the squared range",
                   dataset.validity.var_threshold),
      SVPSF_DOUBLE("dataset", "white_ratio_threshold", "maximum fraction of near-saturated pixels",
                   dataset.validity.white_ratio_threshold),
      SVPSF_INT("dataset", "source_size", "side of synthetic source images", dataset.source_size),
      SVPSF_INT("dataset", "pool_size", "synthetic sources per tag", dataset.pool_size),
      SVPSF_INT("dataset", "points_per_source", "points per poi source", dataset.points_per_source),
      SVPSF_INT("dataset", "cells_per_source", "cells per syn source", dataset.cells_per_source),
      SVPSF_INT("dataset", "seed", "dataset seed", dataset.seed),
      bind("train", "learning_rates", "candidate learning rates, one training run each",
           [](const PipelineConfig& c) {
             std::string s;
             for (const auto& t : c.train_grid) s += (s.empty() ? "" : ", ") + format_double(t.learning_rate);
             return s;
           },
           [](PipelineConfig& c, const std::string& v, const std::string& k) {
             const TrainConfig base = c.train_grid.front();
             c.train_grid.clear();
             for (const auto& t : split_list(v)) {
               TrainConfig tc = base;
               tc.learning_rate = parse_double(t, k);
               c.train_grid.push_back(tc);
             }
             if (c.train_grid.empty()) fail(ErrorKind::Config, k + ": no learning rates listed");
           }),
      bind("train", "epochs", "epochs per candidate",
           [](const PipelineConfig& c) { return std::to_string(c.train_grid.front().epochs); },
           [](PipelineConfig& c, const std::string& v, const std::string& k) {
             for (auto& t : c.train_grid) t.epochs = static_cast<int>(parse_int(v, k));
           }),
      bind("train", "batch_size", "minibatch size",
           [](const PipelineConfig& c) { return std::to_string(c.train_grid.front().batch_size); },
           [](PipelineConfig& c, const std::string& v, const std::string& k) {
             for (auto& t : c.train_grid) t.batch_size = static_cast<int>(parse_int(v, k));
           }),
      bind("train", "gamma", "weight of the validity term in the loss",
           [](const PipelineConfig& c) { return format_double(c.train_grid.front().gamma); },
           [](PipelineConfig& c, const std::string& v, const std::string& k) {
             for (auto& t : c.train_grid) t.gamma = parse_double(v, k);
           }),
      bind("train", "seed", "initialization and shuffling seed",
           [](const PipelineConfig& c) { return std::to_string(c.train_grid.front().seed); },
           [](PipelineConfig& c, const std::string& v, const std::string& k) {
             for (auto& t : c.train_grid) t.seed = static_cast<std::uint64_t>(parse_int(v, k));
           }),
      SVPSF_INT("map", "stride", "sliding-window stride", map.stride),
      SVPSF_DOUBLE("map", "validity_threshold", "cells with a0 above this are infilled", map.validity_threshold),
      SVPSF_DOUBLE("deconv", "lambda_tv", "TV weight in [0, 1)", deconv.lambda_tv),
      SVPSF_INT("deconv", "iterations", "Richardson-Lucy iterations", deconv.iterations),
      SVPSF_DOUBLE("deconv", "tv_epsilon", "gradient magnitude floor relative to the dynamic range", deconv.tv_epsilon),
      bind("deconv", "clamp", "clamp the estimate at zero after each iteration",
           [](const PipelineConfig& c) { return std::string(c.deconv.nonneg_clamp ? "true" : "false"); },
           [](PipelineConfig& c, const std::string& v, const std::string& k) { c.deconv.nonneg_clamp = parse_bool(v, k); }),
      bind("paths", "micr_dir", "folder of PNG sources for the micr tag",
           [](const PipelineConfig& c) { return c.micr_dir.string(); },
           [](PipelineConfig& c, const std::string& v, const std::string&) { c.micr_dir = trim(v); }),
      bind("paths", "nat_dir", "folder of PNG sources for the nat tag",
           [](const PipelineConfig& c) { return c.nat_dir.string(); },
           [](PipelineConfig& c, const std::string& v, const std::string&) { c.nat_dir = trim(v); }),
  };
  return table;
}

#undef SVPSF_DOUBLE
#undef SVPSF_INT
#undef SVPSF_RANGE

}  // namespace

void PipelineConfig::validate() const {
  dataset.validate();
  if (train_grid.empty()) fail(ErrorKind::Config, "training grid is empty");
  for (const auto& t : train_grid) t.validate();
  map.validate();
  deconv.validate();
  if (map.patch_w != dataset.patch_size || map.patch_h != dataset.patch_size)
    fail(ErrorKind::Config, "map window must equal the dataset patch size");
  if (deconv_kernel_side < 1 || deconv_kernel_side % 2 == 0) fail(ErrorKind::Config, "deconv_kernel_side must be odd");
  if (dataset.pupil.side % 2 != 0 || dataset.pupil.side < 2 * std::max(dataset.kernel_side, deconv_kernel_side))
    fail(ErrorKind::Config, "pupil_side must be even and at least twice the kernel side");
  if (!(dataset.pupil.aperture_radius > 0.0 && dataset.pupil.aperture_radius <= 1.0))
    fail(ErrorKind::Config, "aperture_radius must lie in (0, 1]");
  if (!(dataset.pupil.wavelength > 0.0)) fail(ErrorKind::Config, "wavelength must be positive");
  for (auto t : dataset.sources) {
    if (t == SourceTag::Micr && micr_dir.empty()) fail(ErrorKind::Config, "source micr needs paths.micr_dir");
    if (t == SourceTag::Nat && nat_dir.empty()) fail(ErrorKind::Config, "source nat needs paths.nat_dir");
  }
}

std::vector<ConfigKey> config_schema() {
  std::vector<ConfigKey> out;
  for (const auto& b : bindings()) out.push_back(b.meta);
  return out;
}

PipelineConfig default_config() {
  PipelineConfig c;
  c.map.patch_w = c.map.patch_h = c.dataset.patch_size;
  return c;
}

PipelineConfig parse_config(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(ini_text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::Config, std::string("config syntax error: ") + e.what());
  }
  std::map<std::string, const Binding*> index;
  for (const auto& b : bindings()) index[b.meta.section + "." + b.meta.key] = &b;

  PipelineConfig c = default_config();
  // Learning rates first so per-candidate keys apply to every candidate.
  if (auto lr = tree.get_optional<std::string>("train.learning_rates"))
    index.at("train.learning_rates")->set(c, *lr, "train.learning_rates");
  for (const auto& [section, node] : tree) {
    if (node.empty()) fail(ErrorKind::Config, "key '" + section + "' must be inside a section");
    for (const auto& [key, value] : node) {
      const std::string full = section + "." + key;
      const auto it = index.find(full);
      if (it == index.end()) fail(ErrorKind::Config, "unknown config key '" + full + "'");
      if (full != "train.learning_rates") it->second->set(c, value.data(), full);
    }
  }
  c.map.patch_w = c.map.patch_h = c.dataset.patch_size;
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const PipelineConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const auto& b : bindings()) {
    if (b.meta.section != section) {
      if (!section.empty()) os << "\n";
      section = b.meta.section;
      os << "[" << section << "]\n";
    }
    os << "; " << b.meta.help << "\n" << b.meta.key << " = " << b.get(config) << "\n";
  }
  return os.str();
}

std::uint64_t config_hash(const PipelineConfig& config) {
  const std::string text = render_config(config);
  return detail::fnv1a(text.data(), text.size());
}

void write_provenance(const std::filesystem::path& output, const std::string& command, const PipelineConfig& config,
                      const std::vector<std::string>& args) {
  std::filesystem::path path = output;
  if (std::filesystem::is_directory(output))
    path /= "provenance.json";
  else
    path += ".provenance.json";
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(config)));
  std::vector<std::uint64_t> train_seeds;
  for (const auto& t : config.train_grid) train_seeds.push_back(t.seed);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  const json j = {{"command", command},
                  {"args", args},
                  {"created_utc", std::string(stamp)},
                  {"config_hash", std::string(hash)},
                  {"config", render_config(config)},
                  {"seeds", {{"dataset", config.dataset.seed}, {"train", train_seeds}}},
                  {"versions",
                   {{"svpsf", kVersion},
                    {"compiler", __VERSION__},
                    {"fftw", std::string(fftw_version)},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)}}}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!(os << j.dump(2) << "\n")) fail(ErrorKind::Io, "cannot write " + path.string());
}

}  // namespace svpsf
