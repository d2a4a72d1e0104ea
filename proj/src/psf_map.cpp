#include "svpsf/psf_map.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_convert.hpp"
#include "svpsf/error.hpp"
#include "svpsf/png_io.hpp"

namespace svpsf {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MapConfig, patch_w, patch_h, stride, validity_threshold)

namespace {

constexpr int kInfillNeighbors = 4;
constexpr int kInfillDepth = 8;

std::filesystem::path sidecar(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  return p.replace_extension(".json");
}

}  // namespace

void MapConfig::validate() const {
  if (patch_w < 1 || patch_h < 1) fail(ErrorKind::Config, "patch dimensions must be positive");
  if (stride < 1 || stride > std::min(patch_w, patch_h))
    fail(ErrorKind::Config, "stride must lie in [1, min(patch_w, patch_h)]");
  if (!(validity_threshold >= 0.0 && validity_threshold <= 1.0))
    fail(ErrorKind::Config, "validity_threshold must lie in [0, 1]");
}

int grid_count(int extent, int patch, int stride) {
  if (stride < 1) fail(ErrorKind::Config, "stride must be positive");
  if (extent < patch) return 0;
  return (extent - patch) / stride + 1;
}

int ParamMap::invalid_count() const {
  int n = 0;
  for (const auto& c : cells) n += c.invalid();
  return n;
}

ParamMap make_param_map(int image_w, int image_h, PsfModel model, const MapConfig& config) {
  config.validate();
  if (image_w < config.patch_w || image_h < config.patch_h)
    fail(ErrorKind::Size, "image is smaller than the patch");
  ParamMap map;
  map.model = model;
  map.image_w = image_w;
  map.image_h = image_h;
  map.config = config;
  map.grid_w = grid_count(image_w, config.patch_w, config.stride);
  map.grid_h = grid_count(image_h, config.patch_h, config.stride);
  map.cells.assign(static_cast<std::size_t>(map.grid_w) * map.grid_h,
                   PsfParams{model, std::vector<double>(param_count(model), 0.0), 0.0});
  return map;
}

ParamMap map_params(const Image& image, PsfModel model, const MapConfig& config, const PatchEstimator& estimate) {
  ParamMap map = make_param_map(image.width(), image.height(), model, config);
  for (int row = 0; row < map.grid_h; ++row)
    for (int col = 0; col < map.grid_w; ++col) {
      PsfParams p = estimate(image.crop(map.anchor_x(col), map.anchor_y(row), config.patch_w, config.patch_h), col, row);
      if (p.model != model || static_cast<int>(p.a.size()) != param_count(model))
        fail(ErrorKind::ModelMismatch, "estimator returned parameters of a different model");
      p.a0 = p.a0 > config.validity_threshold ? 1.0 : 0.0;
      map.at(col, row) = std::move(p);
    }
  return map;
}

ParamMap map_params(const Image& image, const RegressorModel& model, const MapConfig& config) {
  if (config.patch_w != model.input_side() || config.patch_h != model.input_side())
    fail(ErrorKind::DimensionMismatch, "map patch size does not match the regressor input");
  ParamMap map = make_param_map(image.width(), image.height(), model.model(), config);
  std::vector<Image> patches;
  patches.reserve(map.cells.size());
  for (int row = 0; row < map.grid_h; ++row)
    for (int col = 0; col < map.grid_w; ++col)
      patches.push_back(image.crop(map.anchor_x(col), map.anchor_y(row), config.patch_w, config.patch_h));
  const auto outputs = model.forward_batch(patches);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    PsfParams p = model.to_params(outputs[i]);
    p.a0 = outputs[i][0] > config.validity_threshold ? 1.0 : 0.0;
    map.cells[i] = std::move(p);
  }
  return map;
}

ParamMap infill_invalid(const ParamMap& map) {
  std::vector<double> mean;
  int n_valid = 0;
  for (const auto& c : map.cells) {
    if (c.invalid()) continue;
    if (mean.empty()) mean.assign(c.a.size(), 0.0);
    for (std::size_t k = 0; k < c.a.size(); ++k) mean[k] += c.a[k];
    ++n_valid;
  }
  if (n_valid == 0) fail(ErrorKind::Infill, "every cell of the parameter map is invalid");
  for (double& m : mean) m /= n_valid;

  ParamMap out = map;
  for (int row = 0; row < map.grid_h; ++row)
    for (int col = 0; col < map.grid_w; ++col) {
      if (!map.at(col, row).invalid()) continue;
      std::vector<double> acc(mean.size(), 0.0);
      double wsum = 0.0;
      int found = 0;
      for (int d = 1; d <= kInfillDepth && found < kInfillNeighbors; ++d) {
        // Walk the Manhattan ring |dx| + |dy| = d.
        for (int dy = -d; dy <= d; ++dy) {
          const int rem = d - std::abs(dy);
          for (int dx : {-rem, rem}) {
            const int c = col + dx, r = row + dy;
            if (c >= 0 && c < map.grid_w && r >= 0 && r < map.grid_h && !map.at(c, r).invalid()) {
              const double w = 1.0 / d;
              for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * map.at(c, r).a[k];
              wsum += w;
              ++found;
            }
            if (rem == 0) break;
          }
        }
      }
      PsfParams& cell = out.at(col, row);
      if (found == 0) {
        cell.a = mean;
      } else {
        for (std::size_t k = 0; k < acc.size(); ++k) cell.a[k] = acc[k] / wsum;
      }
      cell.a0 = 0.0;
    }
  return out;
}

std::vector<Psf> psfs_from_map(const ParamMap& map, int kernel_side, const PupilConfig& pupil) {
  std::vector<Psf> bank;
  bank.reserve(map.cells.size());
  for (const auto& c : map.cells) bank.push_back(render_psf(c, kernel_side, pupil));
  return bank;
}

void write_param_map(const std::filesystem::path& csv_path, const ParamMap& map) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream os(csv_path);
  if (!os) fail(ErrorKind::Io, "cannot open " + csv_path.string() + " for writing");
  const int n = param_count(map.model);
  os << "row,col,anchor_x,anchor_y,a0";
  for (int k = 1; k <= n; ++k) os << ",a" << k;
  os << "\n";
  char buf[64];
  for (int row = 0; row < map.grid_h; ++row)
    for (int col = 0; col < map.grid_w; ++col) {
      const auto& c = map.at(col, row);
      os << row << ',' << col << ',' << map.anchor_x(col) << ',' << map.anchor_y(row);
      std::snprintf(buf, sizeof(buf), ",%.17g", c.a0);
      os << buf;
      for (double v : c.a) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        os << buf;
      }
      os << "\n";
    }
  if (!os) fail(ErrorKind::Io, "failed writing " + csv_path.string());

  const json header = {{"format", "svpsf-param-map"}, {"version", 1},          {"model", map.model},
                       {"grid_w", map.grid_w},        {"grid_h", map.grid_h},  {"image_w", map.image_w},
                       {"image_h", map.image_h},      {"config", map.config}};
  std::ofstream hs(sidecar(csv_path));
  if (!(hs << header.dump(2) << "\n")) fail(ErrorKind::Io, "cannot write " + sidecar(csv_path).string());
}

ParamMap read_param_map(const std::filesystem::path& csv_path) {
  std::ifstream hs(sidecar(csv_path));
  if (!hs) fail(ErrorKind::Io, "cannot open " + sidecar(csv_path).string());
  ParamMap map;
  try {
    const json header = json::parse(hs);
    if (header.at("version").get<int>() != 1) fail(ErrorKind::Io, "unsupported parameter map version");
    map.model = header.at("model").get<PsfModel>();
    map.grid_w = header.at("grid_w").get<int>();
    map.grid_h = header.at("grid_h").get<int>();
    map.image_w = header.at("image_w").get<int>();
    map.image_h = header.at("image_h").get<int>();
    map.config = header.at("config").get<MapConfig>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed parameter map header: ") + e.what());
  }
  if (map.grid_w < 1 || map.grid_h < 1) fail(ErrorKind::Io, "parameter map header declares an empty grid");

  std::ifstream is(csv_path);
  if (!is) fail(ErrorKind::Io, "cannot open " + csv_path.string());
  const int n = param_count(map.model);
  map.cells.assign(static_cast<std::size_t>(map.grid_w) * map.grid_h, PsfParams{map.model, {}, 0.0});
  std::vector<bool> seen(map.cells.size(), false);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> v;
    while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
    if (static_cast<int>(v.size()) != 5 + n) fail(ErrorKind::Io, "parameter map row has the wrong column count");
    const int row = static_cast<int>(v[0]), col = static_cast<int>(v[1]);
    if (row < 0 || row >= map.grid_h || col < 0 || col >= map.grid_w) fail(ErrorKind::Io, "cell index out of range");
    auto& c = map.at(col, row);
    c.a0 = v[4];
    c.a.assign(v.begin() + 5, v.end());
    seen[static_cast<std::size_t>(row) * map.grid_w + col] = true;
  }
  for (bool s : seen)
    if (!s) fail(ErrorKind::Io, "parameter map is missing cells");
  return map;
}

void write_psf_montage(const std::filesystem::path& path, std::span<const Psf> bank, int grid_w, int grid_h) {
  if (bank.empty() || static_cast<int>(bank.size()) != grid_w * grid_h)
    fail(ErrorKind::DimensionMismatch, "PSF bank does not match the grid");
  int side = 0;
  for (const auto& p : bank) side = std::max(side, p.side());
  const int cell = side + 1;
  Image montage(grid_w * cell + 1, grid_h * cell + 1);
  for (int row = 0; row < grid_h; ++row)
    for (int col = 0; col < grid_w; ++col) {
      const Psf& p = bank[static_cast<std::size_t>(row) * grid_w + col];
      const double peak = p.kernel.max();
      const int off = (side - p.side()) / 2;
      for (int y = 0; y < p.side(); ++y)
        for (int x = 0; x < p.side(); ++x)
          montage(col * cell + 1 + off + x, row * cell + 1 + off + y) = peak > 0 ? p.kernel(x, y) / peak : 0.0;
    }
  write_png16_scaled(path, montage, 0.0, 1.0);
}

}  // namespace svpsf
