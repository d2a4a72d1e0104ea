#include "svpsf/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "json_convert.hpp"
#include "svpsf/error.hpp"
#include "svpsf/fft.hpp"

namespace svpsf {
namespace {

constexpr char kModelMagic[8] = {'S', 'V', 'P', 'S', 'F', 'N', 'N', '1'};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_pair(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.size() < 2)
    fail(ErrorKind::DimensionMismatch, "prediction and target vectors must match and hold a0 plus parameters");
}

// Standardized float copies of a set's patches, laid out contiguously.
std::vector<float> pack_inputs(const TrainingSet& set, int side, double std_floor) {
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  std::vector<float> out(plane * set.samples.size());
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const Image& p = set.samples[i].patch;
    if (p.width() != side || p.height() != side)
      fail(ErrorKind::DimensionMismatch, "training patch size does not match the network input");
    const auto z = standardize(p, std_floor);
    std::transform(z.begin(), z.end(), out.begin() + i * plane, [](double v) { return static_cast<float>(v); });
  }
  return out;
}

std::vector<double> pack_targets(const TrainingSet& set, const ParamRanges& ranges) {
  std::vector<double> out;
  for (const auto& s : set.samples) {
    const auto t = target_vector(s.params, ranges);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

double mean_loss(const nn::Network<float>& net, const std::vector<float>& inputs, const std::vector<double>& targets,
                 int count, double gamma) {
  const std::size_t plane = static_cast<std::size_t>(net.spec().input_side) * net.spec().input_side;
  const int outputs = net.spec().outputs;
  constexpr int chunk = 128;
  double total = 0.0;
  for (int start = 0; start < count; start += chunk) {
    const int b = std::min(chunk, count - start);
    const double l = batch_loss<float>(net, std::span(inputs).subspan(start * plane, b * plane), b,
                                       std::span(targets).subspan(static_cast<std::size_t>(start) * outputs,
                                                                  static_cast<std::size_t>(b) * outputs),
                                       gamma);
    total += l * b;
  }
  return total / count;
}

}  // namespace

RegressorModel::RegressorModel(PsfModel model, ParamRanges ranges, nn::ArchSpec arch)
    : model_(model), ranges_(ranges) {
  arch.outputs = param_count(model) + 1;
  net_ = nn::Network<float>(std::move(arch));
}

std::vector<double> standardize(const Image& patch, double std_floor) {
  const auto px = patch.pixels();
  if (px.empty()) fail(ErrorKind::Size, "cannot standardize an empty patch");
  double mean = 0.0;
  for (double v : px) mean += v;
  mean /= static_cast<double>(px.size());
  double var = 0.0;
  for (double v : px) var += (v - mean) * (v - mean);
  var /= static_cast<double>(px.size());
  const double sd = std::max(std::sqrt(var), std_floor);
  std::vector<double> out(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = (px[i] - mean) / sd;
  return out;
}

std::vector<double> RegressorModel::forward(const Image& patch) const {
  return forward_batch(std::span(&patch, 1)).front();
}

std::vector<std::vector<double>> RegressorModel::forward_batch(std::span<const Image> patches) const {
  const int side = input_side();
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  std::vector<std::vector<double>> results;
  results.reserve(patches.size());
  constexpr std::size_t chunk = 64;
  std::vector<float> buffer;
  for (std::size_t start = 0; start < patches.size(); start += chunk) {
    const std::size_t b = std::min(chunk, patches.size() - start);
    buffer.assign(b * plane, 0.0f);
    for (std::size_t i = 0; i < b; ++i) {
      const Image& p = patches[start + i];
      if (p.width() != side || p.height() != side)
        fail(ErrorKind::Size, "patch size does not match the regressor input");
      const auto z = standardize(p, std_floor_);
      std::transform(z.begin(), z.end(), buffer.begin() + i * plane, [](double v) { return static_cast<float>(v); });
    }
    const auto out = net_.forward(buffer, static_cast<int>(b));
    for (std::size_t i = 0; i < b; ++i) {
      std::vector<double> r(out.rows());
      for (Eigen::Index o = 0; o < out.rows(); ++o) r[o] = out(o, static_cast<Eigen::Index>(i));
      r[0] = sigmoid(r[0]);
      results.push_back(std::move(r));
    }
  }
  return results;
}

PsfParams RegressorModel::to_params(std::span<const double> output) const {
  if (static_cast<int>(output.size()) != param_count(model_) + 1)
    fail(ErrorKind::DimensionMismatch, "regressor output size does not match the PSF model");
  return ranges_.denormalize(model_, output.subspan(1), output[0]);
}

bool RegressorModel::operator==(const RegressorModel& other) const {
  const auto a = net_.params();
  const auto b = other.net_.params();
  return model_ == other.model_ && ranges_ == other.ranges_ && net_.spec() == other.net_.spec() &&
         meta_ == other.meta_ && std_floor_ == other.std_floor_ && std::equal(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<double> target_vector(const PsfParams& gt, const ParamRanges& ranges) {
  std::vector<double> t{gt.a0};
  const auto u = ranges.normalize(gt);
  t.insert(t.end(), u.begin(), u.end());
  return t;
}

double loss(std::span<const double> pred, std::span<const double> target, double gamma) {
  check_pair(pred, target);
  const double a0 = target[0];
  const std::size_t n = pred.size() - 1;
  double sq = 0.0;
  for (std::size_t i = 1; i < pred.size(); ++i) sq += (target[i] - pred[i]) * (target[i] - pred[i]);
  return gamma * (a0 - pred[0]) * (a0 - pred[0]) + (1.0 - a0) / (2.0 * n) * sq;
}

double loss(std::span<const double> pred, const PsfParams& gt, const ParamRanges& ranges, double gamma) {
  return loss(pred, target_vector(gt, ranges), gamma);
}

std::vector<double> loss_gradient(std::span<const double> pred, std::span<const double> target, double gamma) {
  check_pair(pred, target);
  const double a0 = target[0];
  const double n = static_cast<double>(pred.size() - 1);
  std::vector<double> g(pred.size());
  g[0] = -2.0 * gamma * (a0 - pred[0]);
  for (std::size_t i = 1; i < pred.size(); ++i) g[i] = -(1.0 - a0) / n * (target[i] - pred[i]);
  return g;
}

template <typename T>
double batch_loss(const nn::Network<T>& net, std::span<const T> input, int batch, std::span<const double> targets,
                  double gamma, std::span<T> grad) {
  const int outputs = net.spec().outputs;
  if (targets.size() != static_cast<std::size_t>(batch) * outputs)
    fail(ErrorKind::DimensionMismatch, "target count does not match the batch");
  typename nn::Network<T>::Cache cache;
  const bool want_grad = !grad.empty();
  const auto raw = net.forward(input, batch, want_grad ? &cache : nullptr);
  nn::Matrix<T> d_out(outputs, batch);
  std::vector<double> pred(outputs);
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < outputs; ++o) pred[o] = static_cast<double>(raw(o, b));
    const double s = sigmoid(pred[0]);
    pred[0] = s;
    const auto t = targets.subspan(static_cast<std::size_t>(b) * outputs, outputs);
    total += loss(pred, t, gamma);
    if (want_grad) {
      const auto g = loss_gradient(pred, t, gamma);
      d_out(0, b) = static_cast<T>(g[0] * s * (1.0 - s) / batch);
      for (int o = 1; o < outputs; ++o) d_out(o, b) = static_cast<T>(g[o] / batch);
    }
  }
  if (want_grad) net.backward(cache, d_out, grad);
  return total / batch;
}

template double batch_loss<float>(const nn::Network<float>&, std::span<const float>, int, std::span<const double>,
                                  double, std::span<float>);
template double batch_loss<double>(const nn::Network<double>&, std::span<const double>, int,
                                   std::span<const double>, double, std::span<double>);

void TrainConfig::validate() const {
  if (!(learning_rate >= 1e-4 && learning_rate <= 1e-1)) fail(ErrorKind::Config, "learning_rate must lie in [1e-4, 1e-1]");
  if (epochs < 1) fail(ErrorKind::Config, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail(ErrorKind::Config, "gamma must be nonnegative");
}

TrainResult train(const TrainingSet& train_set, const TrainingSet& valid_set, std::span<const TrainConfig> grid,
                  const nn::ArchSpec& arch, const EpochCallback& on_epoch) {
  if (train_set.samples.empty() || valid_set.samples.empty())
    fail(ErrorKind::Config, "training and validation sets must be nonempty");
  if (train_set.config.model != valid_set.config.model)
    fail(ErrorKind::ModelMismatch, "training and validation sets use different PSF models");
  if (grid.empty()) fail(ErrorKind::Config, "empty training configuration grid");
  for (const auto& c : grid) c.validate();

  const PsfModel model = train_set.config.model;
  const ParamRanges& ranges = train_set.config.ranges;
  TrainResult result;
  result.model = RegressorModel(model, ranges, arch);
  const int side = result.model.input_side();
  const int outputs = result.model.output_count();
  const double std_floor = result.model.std_floor();
  const std::size_t plane = static_cast<std::size_t>(side) * side;

  const auto train_x = pack_inputs(train_set, side, std_floor);
  const auto train_y = pack_targets(train_set, ranges);
  const auto valid_x = pack_inputs(valid_set, side, std_floor);
  const auto valid_y = pack_targets(valid_set, ranges);
  const int n_train = static_cast<int>(train_set.samples.size());
  const int n_valid = static_cast<int>(valid_set.samples.size());

  double best = std::numeric_limits<double>::infinity();
  std::vector<float> best_params;
  TrainingMeta best_meta;

  for (std::size_t ci = 0; ci < grid.size(); ++ci) {
    const TrainConfig& cfg = grid[ci];
    nn::Network<float> net(result.model.network().spec());
    net.init(cfg.seed);
    nn::Adam<float> adam(net.param_count(), cfg.learning_rate);
    std::vector<float> grad(net.param_count());
    std::vector<float> xb;
    std::vector<double> yb;
    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ 0x5eedf00dULL);
    bool diverged = false;

    for (int epoch = 1; epoch <= cfg.epochs && !diverged; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      std::shuffle(order.begin(), order.end(), rng);
      double epoch_loss = 0.0;
      for (int start = 0; start < n_train; start += cfg.batch_size) {
        const int b = std::min(cfg.batch_size, n_train - start);
        xb.resize(b * plane);
        yb.resize(static_cast<std::size_t>(b) * outputs);
        for (int i = 0; i < b; ++i) {
          const int k = order[start + i];
          std::copy_n(train_x.begin() + k * plane, plane, xb.begin() + i * plane);
          std::copy_n(train_y.begin() + static_cast<std::size_t>(k) * outputs, outputs, yb.begin() + i * outputs);
        }
        std::fill(grad.begin(), grad.end(), 0.0f);
        const double l = batch_loss<float>(net, xb, b, yb, cfg.gamma, grad);
        if (!std::isfinite(l)) {
          diverged = true;
          break;
        }
        epoch_loss += l * b;
        adam.step(net.params(), grad);
      }
      if (diverged) break;
      const double val = mean_loss(net, valid_x, valid_y, n_valid, cfg.gamma);
      if (!std::isfinite(val)) {
        diverged = true;
        break;
      }
      EpochLog log{static_cast<int>(ci), epoch, cfg.learning_rate, epoch_loss / n_train, val,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
      result.history.push_back(log);
      if (on_epoch) on_epoch(log);
      if (val < best) {
        best = val;
        best_params.assign(net.params().begin(), net.params().end());
        best_meta = {cfg.epochs, epoch, cfg.learning_rate, cfg.batch_size, cfg.gamma, cfg.seed, val, n_train};
        result.best_candidate = static_cast<int>(ci);
      }
    }
    if (diverged) result.diverged.push_back(static_cast<int>(ci));
  }

  if (best_params.empty()) fail(ErrorKind::Training, "every training candidate diverged");
  std::copy(best_params.begin(), best_params.end(), result.model.network().params().begin());
  result.model.meta() = best_meta;
  return result;
}

double r2_score(std::span<const double> preds, std::span<const double> gts) {
  if (preds.size() != gts.size()) fail(ErrorKind::DimensionMismatch, "prediction and ground-truth counts differ");
  if (gts.size() < 2) fail(ErrorKind::UndefinedVariance, "R^2 needs at least two samples");
  const double mean = std::accumulate(gts.begin(), gts.end(), 0.0) / static_cast<double>(gts.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    ss_res += (gts[i] - preds[i]) * (gts[i] - preds[i]);
    ss_tot += (gts[i] - mean) * (gts[i] - mean);
  }
  if (!(ss_tot > 0.0)) fail(ErrorKind::UndefinedVariance, "ground truth has zero variance");
  return 1.0 - ss_res / ss_tot;
}

EvalReport r2_score(std::span<const PsfParams> preds, std::span<const PsfParams> gts) {
  if (preds.size() != gts.size()) fail(ErrorKind::DimensionMismatch, "prediction and ground-truth counts differ");
  EvalReport report;
  report.n_total = static_cast<int>(gts.size());
  std::size_t n_params = 0;
  std::vector<std::vector<double>> p, g;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].invalid()) continue;
    if (p.empty()) {
      n_params = gts[i].a.size();
      p.resize(n_params);
      g.resize(n_params);
    }
    if (gts[i].a.size() != n_params || preds[i].a.size() != n_params)
      fail(ErrorKind::DimensionMismatch, "parameter vectors differ in length");
    for (std::size_t k = 0; k < n_params; ++k) {
      p[k].push_back(preds[i].a[k]);
      g[k].push_back(gts[i].a[k]);
    }
    ++report.n_valid;
  }
  if (report.n_valid < 2 || n_params == 0) fail(ErrorKind::UndefinedVariance, "fewer than two valid samples");
  for (std::size_t k = 0; k < n_params; ++k) report.r2_per_param.push_back(r2_score(p[k], g[k]));
  report.r2_mean = std::accumulate(report.r2_per_param.begin(), report.r2_per_param.end(), 0.0) /
                   static_cast<double>(n_params);
  return report;
}

EvalReport evaluate(const RegressorModel& model, const TrainingSet& set) {
  if (set.config.model != model.model()) fail(ErrorKind::ModelMismatch, "test set and model use different PSF models");
  std::vector<Image> patches;
  std::vector<PsfParams> gts;
  patches.reserve(set.samples.size());
  for (const auto& s : set.samples) {
    patches.push_back(s.patch);
    gts.push_back(s.params);
  }
  const auto outputs = model.forward_batch(patches);
  std::vector<PsfParams> preds;
  for (const auto& o : outputs) preds.push_back(model.to_params(o));
  return r2_score(preds, gts);
}

std::size_t ParamLattice::size() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.size();
  return n;
}

PsfParams ParamLattice::at(std::size_t index) const {
  PsfParams p{model, std::vector<double>(axes.size()), 0.0};
  for (std::size_t k = axes.size(); k-- > 0;) {
    p.a[k] = axes[k][index % axes[k].size()];
    index /= axes[k].size();
  }
  return p;
}

GridSearchOracle::GridSearchOracle(ParamLattice lattice, int kernel_side, const PupilConfig& pupil, Boundary boundary)
    : lattice_(std::move(lattice)), boundary_(boundary) {
  if (lattice_.size() == 0) fail(ErrorKind::Config, "empty parameter lattice");
  if (static_cast<int>(lattice_.axes.size()) != param_count(lattice_.model))
    fail(ErrorKind::DimensionMismatch, "lattice dimension does not match the PSF model");
  psfs_.reserve(lattice_.size());
  for (std::size_t i = 0; i < lattice_.size(); ++i) psfs_.push_back(render_psf(lattice_.at(i), kernel_side, pupil));
}

PsfParams GridSearchOracle::estimate(const Image& blurred, const Image& sharp) const {
  const int mx = sharp.width() - blurred.width();
  const int my = sharp.height() - blurred.height();
  if (mx < 0 || my < 0 || mx % 2 || my % 2)
    fail(ErrorKind::Size, "sharp reference must exceed the blurred patch by an equal margin on each side");
  const int r = psfs_.front().side() / 2;
  const Image padded = pad(sharp, r, r, boundary_);
  const int fw = fft::fast_size(padded.width());
  const int fh = fft::fast_size(padded.height());
  Image field(fw, fh);
  for (int y = 0; y < padded.height(); ++y)
    for (int x = 0; x < padded.width(); ++x) field(x, y) = padded(x, y);
  const auto spectrum = fft::forward(field);

  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < psfs_.size(); ++i) {
    auto s = spectrum;
    fft::multiply(s, fft::kernel_spectrum(psfs_[i].kernel, fw, fh));
    const Image out = fft::inverse(std::move(s));
    double cost = 0.0;
    for (int y = 0; y < blurred.height(); ++y)
      for (int x = 0; x < blurred.width(); ++x) {
        const double d = out(x + r + mx / 2, y + r + my / 2) - blurred(x, y);
        cost += d * d;
      }
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return lattice_.at(best);
}

PsfParams grid_search_estimate(const Image& blurred, const Image& sharp, const ParamLattice& lattice, int kernel_side,
                               const PupilConfig& pupil) {
  return GridSearchOracle(lattice, kernel_side, pupil).estimate(blurred, sharp);
}

void save_model(const std::filesystem::path& path, const RegressorModel& model) {
  const auto params = model.network().params();
  std::string blob(params.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float v = detail::to_little(params[i]);
    std::memcpy(blob.data() + i * sizeof(float), &v, sizeof(float));
  }
  json header = {{"format", "svpsf-regressor"},
                 {"version", 1},
                 {"arch", model.network().spec()},
                 {"psf_model", model.model()},
                 {"ranges", model.ranges()},
                 {"normalization",
                  {{"input", "per-patch standardization"},
                   {"std_floor", model.std_floor()},
                   {"targets", "unit interval"},
                   {"a0_activation", "sigmoid"}}},
                 {"training", model.meta()},
                 {"weights",
                  {{"count", params.size()},
                   {"bytes", blob.size()},
                   {"fnv1a", detail::fnv1a(blob.data(), blob.size())}}}};
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os.write(kModelMagic, sizeof(kModelMagic));
  detail::write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!os) fail(ErrorKind::Io, "failed writing " + path.string());
}

RegressorModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kModelMagic) || !detail::read_le(is, len) ||
      len > (1u << 24))
    fail(ErrorKind::Io, path.string() + " is not a regressor model file");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) fail(ErrorKind::Io, "truncated model header");
  try {
    const json header = json::parse(text);
    if (header.at("version").get<int>() != 1) fail(ErrorKind::Io, "unsupported model file version");
    RegressorModel model(header.at("psf_model").get<PsfModel>(), header.at("ranges").get<ParamRanges>(),
                         header.at("arch").get<nn::ArchSpec>());
    if (header.at("arch").at("outputs").get<int>() != model.output_count())
      fail(ErrorKind::ModelMismatch, "model output count does not match its PSF model");
    model.meta() = header.at("training").get<TrainingMeta>();
    const auto& w = header.at("weights");
    const auto count = w.at("count").get<std::size_t>();
    const auto bytes = w.at("bytes").get<std::size_t>();
    if (count != model.network().param_count() || bytes != count * sizeof(float))
      fail(ErrorKind::Io, "weight blob size does not match the architecture");
    std::string blob(bytes, '\0');
    if (!is.read(blob.data(), static_cast<std::streamsize>(bytes))) fail(ErrorKind::Io, "truncated weight blob");
    if (detail::fnv1a(blob.data(), blob.size()) != w.at("fnv1a").get<std::uint64_t>())
      fail(ErrorKind::Io, "weight checksum mismatch");
    auto params = model.network().params();
    for (std::size_t i = 0; i < count; ++i) {
      float v;
      std::memcpy(&v, blob.data() + i * sizeof(float), sizeof(float));
      params[i] = detail::to_little(v);
      if (!std::isfinite(params[i])) fail(ErrorKind::Numerical, "non-finite weight in model file");
    }
    return model;
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed model header: ") + e.what());
  }
}

}  // namespace svpsf
