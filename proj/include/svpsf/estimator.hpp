#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "svpsf/dataset.hpp"
#include "svpsf/degrade.hpp"
#include "svpsf/image.hpp"
#include "svpsf/nn.hpp"
#include "svpsf/psf.hpp"

namespace svpsf {

struct TrainingMeta {
  int epochs = 0;  // epochs run for the selected candidate
  int best_epoch = 0;
  double learning_rate = 0.0;
  int batch_size = 0;
  double gamma = 1.0;
  std::uint64_t seed = 0;
  double best_val_loss = 0.0;
  int train_samples = 0;
  bool operator==(const TrainingMeta&) const = default;
};

// CNN regressor with outputs (a0~, u1~..uN~): a0~ in [0, 1] after a sigmoid, u~ linear in
// normalized [0, 1] parameter coordinates.
class RegressorModel {
 public:
  RegressorModel() = default;
  RegressorModel(PsfModel model, ParamRanges ranges, nn::ArchSpec arch = {});

  PsfModel model() const noexcept { return model_; }
  const ParamRanges& ranges() const noexcept { return ranges_; }
  int input_side() const noexcept { return net_.spec().input_side; }
  int output_count() const noexcept { return net_.spec().outputs; }
  double std_floor() const noexcept { return std_floor_; }

  nn::Network<float>& network() noexcept { return net_; }
  const nn::Network<float>& network() const noexcept { return net_; }
  TrainingMeta& meta() noexcept { return meta_; }
  const TrainingMeta& meta() const noexcept { return meta_; }

  std::vector<double> forward(const Image& patch) const;
  std::vector<std::vector<double>> forward_batch(std::span<const Image> patches) const;
  PsfParams to_params(std::span<const double> output) const;
  PsfParams estimate(const Image& patch) const { return to_params(forward(patch)); }

  bool operator==(const RegressorModel& other) const;

 private:
  PsfModel model_ = PsfModel::Gaussian1;
  ParamRanges ranges_;
  nn::Network<float> net_;
  TrainingMeta meta_;
  double std_floor_ = 1e-6;
};

// Zero mean, unit variance (std clamped at std_floor), computed in double.
std::vector<double> standardize(const Image& patch, double std_floor = 1e-6);

// Target vector (a0, normalized a1..aN).
std::vector<double> target_vector(const PsfParams& gt, const ParamRanges& ranges);

// E = gamma (a0 - a0~)^2 + (1 - a0) / (2N) sum_n (u_n - u_n~)^2 on (a0, u1..uN) vectors.
double loss(std::span<const double> pred, std::span<const double> target, double gamma = 1.0);
double loss(std::span<const double> pred, const PsfParams& gt, const ParamRanges& ranges, double gamma = 1.0);
// dE/dpred for the vector form.
std::vector<double> loss_gradient(std::span<const double> pred, std::span<const double> target, double gamma = 1.0);

// Mean loss over a batch through a network whose output 0 is squashed by a sigmoid; when grad
// is non-empty, accumulates dLoss/dweights into it. targets holds batch rows of (a0, u1..uN).
template <typename T>
double batch_loss(const nn::Network<T>& net, std::span<const T> input, int batch,
                  std::span<const double> targets, double gamma, std::span<T> grad = {});

struct TrainConfig {
  double learning_rate = 0.003;
  int epochs = 10;
  int batch_size = 32;
  double gamma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochLog {
  int candidate = 0;
  int epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  RegressorModel model;
  int best_candidate = -1;
  std::vector<EpochLog> history;
  std::vector<int> diverged;  // candidate indices aborted on a non-finite loss
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains one network per candidate config and keeps the weights of the (candidate, epoch)
// pair with the lowest validation loss.
TrainResult train(const TrainingSet& train_set, const TrainingSet& valid_set, std::span<const TrainConfig> grid,
                  const nn::ArchSpec& arch = {}, const EpochCallback& on_epoch = {});

struct EvalReport {
  std::vector<double> r2_per_param;
  double r2_mean = 0.0;
  int n_valid = 0;
  int n_total = 0;
};

// R^2 = 1 - SS_res / SS_tot over samples whose ground truth is valid (a0 < 0.5).
EvalReport r2_score(std::span<const PsfParams> preds, std::span<const PsfParams> gts);
double r2_score(std::span<const double> preds, std::span<const double> gts);

EvalReport evaluate(const RegressorModel& model, const TrainingSet& set);

// Cartesian product of per-parameter value lists.
struct ParamLattice {
  PsfModel model = PsfModel::Gaussian1;
  std::vector<std::vector<double>> axes;

  std::size_t size() const;
  PsfParams at(std::size_t index) const;
};

// Exhaustive least-squares fit of a blurred patch against a sharp reference. `sharp` may be
// larger than `blurred` by an equal margin on each side; the central region is compared.
class GridSearchOracle {
 public:
  GridSearchOracle(ParamLattice lattice, int kernel_side, const PupilConfig& pupil = {},
                   Boundary boundary = Boundary::Reflect);
  PsfParams estimate(const Image& blurred, const Image& sharp) const;
  std::size_t size() const noexcept { return psfs_.size(); }

 private:
  ParamLattice lattice_;
  std::vector<Psf> psfs_;
  Boundary boundary_;
};

PsfParams grid_search_estimate(const Image& blurred, const Image& sharp, const ParamLattice& lattice,
                               int kernel_side, const PupilConfig& pupil = {});

// "SVPSFNN1", u64 header length, JSON header, little-endian float32 weights.
void save_model(const std::filesystem::path& path, const RegressorModel& model);
RegressorModel load_model(const std::filesystem::path& path);

}  // namespace svpsf
