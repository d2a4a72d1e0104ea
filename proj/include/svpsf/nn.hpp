#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

namespace svpsf::nn {

struct BlockSpec {
  int out_channels = 16;
  int stride = 2;
  bool operator==(const BlockSpec&) const = default;
};

// stem conv3x3 -> residual blocks -> global average pool -> dense(hidden) -> dense(outputs)
struct ArchSpec {
  int input_side = 64;
  int stem_channels = 16;
  std::vector<BlockSpec> blocks{{16, 2}, {32, 2}, {64, 2}};
  int hidden = 64;
  int outputs = 2;

  void validate() const;
  bool operator==(const ArchSpec&) const = default;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeom {
  int cin = 0, cout = 0, kernel = 3, stride = 1, pad = 1;
  int hin = 0, win = 0, hout = 0, wout = 0;
  std::size_t weight_offset = 0;  // cout x (cin * kernel * kernel), then cout biases
  std::size_t weight_count() const noexcept { return static_cast<std::size_t>(cout) * cin * kernel * kernel; }
};

struct DenseGeom {
  int in = 0, out = 0;
  std::size_t weight_offset = 0;  // out x in, then out biases
};

// Residual CNN with activations laid out as channels x (batch * height * width).
template <typename T>
class Network {
 public:
  struct BlockCache {
    Matrix<T> col1, act1, col2, colp, out;
  };
  struct Cache {
    int batch = 0;
    Matrix<T> stem_col, stem_out;
    std::vector<BlockCache> blocks;
    Matrix<T> pooled, hidden;
  };

  Network() = default;
  explicit Network(ArchSpec spec);

  const ArchSpec& spec() const noexcept { return spec_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  std::span<T> params() noexcept { return params_; }
  std::span<const T> params() const noexcept { return params_; }

  // He-style fan-in initialization, zero biases.
  void init(std::uint64_t seed);

  // input: batch patches of input_side^2 values each, contiguous. Returns raw outputs
  // (outputs x batch); no output nonlinearity is applied here.
  Matrix<T> forward(std::span<const T> input, int batch, Cache* cache = nullptr) const;
  // Accumulates dLoss/dparams into grad (same layout as params()).
  void backward(const Cache& cache, const Matrix<T>& d_out, std::span<T> grad) const;

 private:
  struct Block {
    ConvGeom conv1, conv2, proj;
    bool has_proj = false;
  };

  Matrix<T> conv_forward(const ConvGeom& g, const Matrix<T>& in, int batch, Matrix<T>* col_out) const;

  ArchSpec spec_;
  ConvGeom stem_;
  std::vector<Block> blocks_;
  DenseGeom dense1_, dense2_;
  int final_side_ = 0;
  std::vector<T> params_;
};

// Adam with bias correction.
template <typename T>
class Adam {
 public:
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<T> params, std::span<const T> grad);
  long steps() const noexcept { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

extern template class Network<float>;
extern template class Network<double>;
extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace svpsf::nn
