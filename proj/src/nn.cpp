#include "svpsf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "svpsf/error.hpp"

namespace svpsf::nn {
namespace {

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Matrix<T> im2col(const Matrix<T>& in, const ConvGeom& g, int batch) {
  const int k = g.kernel;
  const std::size_t in_plane = static_cast<std::size_t>(g.hin) * g.win;
  const std::size_t out_plane = static_cast<std::size_t>(g.hout) * g.wout;
  Matrix<T> col(static_cast<Eigen::Index>(g.cin) * k * k, static_cast<Eigen::Index>(batch * out_plane));
  for (int c = 0; c < g.cin; ++c) {
    const T* src = in.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col.row((c * k + ky) * k + kx).data();
        for (int b = 0; b < batch; ++b) {
          const T* plane = src + b * in_plane;
          T* out = dst + b * out_plane;
          for (int oy = 0; oy < g.hout; ++oy) {
            const int iy = oy * g.stride + ky - g.pad;
            T* row = out + static_cast<std::size_t>(oy) * g.wout;
            if (iy < 0 || iy >= g.hin) {
              std::fill(row, row + g.wout, T(0));
              continue;
            }
            const T* irow = plane + static_cast<std::size_t>(iy) * g.win;
            for (int ox = 0; ox < g.wout; ++ox) {
              const int ix = ox * g.stride + kx - g.pad;
              row[ox] = (ix >= 0 && ix < g.win) ? irow[ix] : T(0);
            }
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
Matrix<T> col2im(const Matrix<T>& col, const ConvGeom& g, int batch) {
  const int k = g.kernel;
  const std::size_t in_plane = static_cast<std::size_t>(g.hin) * g.win;
  const std::size_t out_plane = static_cast<std::size_t>(g.hout) * g.wout;
  Matrix<T> img = Matrix<T>::Zero(g.cin, static_cast<Eigen::Index>(batch * in_plane));
  for (int c = 0; c < g.cin; ++c) {
    T* dst = img.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col.row((c * k + ky) * k + kx).data();
        for (int b = 0; b < batch; ++b) {
          T* plane = dst + b * in_plane;
          const T* in = src + b * out_plane;
          for (int oy = 0; oy < g.hout; ++oy) {
            const int iy = oy * g.stride + ky - g.pad;
            if (iy < 0 || iy >= g.hin) continue;
            T* irow = plane + static_cast<std::size_t>(iy) * g.win;
            const T* row = in + static_cast<std::size_t>(oy) * g.wout;
            for (int ox = 0; ox < g.wout; ++ox) {
              const int ix = ox * g.stride + kx - g.pad;
              if (ix >= 0 && ix < g.win) irow[ix] += row[ox];
            }
          }
        }
      }
    }
  }
  return img;
}

template <typename T>
void relu_inplace(Matrix<T>& m) {
  m = m.cwiseMax(T(0));
}

template <typename T>
void relu_backward(Matrix<T>& d, const Matrix<T>& activated) {
  d = (activated.array() > T(0)).select(d, T(0));
}

ConvGeom make_conv(int cin, int cout, int kernel, int stride, int hin, std::size_t& offset) {
  ConvGeom g;
  g.cin = cin;
  g.cout = cout;
  g.kernel = kernel;
  g.stride = stride;
  g.pad = kernel / 2;
  g.hin = g.win = hin;
  g.hout = g.wout = (hin + 2 * g.pad - kernel) / stride + 1;
  g.weight_offset = offset;
  offset += g.weight_count() + cout;
  return g;
}

}  // namespace

void ArchSpec::validate() const {
  if (input_side < 4) fail(ErrorKind::Config, "network input side must be >= 4");
  if (stem_channels < 1 || hidden < 1 || outputs < 1) fail(ErrorKind::Config, "layer widths must be positive");
  int side = input_side;
  for (const auto& b : blocks) {
    if (b.out_channels < 1 || b.stride < 1) fail(ErrorKind::Config, "invalid residual block");
    side = (side - 1) / b.stride + 1;
  }
  if (side < 1) fail(ErrorKind::Config, "network downsamples below one pixel");
}

template <typename T>
Network<T>::Network(ArchSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  int side = spec_.input_side;
  stem_ = make_conv(1, spec_.stem_channels, 3, 1, side, offset);
  int channels = spec_.stem_channels;
  for (const auto& b : spec_.blocks) {
    Block blk;
    blk.conv1 = make_conv(channels, b.out_channels, 3, b.stride, side, offset);
    const int out_side = blk.conv1.hout;
    blk.conv2 = make_conv(b.out_channels, b.out_channels, 3, 1, out_side, offset);
    blk.has_proj = b.stride != 1 || b.out_channels != channels;
    if (blk.has_proj) blk.proj = make_conv(channels, b.out_channels, 1, b.stride, side, offset);
    blocks_.push_back(blk);
    channels = b.out_channels;
    side = out_side;
  }
  final_side_ = side;
  dense1_ = {channels, spec_.hidden, offset};
  offset += static_cast<std::size_t>(channels) * spec_.hidden + spec_.hidden;
  dense2_ = {spec_.hidden, spec_.outputs, offset};
  offset += static_cast<std::size_t>(spec_.hidden) * spec_.outputs + spec_.outputs;
  params_.assign(offset, T(0));
}

template <typename T>
void Network<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::fill(params_.begin(), params_.end(), T(0));
  auto fill = [&](std::size_t offset, std::size_t count, double stddev) {
    for (std::size_t i = 0; i < count; ++i) params_[offset + i] = static_cast<T>(stddev * normal(rng));
  };
  auto fill_conv = [&](const ConvGeom& g) {
    fill(g.weight_offset, g.weight_count(), std::sqrt(2.0 / (g.cin * g.kernel * g.kernel)));
  };
  fill_conv(stem_);
  for (const auto& b : blocks_) {
    fill_conv(b.conv1);
    fill_conv(b.conv2);
    if (b.has_proj) fill_conv(b.proj);
  }
  fill(dense1_.weight_offset, static_cast<std::size_t>(dense1_.in) * dense1_.out, std::sqrt(2.0 / dense1_.in));
  fill(dense2_.weight_offset, static_cast<std::size_t>(dense2_.in) * dense2_.out, std::sqrt(1.0 / dense2_.in));
}

template <typename T>
Matrix<T> Network<T>::conv_forward(const ConvGeom& g, const Matrix<T>& in, int batch, Matrix<T>* col_out) const {
  Matrix<T> col = im2col(in, g, batch);
  Eigen::Map<const Matrix<T>> w(params_.data() + g.weight_offset, g.cout, static_cast<Eigen::Index>(g.cin) * g.kernel * g.kernel);
  Eigen::Map<const Vector<T>> bias(params_.data() + g.weight_offset + g.weight_count(), g.cout);
  Matrix<T> out(g.cout, col.cols());
  out.noalias() = w * col;
  out.colwise() += bias;
  if (col_out) *col_out = std::move(col);
  return out;
}

template <typename T>
Matrix<T> Network<T>::forward(std::span<const T> input, int batch, Cache* cache) const {
  const std::size_t plane = static_cast<std::size_t>(spec_.input_side) * spec_.input_side;
  if (batch < 1 || input.size() != plane * batch)
    fail(ErrorKind::DimensionMismatch, "network input size does not match the architecture");
  Matrix<T> x = Eigen::Map<const Matrix<T>>(input.data(), 1, static_cast<Eigen::Index>(plane * batch));
  if (cache) {
    cache->batch = batch;
    cache->blocks.assign(blocks_.size(), {});
  }

  x = conv_forward(stem_, x, batch, cache ? &cache->stem_col : nullptr);
  relu_inplace(x);
  if (cache) cache->stem_out = x;

  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    BlockCache* bc = cache ? &cache->blocks[i] : nullptr;
    Matrix<T> a1 = conv_forward(b.conv1, x, batch, bc ? &bc->col1 : nullptr);
    relu_inplace(a1);
    Matrix<T> out = conv_forward(b.conv2, a1, batch, bc ? &bc->col2 : nullptr);
    if (b.has_proj)
      out += conv_forward(b.proj, x, batch, bc ? &bc->colp : nullptr);
    else
      out += x;
    relu_inplace(out);
    if (bc) {
      bc->act1 = std::move(a1);
      bc->out = out;
    }
    x = std::move(out);
  }

  const int hw = final_side_ * final_side_;
  Matrix<T> pooled(x.rows(), batch);
  for (Eigen::Index c = 0; c < x.rows(); ++c)
    for (int b = 0; b < batch; ++b) pooled(c, b) = x.row(c).segment(static_cast<Eigen::Index>(b) * hw, hw).mean();

  Eigen::Map<const Matrix<T>> w1(params_.data() + dense1_.weight_offset, dense1_.out, dense1_.in);
  Eigen::Map<const Vector<T>> b1(params_.data() + dense1_.weight_offset + static_cast<std::size_t>(dense1_.in) * dense1_.out, dense1_.out);
  Matrix<T> hidden(dense1_.out, batch);
  hidden.noalias() = w1 * pooled;
  hidden.colwise() += b1;
  relu_inplace(hidden);

  Eigen::Map<const Matrix<T>> w2(params_.data() + dense2_.weight_offset, dense2_.out, dense2_.in);
  Eigen::Map<const Vector<T>> b2(params_.data() + dense2_.weight_offset + static_cast<std::size_t>(dense2_.in) * dense2_.out, dense2_.out);
  Matrix<T> out(dense2_.out, batch);
  out.noalias() = w2 * hidden;
  out.colwise() += b2;

  if (cache) {
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename T>
void Network<T>::backward(const Cache& cache, const Matrix<T>& d_out, std::span<T> grad) const {
  if (grad.size() != params_.size()) fail(ErrorKind::DimensionMismatch, "gradient buffer size mismatch");
  const int batch = cache.batch;
  if (d_out.rows() != spec_.outputs || d_out.cols() != batch)
    fail(ErrorKind::DimensionMismatch, "output gradient shape mismatch");

  auto conv_backward = [&](const ConvGeom& g, const Matrix<T>& d, const Matrix<T>& col, bool need_input) {
    const Eigen::Index kk = static_cast<Eigen::Index>(g.cin) * g.kernel * g.kernel;
    Eigen::Map<Matrix<T>> gw(grad.data() + g.weight_offset, g.cout, kk);
    Eigen::Map<Vector<T>> gb(grad.data() + g.weight_offset + g.weight_count(), g.cout);
    gw.noalias() += d * col.transpose();
    gb += d.rowwise().sum();
    if (!need_input) return Matrix<T>();
    Eigen::Map<const Matrix<T>> w(params_.data() + g.weight_offset, g.cout, kk);
    Matrix<T> dcol(kk, d.cols());
    dcol.noalias() = w.transpose() * d;
    return col2im(dcol, g, batch);
  };

  // Dense head.
  Eigen::Map<const Matrix<T>> w2(params_.data() + dense2_.weight_offset, dense2_.out, dense2_.in);
  Eigen::Map<Matrix<T>> gw2(grad.data() + dense2_.weight_offset, dense2_.out, dense2_.in);
  Eigen::Map<Vector<T>> gb2(grad.data() + dense2_.weight_offset + static_cast<std::size_t>(dense2_.in) * dense2_.out, dense2_.out);
  gw2.noalias() += d_out * cache.hidden.transpose();
  gb2 += d_out.rowwise().sum();
  Matrix<T> d_hidden = w2.transpose() * d_out;
  relu_backward(d_hidden, cache.hidden);

  Eigen::Map<const Matrix<T>> w1(params_.data() + dense1_.weight_offset, dense1_.out, dense1_.in);
  Eigen::Map<Matrix<T>> gw1(grad.data() + dense1_.weight_offset, dense1_.out, dense1_.in);
  Eigen::Map<Vector<T>> gb1(grad.data() + dense1_.weight_offset + static_cast<std::size_t>(dense1_.in) * dense1_.out, dense1_.out);
  gw1.noalias() += d_hidden * cache.pooled.transpose();
  gb1 += d_hidden.rowwise().sum();
  const Matrix<T> d_pooled = w1.transpose() * d_hidden;

  const int hw = final_side_ * final_side_;
  Matrix<T> d(d_pooled.rows(), static_cast<Eigen::Index>(batch) * hw);
  for (Eigen::Index c = 0; c < d.rows(); ++c)
    for (int b = 0; b < batch; ++b)
      d.row(c).segment(static_cast<Eigen::Index>(b) * hw, hw).setConstant(d_pooled(c, b) / T(hw));

  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const auto& b = blocks_[i];
    const auto& bc = cache.blocks[i];
    relu_backward(d, bc.out);
    Matrix<T> d_a1 = conv_backward(b.conv2, d, bc.col2, true);
    relu_backward(d_a1, bc.act1);
    Matrix<T> d_in = conv_backward(b.conv1, d_a1, bc.col1, true);
    if (b.has_proj)
      d_in += conv_backward(b.proj, d, bc.colp, true);
    else
      d_in += d;
    d = std::move(d_in);
  }

  relu_backward(d, cache.stem_out);
  conv_backward(stem_, d, cache.stem_col, false);
}

template <typename T>
Adam<T>::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

template <typename T>
void Adam<T>::step(std::span<T> params, std::span<const T> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    fail(ErrorKind::DimensionMismatch, "Adam state size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g * g;
    const double update = lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    params[i] = static_cast<T>(params[i] - update);
  }
}

template class Network<float>;
template class Network<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace svpsf::nn
