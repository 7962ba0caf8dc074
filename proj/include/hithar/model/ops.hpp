#pragma once

// Forward/backward primitives. Activations are column-major Eigen matrices;
// inside the window encoder a batch of `nw` windows of length `len` is laid
// out time-major: column t * nw + w holds timestep t of window w.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hithar/core/rng.hpp"
#include "hithar/model/params.hpp"

namespace hithar::model {

enum class Mode { Train, Eval };

template <typename T>
inline T sigmoid(T x) {
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

template <typename T>
inline T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2.0)));
}

template <typename T>
inline T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2.0)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <typename T>
Mat<T> gelu(const Mat<T>& x) {
  return x.unaryExpr([](T v) { return gelu(v); });
}

template <typename T>
Mat<T> gelu_backward(const Mat<T>& pre, const Mat<T>& dy) {
  return dy.cwiseProduct(pre.unaryExpr([](T v) { return gelu_grad(v); }));
}

template <typename T>
Mat<T> sigmoid(const Mat<T>& x) {
  return x.unaryExpr([](T v) { return sigmoid(v); });
}

/// Column-wise softmax, in place.
template <typename T>
void softmax_columns(Mat<T>& x) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto col = x.col(c);
    const T m = col.maxCoeff();
    col = (col.array() - m).exp();
    col /= col.sum();
  }
}

/// Adds a per-row bias (stored as rows x 1) to every column.
template <typename T>
void add_bias(Mat<T>& y, const Mat<T>& b) {
  y.colwise() += b.col(0);
}

template <typename T>
void accumulate_bias_grad(const Mat<T>& dy, Mat<T>& db) {
  db.col(0) += dy.rowwise().sum();
}

// --- same-padded dilated 1-D convolution via im2col -------------------------

/// col rows j*cin .. j*cin+cin-1 hold the input shifted by (j - (k-1)/2) * d.
template <typename T>
void im2col(const Mat<T>& x, Eigen::Index nw, int kernel, int dilation, Mat<T>& col) {
  const Eigen::Index cin = x.rows();
  const Eigen::Index len = x.cols() / nw;
  col.setZero(cin * kernel, x.cols());
  const int half = (kernel - 1) / 2;
  for (int j = 0; j < kernel; ++j) {
    const Eigen::Index shift = static_cast<Eigen::Index>(j - half) * dilation;
    const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index t1 = std::min<Eigen::Index>(len, len - shift);
    if (t1 <= t0) continue;
    col.block(j * cin, t0 * nw, cin, (t1 - t0) * nw) = x.block(0, (t0 + shift) * nw, cin, (t1 - t0) * nw);
  }
}

template <typename T>
void col2im_add(const Mat<T>& dcol, Eigen::Index nw, int kernel, int dilation, Mat<T>& dx) {
  const Eigen::Index cin = dx.rows();
  const Eigen::Index len = dx.cols() / nw;
  const int half = (kernel - 1) / 2;
  for (int j = 0; j < kernel; ++j) {
    const Eigen::Index shift = static_cast<Eigen::Index>(j - half) * dilation;
    const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index t1 = std::min<Eigen::Index>(len, len - shift);
    if (t1 <= t0) continue;
    dx.block(0, (t0 + shift) * nw, cin, (t1 - t0) * nw) += dcol.block(j * cin, t0 * nw, cin, (t1 - t0) * nw);
  }
}

struct Conv1d {
  std::size_t w = 0, b = 0;
  int cin = 0, cout = 0, kernel = 1, dilation = 1;

  Conv1d() = default;
  Conv1d(Layout& layout, const std::string& name, int cin_, int cout_, int kernel_, int dilation_)
      : cin(cin_), cout(cout_), kernel(kernel_), dilation(dilation_) {
    w = layout.weight(name + ".weight", cout, static_cast<Eigen::Index>(cin) * kernel,
                      static_cast<Eigen::Index>(cin) * kernel);
    b = layout.bias(name + ".bias", cout);
  }

  template <typename T>
  void forward_add(const ParamStore<T>& p, const Mat<T>& x, Eigen::Index nw, Mat<T>& col, Mat<T>& y) const {
    im2col(x, nw, kernel, dilation, col);
    y.noalias() += p[w] * col;
    add_bias(y, p[b]);
  }

  template <typename T>
  void backward(const ParamStore<T>& p, const Mat<T>& dy, const Mat<T>& col, Eigen::Index nw,
                ParamStore<T>& g, Mat<T>& dx) const {
    g[w].noalias() += dy * col.transpose();
    accumulate_bias_grad(dy, g[b]);
    Mat<T> dcol = p[w].transpose() * dy;
    col2im_add(dcol, nw, kernel, dilation, dx);
  }
};

// --- layer norm over rows (one normalization per column) --------------------

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  RowVec<T> inv_std;
};

struct LayerNorm {
  std::size_t gamma = 0, beta = 0;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(Layout& layout, const std::string& name, int dim, double eps_) : eps(eps_) {
    gamma = layout.norm_scale(name + ".gamma", dim);
    beta = layout.norm_shift(name + ".beta", dim);
  }

  template <typename T>
  Mat<T> forward(const ParamStore<T>& p, const Mat<T>& x, LayerNormCache<T>& c) const {
    const T n = static_cast<T>(x.rows());
    const RowVec<T> mean = x.colwise().sum() / n;
    Mat<T> xc = x.rowwise() - mean;
    const RowVec<T> var = xc.array().square().colwise().sum() / n;
    c.inv_std = (var.array() + static_cast<T>(eps)).rsqrt();
    c.xhat = xc.array().rowwise() * c.inv_std.array();
    Mat<T> y = c.xhat.array().colwise() * p[gamma].col(0).array();
    y.colwise() += p[beta].col(0);
    return y;
  }

  template <typename T>
  Mat<T> backward(const ParamStore<T>& p, const Mat<T>& dy, const LayerNormCache<T>& c, ParamStore<T>& g) const {
    const T n = static_cast<T>(dy.rows());
    g[gamma].col(0) += dy.cwiseProduct(c.xhat).rowwise().sum();
    g[beta].col(0) += dy.rowwise().sum();
    const Mat<T> dxhat = dy.array().colwise() * p[gamma].col(0).array();
    const RowVec<T> mean_d = dxhat.colwise().sum() / n;
    const RowVec<T> mean_dx = dxhat.cwiseProduct(c.xhat).colwise().sum() / n;
    Mat<T> dx = dxhat.rowwise() - mean_d;
    dx -= (c.xhat.array().rowwise() * mean_dx.array()).matrix();
    return dx.array().rowwise() * c.inv_std.array();
  }
};

struct Linear {
  std::size_t w = 0;
  std::size_t b = 0;
  bool has_bias = true;

  Linear() = default;
  Linear(Layout& layout, const std::string& name, int in, int out, bool bias = true) : has_bias(bias) {
    w = layout.weight(name + ".weight", out, in, in);
    if (bias) b = layout.bias(name + ".bias", out);
  }

  template <typename T>
  Mat<T> forward(const ParamStore<T>& p, const Mat<T>& x) const {
    Mat<T> y = p[w] * x;
    if (has_bias) add_bias(y, p[b]);
    return y;
  }

  /// Accumulates weight/bias grads; returns dx.
  template <typename T>
  Mat<T> backward(const ParamStore<T>& p, const Mat<T>& x, const Mat<T>& dy, ParamStore<T>& g) const {
    g[w].noalias() += dy * x.transpose();
    if (has_bias) accumulate_bias_grad(dy, g[b]);
    return p[w].transpose() * dy;
  }
};

/// Inverted dropout mask (kept entries scaled by 1/(1-p)); empty when inactive.
template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Mode mode, Rng* rng) {
  if (mode != Mode::Train || p <= 0.0 || rng == nullptr) return {};
  Mat<T> mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : T(0);
  return mask;
}

template <typename T>
void apply_mask(Mat<T>& x, const Mat<T>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

}  // namespace hithar::model
