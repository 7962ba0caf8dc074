#pragma once

// Window-level encoder: stem conv, multi-dilation SE blocks, BiGRU,
// attention pooling and a linear projection to the embedding dimension.

#include <string>
#include <vector>

#include "hithar/model/config.hpp"
#include "hithar/model/ops.hpp"

namespace hithar::model {

/// Parallel dilated branches summed, LayerNorm, GELU, squeeze-and-excitation
/// recalibration, residual when widths match, dropout.
struct DilationBlock {
  std::vector<Conv1d> branches;
  LayerNorm norm;
  Linear se_reduce, se_expand;
  int cin = 0, cout = 0;
  bool residual = false;

  template <typename T>
  struct Cache {
    std::vector<Mat<T>> cols;
    LayerNormCache<T> ln;
    Mat<T> pre_act, act, z, u_pre, u, s, mask;
  };

  DilationBlock() = default;
  DilationBlock(Layout& layout, const std::string& name, const ModelConfig& cfg, int cin_, int cout_)
      : cin(cin_), cout(cout_), residual(cin_ == cout_) {
    for (int d : cfg.dilations)
      branches.emplace_back(layout, name + ".conv_d" + std::to_string(d), cin, cout, cfg.block_kernel, d);
    norm = LayerNorm(layout, name + ".norm", cout, cfg.ln_eps);
    const int hidden = cout / cfg.se_reduction;
    se_reduce = Linear(layout, name + ".se_reduce", cout, hidden);
    se_expand = Linear(layout, name + ".se_expand", hidden, cout);
  }

  template <typename T>
  Mat<T> forward(const ParamStore<T>& p, const Mat<T>& x, Eigen::Index nw, double dropout, Mode mode, Rng* rng,
                 Cache<T>& c) const {
    const Eigen::Index len = x.cols() / nw;
    Mat<T> y = Mat<T>::Zero(cout, x.cols());
    c.cols.resize(branches.size());
    for (std::size_t i = 0; i < branches.size(); ++i) branches[i].forward_add(p, x, nw, c.cols[i], y);
    c.pre_act = norm.forward(p, y, c.ln);
    c.act = gelu(c.pre_act);

    // squeeze: per-window mean over time
    c.z = Mat<T>::Zero(cout, nw);
    for (Eigen::Index t = 0; t < len; ++t) c.z += c.act.middleCols(t * nw, nw);
    c.z /= static_cast<T>(len);
    c.u_pre = se_reduce.forward(p, c.z);
    c.u = c.u_pre.cwiseMax(T(0));
    c.s = sigmoid<T>(se_expand.forward(p, c.u));

    Mat<T> out(cout, x.cols());
    for (Eigen::Index t = 0; t < len; ++t)
      out.middleCols(t * nw, nw) = c.act.middleCols(t * nw, nw).cwiseProduct(c.s);
    if (residual) out += x;
    c.mask = dropout_mask<T>(out.rows(), out.cols(), dropout, mode, rng);
    apply_mask(out, c.mask);
    return out;
  }

  template <typename T>
  Mat<T> backward(const ParamStore<T>& p, Mat<T> dout, Eigen::Index nw, const Cache<T>& c, ParamStore<T>& g) const {
    const Eigen::Index len = dout.cols() / nw;
    apply_mask(dout, c.mask);

    Mat<T> dact(cout, dout.cols());
    Mat<T> ds = Mat<T>::Zero(cout, nw);
    for (Eigen::Index t = 0; t < len; ++t) {
      dact.middleCols(t * nw, nw) = dout.middleCols(t * nw, nw).cwiseProduct(c.s);
      ds += dout.middleCols(t * nw, nw).cwiseProduct(c.act.middleCols(t * nw, nw));
    }
    const Mat<T> ds_pre = ds.cwiseProduct(c.s.cwiseProduct((Mat<T>::Ones(c.s.rows(), c.s.cols()) - c.s)));
    Mat<T> du = se_expand.backward(p, c.u, ds_pre, g);
    du = du.cwiseProduct(c.u_pre.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); }));
    const Mat<T> dz = se_reduce.backward(p, c.z, du, g) / static_cast<T>(len);
    for (Eigen::Index t = 0; t < len; ++t) dact.middleCols(t * nw, nw) += dz;

    const Mat<T> dpre = gelu_backward(c.pre_act, dact);
    const Mat<T> dy = norm.backward(p, dpre, c.ln, g);
    Mat<T> dx = residual ? dout : Mat<T>::Zero(cin, dout.cols());
    for (std::size_t i = 0; i < branches.size(); ++i) branches[i].backward(p, dy, c.cols[i], nw, g, dx);
    return dx;
  }
};

/// One direction of a GRU (PyTorch gate convention, h0 = 0).
struct GruDirection {
  std::size_t w_ih = 0, w_hh = 0, b_ih = 0, b_hh = 0;
  int in = 0, hidden = 0;
  bool reverse = false;

  template <typename T>
  struct Cache {
    Mat<T> r, z, n, gh_n, h_prev;  // hidden x (len * nw)
  };

  GruDirection() = default;
  GruDirection(Layout& layout, const std::string& name, int in_, int hidden_, bool reverse_)
      : in(in_), hidden(hidden_), reverse(reverse_) {
    w_ih = layout.weight(name + ".w_ih", 3 * hidden, in, hidden);
    w_hh = layout.weight(name + ".w_hh", 3 * hidden, hidden, hidden);
    b_ih = layout.bias(name + ".b_ih", 3 * hidden);
    b_hh = layout.bias(name + ".b_hh", 3 * hidden);
  }

  /// Writes hidden states into rows [row0, row0 + hidden) of `out`.
  template <typename T>
  void forward(const ParamStore<T>& p, const Mat<T>& x, Eigen::Index nw, Cache<T>& c, Mat<T>& out,
               Eigen::Index row0) const {
    const Eigen::Index n_cols = x.cols();
    const Eigen::Index len = n_cols / nw;
    const Eigen::Index H = hidden;
    Mat<T> gi = p[w_ih] * x;
    add_bias(gi, p[b_ih]);
    c.r.resize(H, n_cols);
    c.z.resize(H, n_cols);
    c.n.resize(H, n_cols);
    c.gh_n.resize(H, n_cols);
    c.h_prev.resize(H, n_cols);
    Mat<T> h = Mat<T>::Zero(H, nw);
    Mat<T> gh(3 * H, nw);
    for (Eigen::Index s = 0; s < len; ++s) {
      const Eigen::Index t = reverse ? len - 1 - s : s;
      const Eigen::Index c0 = t * nw;
      gh.noalias() = p[w_hh] * h;
      add_bias(gh, p[b_hh]);
      c.h_prev.middleCols(c0, nw) = h;
      auto r = c.r.middleCols(c0, nw);
      auto z = c.z.middleCols(c0, nw);
      auto n = c.n.middleCols(c0, nw);
      r = (gi.block(0, c0, H, nw) + gh.topRows(H)).unaryExpr([](T v) { return sigmoid(v); });
      z = (gi.block(H, c0, H, nw) + gh.middleRows(H, H)).unaryExpr([](T v) { return sigmoid(v); });
      c.gh_n.middleCols(c0, nw) = gh.bottomRows(H);
      n = (gi.block(2 * H, c0, H, nw) + r.cwiseProduct(gh.bottomRows(H))).array().tanh().matrix();
      h = (n - z.cwiseProduct(n)) + z.cwiseProduct(h);
      out.block(row0, c0, H, nw) = h;
    }
  }

  template <typename T>
  Mat<T> backward(const ParamStore<T>& p, const Mat<T>& x, const Mat<T>& dout, Eigen::Index row0, Eigen::Index nw,
                  const Cache<T>& c, ParamStore<T>& g) const {
    const Eigen::Index n_cols = x.cols();
    const Eigen::Index len = n_cols / nw;
    const Eigen::Index H = hidden;
    Mat<T> dgi(3 * H, n_cols), dgh(3 * H, n_cols);
    Mat<T> dh_next = Mat<T>::Zero(H, nw);
    for (Eigen::Index s = len - 1; s >= 0; --s) {
      const Eigen::Index t = reverse ? len - 1 - s : s;
      const Eigen::Index c0 = t * nw;
      const auto r = c.r.middleCols(c0, nw);
      const auto z = c.z.middleCols(c0, nw);
      const auto n = c.n.middleCols(c0, nw);
      const auto hp = c.h_prev.middleCols(c0, nw);
      const Mat<T> dh = dout.block(row0, c0, H, nw) + dh_next;
      const Mat<T> dn = dh - dh.cwiseProduct(z);
      const Mat<T> dz = dh.cwiseProduct(hp - n);
      const Mat<T> dpre_n = dn.array() * (T(1) - n.array().square());
      const Mat<T> dr = dpre_n.cwiseProduct(c.gh_n.middleCols(c0, nw));
      const Mat<T> dpre_r = dr.array() * r.array() * (T(1) - r.array());
      const Mat<T> dpre_z = dz.array() * z.array() * (T(1) - z.array());
      dgi.block(0, c0, H, nw) = dpre_r;
      dgi.block(H, c0, H, nw) = dpre_z;
      dgi.block(2 * H, c0, H, nw) = dpre_n;
      dgh.block(0, c0, H, nw) = dpre_r;
      dgh.block(H, c0, H, nw) = dpre_z;
      dgh.block(2 * H, c0, H, nw) = dpre_n.cwiseProduct(r);
      dh_next = dh.cwiseProduct(z);
      dh_next.noalias() += p[w_hh].transpose() * dgh.middleCols(c0, nw);
    }
    g[w_hh].noalias() += dgh * c.h_prev.transpose();
    accumulate_bias_grad(dgh, g[b_hh]);
    g[w_ih].noalias() += dgi * x.transpose();
    accumulate_bias_grad(dgi, g[b_ih]);
    return p[w_ih].transpose() * dgi;
  }
};

/// Additive attention over timesteps: score = v . tanh(W h + b), softmax per window.
struct AttentionPool {
  std::size_t w = 0, b = 0, v = 0;
  int in = 0, dim = 0;

  template <typename T>
  struct Cache {
    Mat<T> a;      // dim x (len * nw)
    Mat<T> alpha;  // len x nw
  };

  AttentionPool() = default;
  AttentionPool(Layout& layout, const std::string& name, int in_, int dim_) : in(in_), dim(dim_) {
    w = layout.weight(name + ".weight", dim, in, in);
    b = layout.bias(name + ".bias", dim);
    v = layout.weight(name + ".score", dim, 1, dim);
  }

  template <typename T>
  Mat<T> forward(const ParamStore<T>& p, const Mat<T>& h, Eigen::Index nw, Cache<T>& c) const {
    const Eigen::Index len = h.cols() / nw;
    c.a = p[w] * h;
    add_bias(c.a, p[b]);
    c.a = c.a.array().tanh().matrix();
    const RowVec<T> score = p[v].col(0).transpose() * c.a;
    c.alpha.resize(len, nw);
    for (Eigen::Index t = 0; t < len; ++t) c.alpha.row(t) = score.segment(t * nw, nw);
    softmax_columns(c.alpha);
    Mat<T> pooled = Mat<T>::Zero(h.rows(), nw);
    for (Eigen::Index t = 0; t < len; ++t)
      pooled += (h.middleCols(t * nw, nw).array().rowwise() * c.alpha.row(t).array()).matrix();
    return pooled;
  }

  template <typename T>
  Mat<T> backward(const ParamStore<T>& p, const Mat<T>& h, const Mat<T>& dpooled, Eigen::Index nw, const Cache<T>& c,
                  ParamStore<T>& g) const {
    const Eigen::Index len = h.cols() / nw;
    Mat<T> dh(h.rows(), h.cols());
    Mat<T> dalpha(len, nw);
    for (Eigen::Index t = 0; t < len; ++t) {
      dh.middleCols(t * nw, nw) = dpooled.array().rowwise() * c.alpha.row(t).array();
      dalpha.row(t) = h.middleCols(t * nw, nw).cwiseProduct(dpooled).colwise().sum();
    }
    const RowVec<T> inner = c.alpha.cwiseProduct(dalpha).colwise().sum();
    const Mat<T> dscore_tm = c.alpha.cwiseProduct(dalpha.rowwise() - inner);  // len x nw
    RowVec<T> dscore(h.cols());
    for (Eigen::Index t = 0; t < len; ++t) dscore.segment(t * nw, nw) = dscore_tm.row(t);
    g[v].col(0).noalias() += c.a * dscore.transpose();
    const Mat<T> da = (p[v].col(0) * dscore).array() * (T(1) - c.a.array().square());
    g[w].noalias() += da * h.transpose();
    accumulate_bias_grad(da, g[b]);
    dh.noalias() += p[w].transpose() * da;
    return dh;
  }
};

class WindowEncoder {
 public:
  template <typename T>
  struct Cache {
    Mat<T> stem_col, stem_pre;
    std::vector<Mat<T>> block_in;  // input of each block
    std::vector<typename DilationBlock::Cache<T>> blocks;
    Mat<T> gru_in, gru_out, pooled;
    typename GruDirection::Cache<T> fwd, bwd;
    typename AttentionPool::Cache<T> pool;
  };

  WindowEncoder() = default;
  WindowEncoder(Layout& layout, const ModelConfig& cfg) : cfg_(cfg) {
    stem_ = Conv1d(layout, "wle.stem", cfg.in_channels, cfg.stem_channels, cfg.stem_kernel, 1);
    int width = cfg.stem_channels;
    for (std::size_t i = 0; i < cfg.block_channels.size(); ++i) {
      blocks_.emplace_back(layout, "wle.block" + std::to_string(i + 1), cfg, width, cfg.block_channels[i]);
      width = cfg.block_channels[i];
    }
    gru_fwd_ = GruDirection(layout, "wle.gru.fwd", width, cfg.gru_hidden, false);
    gru_bwd_ = GruDirection(layout, "wle.gru.bwd", width, cfg.gru_hidden, true);
    pool_ = AttentionPool(layout, "wle.attn_pool", 2 * cfg.gru_hidden, cfg.attn_pool_dim);
    proj_ = Linear(layout, "wle.proj", 2 * cfg.gru_hidden, cfg.embed_dim);
  }

  /// x: in_channels x (window_len * nw), time-major. Returns embed_dim x nw.
  template <typename T>
  Mat<T> forward(const ParamStore<T>& p, const Mat<T>& x, Eigen::Index nw, Mode mode, Rng* rng, Cache<T>& c) const {
    if (x.rows() != cfg_.in_channels || x.cols() != static_cast<Eigen::Index>(cfg_.window_len) * nw)
      throw InputError("window encoder: expected " + std::to_string(cfg_.in_channels) + " x " +
                       std::to_string(cfg_.window_len * nw) + " input, got " + std::to_string(x.rows()) + " x " +
                       std::to_string(x.cols()));
    c.stem_pre = Mat<T>::Zero(cfg_.stem_channels, x.cols());
    stem_.forward_add(p, x, nw, c.stem_col, c.stem_pre);
    Mat<T> h = gelu(c.stem_pre);
    c.block_in.resize(blocks_.size());
    c.blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      c.block_in[i] = h;
      h = blocks_[i].forward(p, c.block_in[i], nw, cfg_.dropout_wle, mode, rng, c.blocks[i]);
    }
    c.gru_in = std::move(h);
    c.gru_out.resize(2 * cfg_.gru_hidden, c.gru_in.cols());
    gru_fwd_.forward(p, c.gru_in, nw, c.fwd, c.gru_out, 0);
    gru_bwd_.forward(p, c.gru_in, nw, c.bwd, c.gru_out, cfg_.gru_hidden);
    c.pooled = pool_.forward(p, c.gru_out, nw, c.pool);
    return proj_.forward(p, c.pooled);
  }

  template <typename T>
  void backward(const ParamStore<T>& p, const Mat<T>& de, Eigen::Index nw, const Cache<T>& c, ParamStore<T>& g) const {
    const Mat<T> dpooled = proj_.backward(p, c.pooled, de, g);
    const Mat<T> dgru_out = pool_.backward(p, c.gru_out, dpooled, nw, c.pool, g);
    Mat<T> dh = gru_fwd_.backward(p, c.gru_in, dgru_out, 0, nw, c.fwd, g);
    dh += gru_bwd_.backward(p, c.gru_in, dgru_out, cfg_.gru_hidden, nw, c.bwd, g);
    for (std::size_t i = blocks_.size(); i-- > 0;) dh = blocks_[i].backward(p, std::move(dh), nw, c.blocks[i], g);
    const Mat<T> dstem = gelu_backward(c.stem_pre, dh);
    Mat<T> dx = Mat<T>::Zero(cfg_.in_channels, dstem.cols());
    stem_.backward(p, dstem, c.stem_col, nw, g, dx);
  }

  const std::vector<DilationBlock>& blocks() const { return blocks_; }

 private:
  ModelConfig cfg_;
  Conv1d stem_;
  std::vector<DilationBlock> blocks_;
  GruDirection gru_fwd_, gru_bwd_;
  AttentionPool pool_;
  Linear proj_;
};

}  // namespace hithar::model
