#pragma once

// Window aggregation transformer: learnable CLS token and positional
// embeddings, pre-LN encoder layers (self-attention + GELU feed-forward), and
// a final LayerNorm.

#include <cmath>
#include <string>
#include <vector>

#include "hithar/model/config.hpp"
#include "hithar/model/ops.hpp"

namespace hithar::model {

struct TransformerLayer {
  LayerNorm ln1, ln2;
  Linear q, k, v, o, ff1, ff2;
  int dim = 0, heads = 1;

  template <typename T>
  struct Cache {
    LayerNormCache<T> ln1, ln2;
    Mat<T> z1, q, k, v, o, attn_mask, x1, z2, f_pre, f_act, ff_mask;
    std::vector<Mat<T>> attn;  // per head, keys x queries; column i is query i's distribution
  };

  TransformerLayer() = default;
  TransformerLayer(Layout& layout, const std::string& name, const ModelConfig& cfg)
      : dim(cfg.embed_dim), heads(cfg.wat_heads) {
    ln1 = LayerNorm(layout, name + ".ln1", dim, cfg.ln_eps);
    q = Linear(layout, name + ".attn.q", dim, dim);
    k = Linear(layout, name + ".attn.k", dim, dim);
    v = Linear(layout, name + ".attn.v", dim, dim);
    o = Linear(layout, name + ".attn.out", dim, dim);
    ln2 = LayerNorm(layout, name + ".ln2", dim, cfg.ln_eps);
    ff1 = Linear(layout, name + ".ff1", dim, cfg.wat_ff);
    ff2 = Linear(layout, name + ".ff2", cfg.wat_ff, dim);
  }

  template <typename T>
  Mat<T> forward(const ParamStore<T>& p, const Mat<T>& x, double dropout, Mode mode, Rng* rng, Cache<T>& c) const {
    const Eigen::Index n = x.cols();
    const Eigen::Index dh = dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    c.z1 = ln1.forward(p, x, c.ln1);
    c.q = q.forward(p, c.z1);
    c.k = k.forward(p, c.z1);
    c.v = v.forward(p, c.z1);
    c.o.resize(dim, n);
    c.attn.resize(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Mat<T>& a = c.attn[static_cast<std::size_t>(h)];
      a = (c.k.middleRows(h * dh, dh).transpose() * c.q.middleRows(h * dh, dh)) * scale;
      softmax_columns(a);
      c.o.middleRows(h * dh, dh).noalias() = c.v.middleRows(h * dh, dh) * a;
    }
    Mat<T> attn_out = o.forward(p, c.o);
    c.attn_mask = dropout_mask<T>(attn_out.rows(), attn_out.cols(), dropout, mode, rng);
    apply_mask(attn_out, c.attn_mask);
    c.x1 = x + attn_out;

    c.z2 = ln2.forward(p, c.x1, c.ln2);
    c.f_pre = ff1.forward(p, c.z2);
    c.f_act = gelu(c.f_pre);
    Mat<T> ff_out = ff2.forward(p, c.f_act);
    c.ff_mask = dropout_mask<T>(ff_out.rows(), ff_out.cols(), dropout, mode, rng);
    apply_mask(ff_out, c.ff_mask);
    return c.x1 + ff_out;
  }

  template <typename T>
  Mat<T> backward(const ParamStore<T>& p, const Mat<T>& dy, const Cache<T>& c, ParamStore<T>& g) const {
    const Eigen::Index dh = dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Mat<T> dff = dy;
    apply_mask(dff, c.ff_mask);
    const Mat<T> dact = ff2.backward(p, c.f_act, dff, g);
    const Mat<T> dz2 = ff1.backward(p, c.z2, gelu_backward(c.f_pre, dact), g);
    Mat<T> dx1 = dy + ln2.backward(p, dz2, c.ln2, g);

    Mat<T> dattn = dx1;
    apply_mask(dattn, c.attn_mask);
    const Mat<T> d_o = o.backward(p, c.o, dattn, g);
    Mat<T> dq(dim, dy.cols()), dk(dim, dy.cols()), dv(dim, dy.cols());
    for (int h = 0; h < heads; ++h) {
      const Mat<T>& a = c.attn[static_cast<std::size_t>(h)];
      const auto doh = d_o.middleRows(h * dh, dh);
      dv.middleRows(h * dh, dh).noalias() = doh * a.transpose();
      const Mat<T> da = c.v.middleRows(h * dh, dh).transpose() * doh;
      const RowVec<T> inner = a.cwiseProduct(da).colwise().sum();
      const Mat<T> ds = a.cwiseProduct(da.rowwise() - inner) * scale;
      dk.middleRows(h * dh, dh).noalias() = c.q.middleRows(h * dh, dh) * ds.transpose();
      dq.middleRows(h * dh, dh).noalias() = c.k.middleRows(h * dh, dh) * ds;
    }
    Mat<T> dz1 = q.backward(p, c.z1, dq, g);
    dz1 += k.backward(p, c.z1, dk, g);
    dz1 += v.backward(p, c.z1, dv, g);
    return dx1 + ln1.backward(p, dz1, c.ln1, g);
  }
};

class WindowAggregator {
 public:
  template <typename T>
  struct Cache {
    std::vector<typename TransformerLayer::Cache<T>> layers;
    LayerNormCache<T> final_ln;
  };

  WindowAggregator() = default;
  WindowAggregator(Layout& layout, const ModelConfig& cfg) : cfg_(cfg) {
    cls_ = layout.embedding("wat.cls", cfg.embed_dim, 1);
    pos_ = layout.embedding("wat.pos", cfg.embed_dim, cfg.seq_len + 1);
    for (int i = 0; i < cfg.wat_layers; ++i)
      layers_.emplace_back(layout, "wat.layer" + std::to_string(i + 1), cfg);
    final_ln_ = LayerNorm(layout, "wat.final_ln", cfg.embed_dim, cfg.ln_eps);
  }

  /// e: embed_dim x seq_len. Returns embed_dim x (seq_len + 1); column 0 is h_cls.
  template <typename T>
  Mat<T> forward(const ParamStore<T>& p, const Mat<T>& e, Mode mode, Rng* rng, Cache<T>& c) const {
    if (e.rows() != cfg_.embed_dim || e.cols() != cfg_.seq_len)
      throw InputError("aggregator: expected " + std::to_string(cfg_.embed_dim) + " x " +
                       std::to_string(cfg_.seq_len) + " embeddings, got " + std::to_string(e.rows()) + " x " +
                       std::to_string(e.cols()));
    Mat<T> x(cfg_.embed_dim, cfg_.seq_len + 1);
    x.col(0) = p[cls_].col(0);
    x.rightCols(cfg_.seq_len) = e;
    x += p[pos_];
    c.layers.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i)
      x = layers_[i].forward(p, x, cfg_.dropout_wat, mode, rng, c.layers[i]);
    return final_ln_.forward(p, x, c.final_ln);
  }

  /// Returns the gradient with respect to the window embeddings.
  template <typename T>
  Mat<T> backward(const ParamStore<T>& p, const Mat<T>& dout, const Cache<T>& c, ParamStore<T>& g) const {
    Mat<T> dx = final_ln_.backward(p, dout, c.final_ln, g);
    for (std::size_t i = layers_.size(); i-- > 0;) dx = layers_[i].backward(p, dx, c.layers[i], g);
    g[pos_] += dx;
    g[cls_].col(0) += dx.col(0);
    return dx.rightCols(cfg_.seq_len);
  }

 private:
  ModelConfig cfg_;
  std::size_t cls_ = 0, pos_ = 0;
  std::vector<TransformerLayer> layers_;
  LayerNorm final_ln_;
};

}  // namespace hithar::model
