#pragma once

#include <memory>
#include <string>

#include "hithar/model/config.hpp"
#include "hithar/model/ops.hpp"
#include "hithar/model/params.hpp"
#include "hithar/model/window_aggregator.hpp"
#include "hithar/model/window_encoder.hpp"
#include "hithar/signal/windows.hpp"

namespace hithar::model {

/// All matrices are column-per-item: column t of `e`, `h`, `action_logits`
/// belongs to window t.
template <typename T>
struct ForwardOutput {
  Mat<T> e;                // embed_dim x S   window embeddings
  Mat<T> h;                // embed_dim x S   contextual embeddings
  Mat<T> h_cls;            // embed_dim x 1
  Mat<T> scenario_logits;  // n_scenarios x 1
  Mat<T> action_logits;    // n_actions x S
  RowVec<T> gates;         // 1 x S, each in (0,1)
  Mat<T> a_loc, a_ctx;     // n_actions x S, the two fused logit sources
};

/// Scenario head on h_cls plus the gated action head:
///   a_loc = W_loc e_t, a_ctx = W_ctx h_t, g = sigmoid(MLP([e_t; h_t])),
///   a_t = (1 - g) a_loc + g a_ctx.
struct Heads {
  Linear scenario;
  Linear local, context;  // no bias
  Linear gate_hidden, gate_out;
  int dim = 0;

  template <typename T>
  struct Cache {
    Mat<T> gate_in, gate_pre, gate_act;
  };

  Heads() = default;
  Heads(Layout& layout, const ModelConfig& cfg) : dim(cfg.embed_dim) {
    scenario = Linear(layout, "head.scenario", dim, cfg.n_scenarios);
    local = Linear(layout, "head.w_loc", dim, cfg.n_actions, false);
    context = Linear(layout, "head.w_ctx", dim, cfg.n_actions, false);
    gate_hidden = Linear(layout, "head.gate.hidden", 2 * dim, cfg.gate_hidden);
    gate_out = Linear(layout, "head.gate.out", cfg.gate_hidden, 1);
  }

  template <typename T>
  void fuse(const ParamStore<T>& p, const Mat<T>& e, const Mat<T>& h, ForwardOutput<T>& out, Cache<T>& c) const {
    out.a_loc = local.forward(p, e);
    out.a_ctx = context.forward(p, h);
    c.gate_in.resize(2 * dim, e.cols());
    c.gate_in.topRows(dim) = e;
    c.gate_in.bottomRows(dim) = h;
    c.gate_pre = gate_hidden.forward(p, c.gate_in);
    c.gate_act = gelu(c.gate_pre);
    const Mat<T> m = gate_out.forward(p, c.gate_act);
    out.gates = m.row(0).unaryExpr([](T v) { return sigmoid(v); });
    out.action_logits = out.a_loc + ((out.a_ctx - out.a_loc).array().rowwise() * out.gates.array()).matrix();
  }

  /// Accumulates head grads; writes d/de and d/dh.
  template <typename T>
  void fuse_backward(const ParamStore<T>& p, const Mat<T>& e, const Mat<T>& h, const ForwardOutput<T>& out,
                     const Cache<T>& c, const Mat<T>& dlogits, ParamStore<T>& g, Mat<T>& de, Mat<T>& dh) const {
    const RowVec<T> one_minus = RowVec<T>::Ones(out.gates.size()) - out.gates;
    const Mat<T> da_loc = dlogits.array().rowwise() * one_minus.array();
    const Mat<T> da_ctx = dlogits.array().rowwise() * out.gates.array();
    const RowVec<T> dgate = dlogits.cwiseProduct(out.a_ctx - out.a_loc).colwise().sum();
    Mat<T> dm(1, dgate.size());
    dm.row(0) = dgate.cwiseProduct(out.gates).cwiseProduct(one_minus);
    const Mat<T> dact = gate_out.backward(p, c.gate_act, dm, g);
    const Mat<T> dgate_in = gate_hidden.backward(p, c.gate_in, gelu_backward(c.gate_pre, dact), g);
    de = local.backward(p, e, da_loc, g) + dgate_in.topRows(dim);
    dh = context.backward(p, h, da_ctx, g) + dgate_in.bottomRows(dim);
  }
};

/// Packs a sample's windows into the encoder's time-major layout.
template <typename T>
Mat<T> pack_windows(const signal::SequenceSample& sample, int in_channels, int window_len) {
  const auto nw = static_cast<Eigen::Index>(sample.windows.size());
  Mat<T> x(in_channels, window_len * nw);
  for (Eigen::Index w = 0; w < nw; ++w) {
    const auto& data = sample.windows[static_cast<std::size_t>(w)].data;
    if (data.rows() != in_channels || data.cols() != window_len)
      throw InputError("window " + std::to_string(w) + " of " + sample.video_id + " has shape " +
                       std::to_string(data.rows()) + "x" + std::to_string(data.cols()));
    for (Eigen::Index t = 0; t < window_len; ++t) x.col(t * nw + w) = data.col(t).template cast<T>();
  }
  return x;
}

template <typename T>
class HiTHAR {
 public:
  struct Tape {
    typename WindowEncoder::Cache<T> wle;
    typename WindowAggregator::Cache<T> wat;
    typename Heads::Cache<T> heads;
    Eigen::Index n_windows = 0;
  };

  explicit HiTHAR(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    auto layout = std::make_shared<Layout>();
    wle_ = WindowEncoder(*layout, cfg_);
    wat_ = WindowAggregator(*layout, cfg_);
    heads_ = Heads(*layout, cfg_);
    layout_ = std::move(layout);
  }

  const ModelConfig& config() const { return cfg_; }
  const std::shared_ptr<const Layout>& layout() const { return layout_; }

  ParamStore<T> init_params(std::uint64_t seed) const { return model::init_params<T>(layout_, seed); }
  ParamStore<T> zeros() const { return ParamStore<T>(layout_); }
  std::int64_t param_count() const { return layout_->scalar_count(); }

  /// Embeds a batch of windows: x is in_channels x (window_len * nw), time-major.
  Mat<T> encode(const ParamStore<T>& p, const Mat<T>& x, Eigen::Index nw, Mode mode, Rng* rng,
                typename WindowEncoder::Cache<T>& cache) const {
    return wle_.forward(p, x, nw, mode, rng, cache);
  }

  /// One window (in_channels x window_len) to its embedding.
  Mat<T> encode_window(const ParamStore<T>& p, const Mat<T>& window) const {
    typename WindowEncoder::Cache<T> cache;
    return wle_.forward(p, window, 1, Mode::Eval, nullptr, cache);
  }

  Mat<T> aggregate(const ParamStore<T>& p, const Mat<T>& e, Mode mode, Rng* rng,
                   typename WindowAggregator::Cache<T>& cache) const {
    return wat_.forward(p, e, mode, rng, cache);
  }

  /// Gated fusion for one (e_t, h_t) pair; returns logits and writes the gate.
  Mat<T> fuse(const ParamStore<T>& p, const Mat<T>& e_t, const Mat<T>& h_t, T* gate = nullptr) const {
    ForwardOutput<T> out;
    typename Heads::Cache<T> cache;
    heads_.fuse(p, e_t, h_t, out, cache);
    if (gate != nullptr) *gate = out.gates(0);
    return out.action_logits;
  }

  ForwardOutput<T> forward(const ParamStore<T>& p, const Mat<T>& x, Mode mode, Rng* rng, Tape& tape) const {
    const Eigen::Index nw = cfg_.seq_len;
    tape.n_windows = nw;
    ForwardOutput<T> out;
    out.e = wle_.forward(p, x, nw, mode, rng, tape.wle);
    const Mat<T> tokens = wat_.forward(p, out.e, mode, rng, tape.wat);
    out.h_cls = tokens.col(0);
    out.h = tokens.rightCols(nw);
    out.scenario_logits = heads_.scenario.forward(p, out.h_cls);
    heads_.fuse(p, out.e, out.h, out, tape.heads);
    return out;
  }

  ForwardOutput<T> forward(const ParamStore<T>& p, const Mat<T>& x, Mode mode = Mode::Eval, Rng* rng = nullptr) const {
    Tape tape;
    return forward(p, x, mode, rng, tape);
  }

  ForwardOutput<T> forward(const ParamStore<T>& p, const signal::SequenceSample& sample, Mode mode = Mode::Eval,
                           Rng* rng = nullptr) const {
    if (static_cast<int>(sample.windows.size()) != cfg_.seq_len)
      throw InputError("sample " + sample.video_id + " has " + std::to_string(sample.windows.size()) +
                       " windows, model expects " + std::to_string(cfg_.seq_len));
    return forward(p, pack(sample), mode, rng);
  }

  Mat<T> pack(const signal::SequenceSample& sample) const {
    return pack_windows<T>(sample, cfg_.in_channels, cfg_.window_len);
  }

  /// Backpropagates logit gradients through the whole network, accumulating
  /// into `g`. d_scenario: n_scenarios x 1; d_action: n_actions x S.
  void backward(const ParamStore<T>& p, const ForwardOutput<T>& out, const Tape& tape, const Mat<T>& d_scenario,
                const Mat<T>& d_action, ParamStore<T>& g) const {
    Mat<T> de, dh;
    heads_.fuse_backward(p, out.e, out.h, out, tape.heads, d_action, g, de, dh);
    Mat<T> dtokens(cfg_.embed_dim, cfg_.seq_len + 1);
    dtokens.col(0) = heads_.scenario.backward(p, out.h_cls, d_scenario, g);
    dtokens.rightCols(cfg_.seq_len) = dh;
    de += wat_.backward(p, dtokens, tape.wat, g);
    wle_.backward(p, de, tape.n_windows, tape.wle, g);
  }

 private:
  ModelConfig cfg_;
  std::shared_ptr<const Layout> layout_;
  WindowEncoder wle_;
  WindowAggregator wat_;
  Heads heads_;
};

}  // namespace hithar::model
