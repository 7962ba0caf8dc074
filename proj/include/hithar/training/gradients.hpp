#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hithar/core/parallel.hpp"
#include "hithar/model/hithar_model.hpp"
#include "hithar/signal/windows.hpp"
#include "hithar/training/loss.hpp"

namespace hithar::training {

using model::Mat;
using model::Mode;
using model::ParamStore;

/// Per-sample loss parts before batch normalization.
struct SampleLoss {
  double scenario = 0.0;      // focal loss on the scenario logits
  double action_sum = 0.0;    // sum of weighted per-window focal losses
  double weight_sum = 0.0;    // sum of window weights
};

struct LossBreakdown {
  double total = 0.0;
  double scenario = 0.0;  // batch mean
  double action = 0.0;    // weight-normalized over the batch
  double weight_sum = 0.0;
  bool no_labeled_windows = false;  // action term defined as 0
};

/// Combines per-sample parts: L = beta * mean(L_s) + (1 - beta) * sum(l_a) / sum(w).
inline LossBreakdown combine_losses(std::span<const SampleLoss> parts, const LossConfig& cfg) {
  LossBreakdown b;
  if (parts.empty()) return b;
  double action_sum = 0.0;
  for (const auto& p : parts) {
    b.scenario += p.scenario;
    action_sum += p.action_sum;
    b.weight_sum += p.weight_sum;
  }
  b.scenario /= static_cast<double>(parts.size());
  b.no_labeled_windows = b.weight_sum <= 0.0;
  b.action = b.no_labeled_windows ? 0.0 : action_sum / b.weight_sum;
  b.total = cfg.beta * b.scenario + (1.0 - cfg.beta) * b.action;
  return b;
}

inline double window_weight_sum(const signal::SequenceSample& s) {
  double w = 0.0;
  for (const auto& win : s.windows)
    if (win.action) w += win.weight;
  return w;
}

/// Loss parts of one forward output. When the d_* pointers are non-null they
/// receive the unscaled logit gradients of L_s and of sum_t l_t.
template <typename T>
SampleLoss sample_loss(const model::ForwardOutput<T>& out, const signal::SequenceSample& s, const LossConfig& cfg,
                       Mat<T>* d_scenario = nullptr, Mat<T>* d_action = nullptr) {
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  SampleLoss r;
  Vec g;
  r.scenario = static_cast<double>(focal_loss<T>(out.scenario_logits.col(0), index(s.scenario),
                                                 cfg.scenario_class_weights, cfg.focal_gamma, cfg.label_smoothing,
                                                 1.0, d_scenario ? &g : nullptr));
  if (d_scenario) *d_scenario = g;
  if (d_action) d_action->setZero(out.action_logits.rows(), out.action_logits.cols());
  for (std::size_t t = 0; t < s.windows.size(); ++t) {
    const auto& w = s.windows[t];
    if (!w.action || w.weight <= 0.0) continue;
    const auto col = static_cast<Eigen::Index>(t);
    r.action_sum += static_cast<double>(focal_loss<T>(out.action_logits.col(col), index(*w.action),
                                                      cfg.action_class_weights, cfg.focal_gamma,
                                                      cfg.label_smoothing, w.weight, d_action ? &g : nullptr));
    r.weight_sum += w.weight;
    if (d_action) d_action->col(col) = g;
  }
  return r;
}

/// Multi-task loss of one sample on its own (batch of one).
template <typename T>
LossBreakdown multitask_loss(const model::ForwardOutput<T>& out, const signal::SequenceSample& s,
                             const LossConfig& cfg) {
  const SampleLoss part = sample_loss(out, s, cfg);
  return combine_losses(std::span<const SampleLoss>(&part, 1), cfg);
}

template <typename T>
struct GradientResult {
  LossBreakdown loss;
  ParamStore<T> grads;
};

/// Exact gradient of the batch loss. Sample i draws its dropout stream from
/// derive_seed(seed, i); per-sample gradients are summed in index order so the
/// result does not depend on `threads`.
template <typename T>
GradientResult<T> compute_gradients(const model::HiTHAR<T>& net, const ParamStore<T>& params,
                                    std::span<const signal::SequenceSample> batch, const LossConfig& cfg,
                                    Mode mode = Mode::Train, std::uint64_t seed = 0, int threads = 1) {
  if (batch.empty()) throw InputError("compute_gradients: empty batch");
  double total_weight = 0.0;
  for (const auto& s : batch) total_weight += window_weight_sum(s);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const T scen_scale = static_cast<T>(cfg.beta * inv_b);
  const T act_scale = total_weight > 0.0 ? static_cast<T>((1.0 - cfg.beta) / total_weight) : T(0);

  std::vector<SampleLoss> parts(batch.size());
  std::vector<ParamStore<T>> slot_grads(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    typename model::HiTHAR<T>::Tape tape;
    const auto out = net.forward(params, net.pack(batch[i]), mode, &rng, tape);
    Mat<T> ds, da;
    parts[i] = sample_loss(out, batch[i], cfg, &ds, &da);
    slot_grads[i] = net.zeros();
    net.backward(params, out, tape, ds * scen_scale, da * act_scale, slot_grads[i]);
  });

  GradientResult<T> r;
  r.loss = combine_losses(parts, cfg);
  r.grads = std::move(slot_grads[0]);
  for (std::size_t i = 1; i < slot_grads.size(); ++i) r.grads += slot_grads[i];

  if (!std::isfinite(r.loss.total)) {
    std::string where = "loss";
    if (auto bad = params.first_non_finite()) where = *bad;
    else if (auto badg = r.grads.first_non_finite()) where = *badg;
    throw NumericError("non-finite loss (" + std::to_string(r.loss.total) + ") at tensor " + where, where);
  }
  return r;
}

/// Loss only, evaluated the same way as compute_gradients (for finite differences).
template <typename T>
LossBreakdown batch_loss(const model::HiTHAR<T>& net, const ParamStore<T>& params,
                         std::span<const signal::SequenceSample> batch, const LossConfig& cfg,
                         Mode mode = Mode::Train, std::uint64_t seed = 0, int threads = 1) {
  std::vector<SampleLoss> parts(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto out = net.forward(params, net.pack(batch[i]), mode, &rng);
    parts[i] = sample_loss(out, batch[i], cfg);
  });
  return combine_losses(parts, cfg);
}

}  // namespace hithar::training
