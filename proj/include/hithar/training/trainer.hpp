#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hithar/core/parallel.hpp"
#include "hithar/model/hithar_model.hpp"
#include "hithar/signal/augment.hpp"
#include "hithar/training/gradients.hpp"
#include "hithar/training/metrics.hpp"
#include "hithar/training/optim.hpp"

namespace hithar::training {

struct TrainConfig {
  model::ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  signal::AugmentConfig augment;
  int threads = 1;
};

/// Splits must be disjoint by video_id. `stats` maps normalized windows back
/// to physical units for the geometric augmentations.
struct TrainData {
  std::vector<signal::SequenceSample> train;
  std::vector<signal::SequenceSample> val;
  signal::NormStats stats;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_scenario_loss = 0.0;
  double train_action_loss = 0.0;
  double lr = 0.0;  // at the last step of the epoch
  double grad_norm = 0.0;  // mean pre-clip norm
  Metrics val;
  bool improved = false;
};

inline json to_json(const EpochRecord& r) {
  return json{{"epoch", r.epoch},
              {"train_loss", r.train_loss},
              {"train_scenario_loss", r.train_scenario_loss},
              {"train_action_loss", r.train_action_loss},
              {"lr", r.lr},
              {"grad_norm", r.grad_norm},
              {"val_action_macro_f1", r.val.action_macro_f1},
              {"val_action_micro_acc", r.val.action_micro_acc},
              {"val_scenario_macro_f1", r.val.scenario_macro_f1},
              {"val_scenario_micro_acc", r.val.scenario_micro_acc},
              {"improved", r.improved}};
}

template <typename T>
struct TrainResult {
  model::ParamStore<T> params;  // final training params
  model::ParamStore<T> ema;     // final EMA shadow
  model::ParamStore<T> best_params;
  model::ParamStore<T> best_ema;  // EMA snapshot with the best validation action F1
  int best_epoch = 0;
  double best_val_f1 = -1.0;
  bool stopped_early = false;
  std::vector<EpochRecord> history;
  std::string rng_state;
};

template <typename T>
std::vector<model::ForwardOutput<T>> predict(const model::HiTHAR<T>& net, const model::ParamStore<T>& params,
                                             std::span<const signal::SequenceSample> data, int threads = 1) {
  std::vector<model::ForwardOutput<T>> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { out[i] = net.forward(params, data[i], model::Mode::Eval); });
  return out;
}

template <typename T>
Metrics metrics_from_outputs(std::span<const model::ForwardOutput<T>> outputs,
                             std::span<const signal::SequenceSample> data) {
  Confusion actions(kNumActions), scenarios(kNumScenarios);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Eigen::Index best = 0;
    outputs[i].scenario_logits.col(0).maxCoeff(&best);
    scenarios.add(index(data[i].scenario), static_cast<int>(best));
    for (std::size_t t = 0; t < data[i].windows.size(); ++t) {
      const auto& w = data[i].windows[t];
      if (!w.action || w.weight <= 0.0) continue;
      outputs[i].action_logits.col(static_cast<Eigen::Index>(t)).maxCoeff(&best);
      actions.add(index(*w.action), static_cast<int>(best));
    }
  }
  return metrics_from_confusions(actions, scenarios);
}

/// Eval-mode metrics; only windows with positive weight count toward actions.
template <typename T>
Metrics evaluate(const model::HiTHAR<T>& net, const model::ParamStore<T>& params,
                 std::span<const signal::SequenceSample> data, int threads = 1) {
  const auto outputs = predict(net, params, data, threads);
  return metrics_from_outputs<T>(outputs, data);
}

inline signal::SequenceSample augment_sample(const signal::SequenceSample& s, const signal::AugmentConfig& cfg,
                                             const signal::NormStats& stats, Rng& rng) {
  signal::SequenceSample out = s;
  const signal::NormContext ctx{&stats, s.center};
  for (auto& w : out.windows) w = signal::augment_window(w, cfg, rng, &ctx);
  return out;
}

/// Early stopping: training ends once `patience` consecutive epochs fail to
/// improve validation action macro-F1 (patience 0 stops at the first miss).
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const TrainData& data, std::uint64_t seed,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.loss.validate();
  cfg.optim.validate();
  if (data.train.empty()) throw ConfigError("train: empty training split");
  if (data.val.empty()) throw ConfigError("train: empty validation split");

  const model::HiTHAR<T> net(cfg.model);
  TrainResult<T> r;
  r.params = net.init_params(derive_seed(seed, "init"));
  OptimizerState<T> state(r.params);
  Rng rng(derive_seed(seed, "train"));

  const auto n = data.train.size();
  const auto batch = static_cast<std::size_t>(cfg.optim.batch);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = steps_per_epoch * cfg.optim.max_epochs;
  const long warmup_steps = steps_per_epoch * cfg.optim.warmup_epochs;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.optim.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = rng();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(epoch_seed, "shuffle"));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0, scen_sum = 0.0, act_sum = 0.0, norm_sum = 0.0;
    long batches = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += batch) {
      const std::size_t b1 = std::min(n, b0 + batch);
      std::vector<signal::SequenceSample> mb(b1 - b0);
      parallel_for(mb.size(), cfg.threads, [&](std::size_t i) {
        const std::size_t idx = order[b0 + i];
        Rng aug(derive_seed(epoch_seed, static_cast<std::uint64_t>(idx), 1));
        mb[i] = augment_sample(data.train[idx], cfg.augment, data.stats, aug);
      });
      auto g = compute_gradients(net, r.params, std::span<const signal::SequenceSample>(mb), cfg.loss,
                                 model::Mode::Train, derive_seed(epoch_seed, static_cast<std::uint64_t>(b0), 2),
                                 cfg.threads);
      const long step = std::min(state.step + 1, total_steps);
      const double lr = cosine_lr(step, total_steps, warmup_steps, cfg.optim.lr, cfg.optim.cosine_min_factor);
      const StepInfo info = optimizer_step(r.params, g.grads, state, cfg.optim, lr);
      loss_sum += g.loss.total;
      scen_sum += g.loss.scenario;
      act_sum += g.loss.action;
      norm_sum += info.grad_norm;
      rec.lr = lr;
      ++batches;
    }
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.train_scenario_loss = scen_sum / static_cast<double>(batches);
    rec.train_action_loss = act_sum / static_cast<double>(batches);
    rec.grad_norm = norm_sum / static_cast<double>(batches);
    rec.val = evaluate(net, state.ema, std::span<const signal::SequenceSample>(data.val), cfg.threads);
    rec.improved = rec.val.action_macro_f1 > r.best_val_f1;
    if (rec.improved) {
      r.best_val_f1 = rec.val.action_macro_f1;
      r.best_epoch = epoch;
      r.best_params = r.params;
      r.best_ema = state.ema;
      since_best = 0;
    } else {
      ++since_best;
    }
    r.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (since_best > 0 && since_best >= cfg.optim.patience) {
      r.stopped_early = epoch < cfg.optim.max_epochs;
      break;
    }
  }
  r.ema = state.ema;
  r.rng_state = serialize_rng(rng);
  return r;
}

struct SweepRow {
  double beta = 0.0;
  Metrics test;
  std::int64_t params = 0;
  bool pareto = false;
};

/// A point is on the front iff no other point is >= on both axes and > on one.
inline std::vector<bool> pareto_flags(std::span<const std::pair<double, double>> points) {
  std::vector<bool> flags(points.size(), true);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size() && flags[i]; ++j) {
      if (i == j) continue;
      const auto& a = points[i];
      const auto& b = points[j];
      if (b.first >= a.first && b.second >= a.second && (b.first > a.first || b.second > a.second)) flags[i] = false;
    }
  }
  return flags;
}

/// Trains one model per beta and scores its best EMA snapshot on `test`.
template <typename T>
std::vector<SweepRow> beta_sweep(const TrainConfig& base, std::span<const double> betas, const TrainData& data,
                                 std::span<const signal::SequenceSample> test, std::uint64_t seed,
                                 const std::function<void(double, const EpochRecord&)>& on_epoch = {}) {
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta_sweep: beta outside [0,1]");
    TrainConfig cfg = base;
    cfg.loss.beta = beta;
    const auto result = train<T>(cfg, data, seed, [&](const EpochRecord& rec) {
      if (on_epoch) on_epoch(beta, rec);
    });
    const model::HiTHAR<T> net(cfg.model);
    SweepRow row;
    row.beta = beta;
    row.test = evaluate(net, result.best_ema, test, cfg.threads);
    row.params = net.param_count();
    rows.push_back(row);
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) pts.emplace_back(r.test.action_macro_f1, r.test.scenario_macro_f1);
  const auto flags = pareto_flags(pts);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].pareto = flags[i];
  return rows;
}

}  // namespace hithar::training
