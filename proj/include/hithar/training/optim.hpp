#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/model/params.hpp"

namespace hithar::training {

struct OptimConfig {
  double lr = 1e-4;
  double weight_decay = 5e-4;
  int batch = 128;
  int max_epochs = 40;
  int warmup_epochs = 3;
  double cosine_min_factor = 0.2;
  double grad_clip_norm = 1.0;
  double ema_decay = 0.999;
  int patience = 15;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("optim.lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
    if (batch < 1) throw ConfigError("optim.batch must be >= 1");
    if (max_epochs < 1) throw ConfigError("optim.max_epochs must be >= 1");
    if (warmup_epochs < 0 || warmup_epochs >= max_epochs)
      throw ConfigError("optim.warmup_epochs must be in [0, max_epochs)");
    if (!(cosine_min_factor >= 0.0 && cosine_min_factor <= 1.0))
      throw ConfigError("optim.cosine_min_factor must be in [0,1]");
    if (!(grad_clip_norm > 0.0)) throw ConfigError("optim.grad_clip_norm must be positive");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("optim.ema_decay must be in [0,1)");
    if (patience < 0) throw ConfigError("optim.patience must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("optim: Adam betas must be in [0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("optim.adam_eps must be positive");
  }
};

inline json to_json(const OptimConfig& c) {
  return json{{"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"batch", c.batch},
              {"max_epochs", c.max_epochs},
              {"warmup_epochs", c.warmup_epochs},
              {"cosine_min_factor", c.cosine_min_factor},
              {"grad_clip_norm", c.grad_clip_norm},
              {"ema_decay", c.ema_decay},
              {"patience", c.patience},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps}};
}

inline OptimConfig optim_config_from_json(const json& j, OptimConfig c = {}) {
  StrictReader r(j, "optim");
  r.get("lr", c.lr)
      .get("weight_decay", c.weight_decay)
      .get("batch", c.batch)
      .get("max_epochs", c.max_epochs)
      .get("warmup_epochs", c.warmup_epochs)
      .get("cosine_min_factor", c.cosine_min_factor)
      .get("grad_clip_norm", c.grad_clip_norm)
      .get("ema_decay", c.ema_decay)
      .get("patience", c.patience)
      .get("adam_beta1", c.adam_beta1)
      .get("adam_beta2", c.adam_beta2)
      .get("adam_eps", c.adam_eps);
  r.finish();
  c.validate();
  return c;
}

/// Linear warmup from 0 to base_lr, then cosine decay to base_lr * min_factor.
inline double cosine_lr(long step, long total_steps, long warmup_steps, double base_lr, double min_factor) {
  if (step < 0 || step > total_steps) throw InputError("cosine_lr: step outside [0, total_steps]");
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const long span = total_steps - warmup_steps;
  const double progress = span > 0 ? static_cast<double>(step - warmup_steps) / static_cast<double>(span) : 1.0;
  return base_lr * (min_factor + (1.0 - min_factor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

template <typename T>
double global_norm(const model::ParamStore<T>& g) {
  double sq = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) sq += g[i].template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

/// Rescales `g` in place so its global norm is at most max_norm. Returns the
/// norm before clipping.
template <typename T>
double clip_grad_norm(model::ParamStore<T>& g, double max_norm) {
  const double norm = global_norm(g);
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale;
  }
  return norm;
}

template <typename T>
struct OptimizerState {
  model::ParamStore<T> m, v, ema;
  long step = 0;

  OptimizerState() = default;
  explicit OptimizerState(const model::ParamStore<T>& params)
      : m(params.zeros_like()), v(params.zeros_like()), ema(params) {}
};

struct StepInfo {
  double grad_norm = 0.0;  // before clipping
  double lr = 0.0;
};

/// Clip, AdamW update with decoupled weight decay on tensors flagged for
/// decay, then EMA update. Non-finite gradients throw before anything changes.
template <typename T>
StepInfo optimizer_step(model::ParamStore<T>& params, model::ParamStore<T>& grads, OptimizerState<T>& state,
                        const OptimConfig& cfg, double lr) {
  if (auto bad = grads.first_non_finite()) throw NumericError("non-finite gradient in " + *bad, *bad);
  StepInfo info;
  info.lr = lr;
  info.grad_norm = clip_grad_norm(grads, cfg.grad_clip_norm);

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.adam_beta1), b2 = static_cast<T>(cfg.adam_beta2);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.adam_eps);
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  const T d = static_cast<T>(cfg.ema_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g.cwiseProduct(g);
    if (params.spec(i).decay && cfg.weight_decay > 0.0) p *= decay;
    p.array() -= step_size * state.m[i].array() / (state.v[i].array().sqrt() * inv_sqrt_bc2 + eps);
    state.ema[i] = d * state.ema[i] + (T(1) - d) * p;
  }
  return info;
}

}  // namespace hithar::training
