#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/taxonomy.hpp"

namespace hithar::training {

struct LossConfig {
  double beta = 0.3;
  double focal_gamma = 2.0;
  double label_smoothing = 0.05;
  std::vector<double> action_class_weights{0.95, 1.0, 1.6, 1.2, 3.0};
  std::vector<double> scenario_class_weights{1.9, 1.0, 1.4, 2.0, 7.6, 1.2, 2.1, 1.6};

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("loss.beta must be in [0,1]");
    if (!(focal_gamma >= 0.0)) throw ConfigError("loss.focal_gamma must be >= 0");
    if (!(label_smoothing >= 0.0 && label_smoothing < 0.5))
      throw ConfigError("loss.label_smoothing must be in [0,0.5)");
    if (action_class_weights.size() != kNumActions)
      throw ConfigError("loss.action_class_weights needs " + std::to_string(kNumActions) + " entries");
    if (scenario_class_weights.size() != kNumScenarios)
      throw ConfigError("loss.scenario_class_weights needs " + std::to_string(kNumScenarios) + " entries");
    for (double w : action_class_weights)
      if (!(w > 0.0)) throw ConfigError("loss.action_class_weights must be positive");
    for (double w : scenario_class_weights)
      if (!(w > 0.0)) throw ConfigError("loss.scenario_class_weights must be positive");
  }
};

inline json to_json(const LossConfig& c) {
  return json{{"beta", c.beta},
              {"focal_gamma", c.focal_gamma},
              {"label_smoothing", c.label_smoothing},
              {"action_class_weights", c.action_class_weights},
              {"scenario_class_weights", c.scenario_class_weights}};
}

inline LossConfig loss_config_from_json(const json& j, LossConfig c = {}) {
  StrictReader r(j, "loss");
  r.get("beta", c.beta)
      .get("focal_gamma", c.focal_gamma)
      .get("label_smoothing", c.label_smoothing)
      .get("action_class_weights", c.action_class_weights)
      .get("scenario_class_weights", c.scenario_class_weights);
  r.finish();
  c.validate();
  return c;
}

/// Focal loss against a label-smoothed target:
///   loss = sample_weight * class_weights[target] * sum_c y_c (1 - p_c)^gamma (-log p_c)
/// with y_c = (1 - eps) [c == target] + eps / C and p = softmax(logits).
/// When `grad` is non-null it receives d loss / d logits.
template <typename T>
T focal_loss(const Eigen::Ref<const Eigen::Matrix<T, Eigen::Dynamic, 1>>& logits, int target,
             const std::vector<double>& class_weights, double gamma, double eps, double sample_weight,
             Eigen::Matrix<T, Eigen::Dynamic, 1>* grad = nullptr) {
  const Eigen::Index n = logits.size();
  if (target < 0 || target >= n) throw InputError("focal_loss: target " + std::to_string(target) + " out of range");
  if (class_weights.size() != static_cast<std::size_t>(n))
    throw InputError("focal_loss: class weight count does not match logits");
  if (grad != nullptr) grad->setZero(n);
  if (sample_weight == 0.0) return T(0);

  const T m = logits.maxCoeff();
  const T lse = m + std::log((logits.array() - m).exp().sum());
  const T scale = static_cast<T>(sample_weight * class_weights[static_cast<std::size_t>(target)]);
  const T g = static_cast<T>(gamma);
  T loss = 0;
  Eigen::Matrix<T, Eigen::Dynamic, 1> q(n), p(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const T logp = logits(c) - lse;
    const T nll = -logp;
    p(c) = std::exp(logp);
    const T one_minus = -std::expm1(logp);
    const T y = static_cast<T>((c == target ? 1.0 - eps : 0.0) + eps / static_cast<double>(n));
    const T mod = std::pow(one_minus, g);
    loss += y * mod * nll;
    // d/dz_c of the per-component term, chained through p_c; the (1-p)^(gamma-1)
    // factor is only formed when it is finite.
    const T dmod = (one_minus > T(0) && g > T(0)) ? g * std::pow(one_minus, g - T(1)) * p(c) * nll : T(0);
    q(c) = y * (-dmod - mod);
  }
  if (grad != nullptr) *grad = scale * (q - p * q.sum());
  return scale * loss;
}

inline double focal_loss(const Eigen::VectorXd& logits, int target, const std::vector<double>& class_weights,
                         double gamma, double eps, double sample_weight) {
  return focal_loss<double>(logits, target, class_weights, gamma, eps, sample_weight, nullptr);
}

}  // namespace hithar::training
