#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hithar/training/gradients.hpp"

namespace hithar::training {

struct TensorCheck {
  std::string name;
  double rel_error = 0.0;     // max|a - n| / max(max|a|, max|n|, abs_floor) over the tensor
  double max_elem_rel = 0.0;  // max of |a - n| / max(|a|, |n|, abs_floor)
  double max_abs_error = 0.0;
  double max_abs_grad = 0.0;
};

/// Compares analytic gradients against central differences on every scalar.
/// `rel_error` normalizes by the tensor's largest gradient, so entries many
/// orders below it are not judged against the O(step^2) truncation error.
/// The floor covers tensors whose exact gradient is zero (the attention key
/// bias: a per-query constant shift leaves the softmax unchanged).
inline std::vector<TensorCheck> gradient_check(const model::HiTHAR<double>& net, model::ParamStore<double> params,
                                               std::span<const signal::SequenceSample> batch,
                                               const LossConfig& cfg, model::Mode mode, std::uint64_t seed,
                                               double step = 1e-4, double abs_floor = 1e-6) {
  const auto analytic = compute_gradients(net, params, batch, cfg, mode, seed).grads;
  std::vector<TensorCheck> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorCheck tc;
    tc.name = params.spec(i).name;
    auto& values = params[i];
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      const double saved = values.data()[k];
      values.data()[k] = saved + step;
      const double up = batch_loss(net, params, batch, cfg, mode, seed).total;
      values.data()[k] = saved - step;
      const double down = batch_loss(net, params, batch, cfg, mode, seed).total;
      values.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i].data()[k];
      const double err = std::abs(a - numeric);
      tc.max_abs_error = std::max(tc.max_abs_error, err);
      tc.max_abs_grad = std::max({tc.max_abs_grad, std::abs(a), std::abs(numeric)});
      tc.max_elem_rel = std::max(tc.max_elem_rel, err / std::max({std::abs(a), std::abs(numeric), abs_floor}));
    }
    tc.rel_error = tc.max_abs_error / std::max(tc.max_abs_grad, abs_floor);
    out.push_back(tc);
  }
  return out;
}

}  // namespace hithar::training
