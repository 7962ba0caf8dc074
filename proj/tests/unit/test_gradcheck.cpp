#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hithar/training/gradcheck.hpp"

using namespace hithar;

namespace {

std::vector<training::TensorCheck> run_check(std::uint64_t seed, model::Mode mode, double step,
                                             const training::LossConfig& loss = {}) {
  const auto cfg = model::ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto params = net.init_params(seed);
  const auto batch = fixtures::random_batch(cfg, seed + 100, 2);
  return training::gradient_check(net, params, batch, loss, mode, seed, step);
}

void expect_gradients_match(std::uint64_t seed, model::Mode mode) {
  const auto checks = run_check(seed, mode, 1e-4);
  for (const auto& c : checks) {
    EXPECT_LT(c.rel_error, 1e-4) << c.name << " abs err " << c.max_abs_error;
    const bool key_bias = c.name.ends_with(".attn.k.bias");
    if (key_bias) EXPECT_LT(c.max_abs_grad, 1e-9) << c.name;
    else EXPECT_GT(c.max_abs_grad, 1e-9) << c.name << " has an all-zero gradient";
  }
}

}  // namespace

TEST(GradientCheck, EvalModeSeed1) { expect_gradients_match(1, model::Mode::Eval); }
TEST(GradientCheck, EvalModeSeed2) { expect_gradients_match(2, model::Mode::Eval); }
TEST(GradientCheck, EvalModeSeed3) { expect_gradients_match(3, model::Mode::Eval); }

// Dropout masks depend only on the seed, so the perturbed losses see the
// same masks and the check stays exact.
TEST(GradientCheck, TrainModeWithDropout) { expect_gradients_match(7, model::Mode::Train); }

// A finer step shrinks truncation error enough for a per-element bound.
TEST(GradientCheck, ElementwiseAtFineStep) {
  for (const auto& c : run_check(2, model::Mode::Eval, 1e-5)) EXPECT_LT(c.max_elem_rel, 1e-4) << c.name;
}

TEST(GradientCheck, ScenarioOnlyAndActionOnlyLosses) {
  for (double beta : {0.0, 1.0}) {
    training::LossConfig loss;
    loss.beta = beta;
    for (const auto& c : run_check(4, model::Mode::Eval, 1e-4, loss)) {
      EXPECT_LT(c.rel_error, 1e-4) << "beta " << beta << " " << c.name;
    }
  }
}
