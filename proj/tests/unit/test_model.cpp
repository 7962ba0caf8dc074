#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hithar/model/hithar_model.hpp"

using namespace hithar;
using model::Mat;
using model::ModelConfig;

namespace {

// Parameter count written out from the architecture description.
std::int64_t expected_param_count(const ModelConfig& c) {
  auto conv = [](std::int64_t cin, std::int64_t cout, std::int64_t k) { return cout * cin * k + cout; };
  auto linear = [](std::int64_t in, std::int64_t out, bool bias = true) { return out * in + (bias ? out : 0); };
  std::int64_t n = conv(c.in_channels, c.stem_channels, c.stem_kernel);
  std::int64_t cin = c.stem_channels;
  for (int cout : c.block_channels) {
    n += static_cast<std::int64_t>(c.dilations.size()) * conv(cin, cout, c.block_kernel);  // one branch per dilation
    n += 2 * cout;  // layer norm
    const std::int64_t r = cout / c.se_reduction;
    n += linear(cout, r) + linear(r, cout);
    cin = cout;
  }
  const std::int64_t h = c.gru_hidden;
  n += 2 * (3 * h * cin + 3 * h * h + 6 * h);  // bidirectional GRU
  n += linear(2 * h, c.attn_pool_dim) + c.attn_pool_dim;
  n += linear(2 * h, c.embed_dim);
  const std::int64_t d = c.embed_dim;
  n += d + d * (c.seq_len + 1);  // CLS token and positions
  n += c.wat_layers * (4 * d + 4 * linear(d, d) + linear(d, c.wat_ff) + linear(c.wat_ff, d));
  n += 2 * d;  // final norm
  n += linear(d, c.n_scenarios) + 2 * linear(d, c.n_actions, false);
  n += linear(2 * d, c.gate_hidden) + linear(c.gate_hidden, 1);
  return n;
}

}  // namespace

TEST(Model, DefaultParameterCount) {
  const model::HiTHAR<float> net(ModelConfig{});
  EXPECT_EQ(net.param_count(), 717365);
  EXPECT_EQ(net.param_count(), expected_param_count(ModelConfig{}));
  EXPECT_LT(std::abs(static_cast<double>(net.param_count()) - 703000.0) / 703000.0, 0.15);
}

TEST(Model, ParameterCountFollowsConfig) {
  for (auto cfg : {ModelConfig::tiny(), ModelConfig{}}) {
    cfg.block_channels = {16, 24};
    cfg.wat_layers = 2;
    cfg.gru_hidden = 10;
    const model::HiTHAR<double> net(cfg);
    EXPECT_EQ(net.param_count(), expected_param_count(cfg));
  }
}

TEST(Model, ForwardShapesAndGateRange) {
  const auto cfg = ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto p = net.init_params(1);
  const auto batch = fixtures::random_batch(cfg, 2, 1);
  const auto out = net.forward(p, batch[0]);
  EXPECT_EQ(out.e.rows(), cfg.embed_dim);
  EXPECT_EQ(out.e.cols(), cfg.seq_len);
  EXPECT_EQ(out.h.cols(), cfg.seq_len);
  EXPECT_EQ(out.scenario_logits.rows(), kNumScenarios);
  EXPECT_EQ(out.action_logits.rows(), kNumActions);
  EXPECT_EQ(out.action_logits.cols(), cfg.seq_len);
  for (Eigen::Index t = 0; t < out.gates.size(); ++t) {
    EXPECT_GT(out.gates(t), 0.0);
    EXPECT_LT(out.gates(t), 1.0);
  }
}

TEST(Model, GatedFusionBlendsLocalAndContextLogits) {
  const auto cfg = ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto p = net.init_params(3);
  const auto out = net.forward(p, fixtures::random_batch(cfg, 4, 1)[0]);
  for (Eigen::Index t = 0; t < cfg.seq_len; ++t) {
    const double g = out.gates(t);
    const Eigen::VectorXd blend = (1.0 - g) * out.a_loc.col(t) + g * out.a_ctx.col(t);
    EXPECT_LT((blend - out.action_logits.col(t)).cwiseAbs().maxCoeff(), 1e-12);
    double g2 = 0.0;
    const Mat<double> direct = net.fuse(p, out.e.col(t), out.h.col(t), &g2);
    EXPECT_NEAR(g2, g, 1e-12);
    EXPECT_LT((direct - out.action_logits.col(t)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Model, WindowEncoderIsPerWindowAndAggregatorMixesContext) {
  const auto cfg = ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto p = net.init_params(5);
  auto sample = fixtures::random_batch(cfg, 6, 1)[0];
  const auto base = net.forward(p, sample);
  sample.windows[1].data.array() += 0.5;
  const auto moved = net.forward(p, sample);
  for (Eigen::Index t = 0; t < cfg.seq_len; ++t) {
    const double de = (moved.e.col(t) - base.e.col(t)).norm();
    if (t == 1) {
      EXPECT_GT(de, 1e-6);
    } else {
      EXPECT_EQ(de, 0.0) << "window " << t;
    }
    EXPECT_GT((moved.h.col(t) - base.h.col(t)).norm(), 1e-9) << "context at " << t;
  }
  EXPECT_GT((moved.scenario_logits - base.scenario_logits).norm(), 1e-9);
  // encode_window agrees with the batched encoder.
  const Mat<double> one = net.encode_window(p, sample.windows[2].data);
  EXPECT_LT((one - moved.e.col(2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Model, EvalIsDeterministicAndDropoutFollowsSeed) {
  const auto cfg = ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto p = net.init_params(7);
  const auto x = net.pack(fixtures::random_batch(cfg, 8, 1)[0]);
  EXPECT_TRUE(net.forward(p, x).action_logits == net.forward(p, x).action_logits);
  Rng a(1), b(1), c(2);
  const auto ta = net.forward(p, x, model::Mode::Train, &a);
  const auto tb = net.forward(p, x, model::Mode::Train, &b);
  const auto tc = net.forward(p, x, model::Mode::Train, &c);
  EXPECT_TRUE(ta.action_logits == tb.action_logits);
  EXPECT_FALSE(ta.action_logits == tc.action_logits);
  EXPECT_FALSE(ta.action_logits == net.forward(p, x).action_logits);
}

TEST(Model, FloatMatchesDouble) {
  const auto cfg = ModelConfig::tiny();
  const model::HiTHAR<double> nd(cfg);
  const model::HiTHAR<float> nf(cfg);
  const auto pd = nd.init_params(9);
  const auto pf = pd.cast<float>();
  const auto s = fixtures::random_batch(cfg, 10, 1)[0];
  const auto od = nd.forward(pd, s);
  const auto of = nf.forward(pf, s);
  EXPECT_LT((od.action_logits - of.action_logits.cast<double>()).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LT((od.scenario_logits - of.scenario_logits.cast<double>()).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Model, InitIsSeededAndFinite) {
  const model::HiTHAR<float> net(ModelConfig{});
  const auto a = net.init_params(1);
  EXPECT_TRUE(a == net.init_params(1));
  EXPECT_FALSE(a == net.init_params(2));
  EXPECT_FALSE(a.first_non_finite().has_value());
}

TEST(Model, RejectsBadConfigAndInput) {
  auto cfg = ModelConfig::tiny();
  cfg.embed_dim = 18;  // not divisible by 4 heads
  EXPECT_THROW(model::HiTHAR<double>{cfg}, ConfigError);
  cfg = ModelConfig::tiny();
  cfg.block_kernel = 4;
  EXPECT_THROW(model::HiTHAR<double>{cfg}, ConfigError);
  cfg = ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  auto s = fixtures::random_batch(cfg, 1, 1)[0];
  s.windows.pop_back();
  EXPECT_THROW(net.forward(net.init_params(1), s), InputError);
  EXPECT_EQ(model::to_json(model::model_config_from_json(model::to_json(cfg))), model::to_json(cfg));
}
