#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "hithar/signal/dataset.hpp"
#include "hithar/signal/synth.hpp"
#include "hithar/training/trainer.hpp"

using namespace hithar;
using namespace hithar::training;

namespace {

// Direct evaluation of the smoothed focal loss, one class at a time.
double focal_oracle(const std::vector<double>& z, int target, double gamma, double eps, double class_w, double w) {
  double zmax = z[0];
  for (double v : z) zmax = std::max(zmax, v);
  double denom = 0.0;
  for (double v : z) denom += std::exp(v - zmax);
  const double k = static_cast<double>(z.size());
  double loss = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double p = std::exp(z[c] - zmax) / denom;
    const double y = (static_cast<int>(c) == target ? 1.0 - eps : 0.0) + eps / k;
    loss += y * std::pow(1.0 - p, gamma) * -std::log(p);
  }
  return w * class_w * loss;
}

Eigen::VectorXd vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<double> ones(int n) { return std::vector<double>(static_cast<std::size_t>(n), 1.0); }

}  // namespace

// --- focal loss -----------------------------------------------------------

TEST(FocalLoss, ClosedFormAtHalfProbability) {
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
  EXPECT_NEAR(focal_loss(z, 0, ones(2), 0.0, 0.0, 1.0), 0.693147, 1e-6);
  EXPECT_NEAR(focal_loss(z, 0, ones(2), 2.0, 0.0, 1.0), 0.173287, 1e-6);
  EXPECT_NEAR(focal_loss(z, 1, ones(2), 0.0, 0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss(z, 1, ones(2), 2.0, 0.0, 1.0), 0.25 * std::log(2.0), 1e-15);
}

TEST(FocalLoss, MatchesDirectEvaluation) {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(5), cw{0.95, 1.0, 1.6, 1.2, 3.0};
    for (auto& v : z) v = n(rng);
    const int target = trial % 5;
    for (double gamma : {0.0, 1.0, 2.0})
      for (double eps : {0.0, 0.05}) {
        const double got = focal_loss(vec(z), target, cw, gamma, eps, 0.7);
        EXPECT_NEAR(got, focal_oracle(z, target, gamma, eps, cw[static_cast<std::size_t>(target)], 0.7), 1e-12);
      }
  }
}

TEST(FocalLoss, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd z(8);
    for (auto& v : z) v = n(rng);
    Eigen::VectorXd g;
    const std::vector<double> cw = ones(8);
    focal_loss<double>(z, trial % 8, cw, 2.0, 0.05, 0.8, &g);
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      Eigen::VectorXd zp = z, zm = z;
      zp(c) += 1e-6;
      zm(c) -= 1e-6;
      const double fd = (focal_loss(zp, trial % 8, cw, 2.0, 0.05, 0.8) - focal_loss(zm, trial % 8, cw, 2.0, 0.05, 0.8)) / 2e-6;
      EXPECT_NEAR(g(c), fd, 1e-7);
    }
  }
}

TEST(FocalLoss, ZeroWeightAndBadTarget) {
  const Eigen::VectorXd z = Eigen::VectorXd::Ones(3);
  EXPECT_EQ(focal_loss(z, 0, ones(3), 2.0, 0.05, 0.0), 0.0);
  EXPECT_THROW(focal_loss(z, 3, ones(3), 2.0, 0.05, 1.0), InputError);
  EXPECT_THROW(focal_loss(z, 0, ones(2), 2.0, 0.05, 1.0), InputError);
}

// --- multi-task loss ------------------------------------------------------

TEST(MultiTaskLoss, AffineInBeta) {
  const auto cfg = model::ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto params = net.init_params(3);
  const auto batch = fixtures::random_batch(cfg, 4, 3);

  // Independent scenario and action terms from the raw outputs.
  LossConfig lc;
  double scen = 0.0, act = 0.0, wsum = 0.0;
  for (const auto& s : batch) {
    const auto out = net.forward(params, s);
    const Eigen::VectorXd zs = out.scenario_logits.col(0);
    scen += focal_oracle({zs.data(), zs.data() + zs.size()}, index(s.scenario), lc.focal_gamma, lc.label_smoothing,
                         lc.scenario_class_weights[static_cast<std::size_t>(index(s.scenario))], 1.0);
    for (std::size_t t = 0; t < s.windows.size(); ++t) {
      const auto& w = s.windows[t];
      if (!w.action) continue;
      const Eigen::VectorXd za = out.action_logits.col(static_cast<Eigen::Index>(t));
      act += focal_oracle({za.data(), za.data() + za.size()}, index(*w.action), lc.focal_gamma, lc.label_smoothing,
                          lc.action_class_weights[static_cast<std::size_t>(index(*w.action))], w.weight);
      wsum += w.weight;
    }
  }
  scen /= static_cast<double>(batch.size());
  act /= wsum;

  for (double beta : {0.0, 0.5, 1.0}) {
    lc.beta = beta;
    const auto b = batch_loss(net, params, batch, lc, model::Mode::Eval);
    EXPECT_NEAR(b.total, beta * scen + (1.0 - beta) * act, 1e-9) << "beta " << beta;
    EXPECT_NEAR(b.scenario, scen, 1e-9);
    EXPECT_NEAR(b.action, act, 1e-9);
  }
}

TEST(MultiTaskLoss, UnlabeledBatchHasZeroActionTerm) {
  const auto cfg = model::ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  auto batch = fixtures::random_batch(cfg, 5, 2);
  for (auto& s : batch)
    for (auto& w : s.windows) w.action.reset(), w.weight = 0.0;
  LossConfig lc;
  const auto b = batch_loss(net, net.init_params(1), batch, lc, model::Mode::Eval);
  EXPECT_TRUE(b.no_labeled_windows);
  EXPECT_EQ(b.action, 0.0);
  EXPECT_NEAR(b.total, lc.beta * b.scenario, 1e-15);
}

TEST(MultiTaskLoss, GradientsIndependentOfThreadCount) {
  const auto cfg = model::ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto params = net.init_params(4);
  const auto batch = fixtures::random_batch(cfg, 6, 5);
  const auto a = compute_gradients(net, params, batch, LossConfig{}, model::Mode::Train, 9, 1);
  const auto b = compute_gradients(net, params, batch, LossConfig{}, model::Mode::Train, 9, 3);
  EXPECT_TRUE(a.grads == b.grads);
  EXPECT_EQ(a.loss.total, b.loss.total);
}

// --- optimizer ------------------------------------------------------------

TEST(Schedule, WarmupThenCosineToFloor) {
  const double base = 1e-3, floor = 0.2;
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 10, base, floor), 0.0);
  EXPECT_DOUBLE_EQ(cosine_lr(5, 100, 10, base, floor), 0.5 * base);
  EXPECT_DOUBLE_EQ(cosine_lr(10, 100, 10, base, floor), base);
  EXPECT_NEAR(cosine_lr(55, 100, 10, base, floor), base * (floor + (1.0 - floor) * 0.5), 1e-15);
  EXPECT_NEAR(cosine_lr(100, 100, 10, base, floor), base * floor, 1e-15);
  double last = base;
  for (long s = 10; s <= 100; ++s) {
    const double lr = cosine_lr(s, 100, 10, base, floor);
    EXPECT_LE(lr, last + 1e-18);
    last = lr;
  }
  EXPECT_THROW(cosine_lr(101, 100, 10, base, floor), InputError);
}

TEST(Optimizer, SingleAdamWStepByHand) {
  auto layout = std::make_shared<model::Layout>();
  layout->weight("w", 1, 2, 1);
  layout->bias("b", 1);
  model::ParamStore<double> p(layout), g(layout);
  p[0] << 0.5, -1.0;
  p[1] << 0.25;
  g[0] << 0.3, 0.4;  // norm 0.5, below the clip
  g[1] << -0.2;
  OptimConfig cfg;
  cfg.weight_decay = 0.1;
  cfg.ema_decay = 0.9;
  OptimizerState<double> st(p);
  const double lr = 0.01;
  const auto info = optimizer_step(p, g, st, cfg, lr);
  EXPECT_NEAR(info.grad_norm, std::sqrt(0.09 + 0.16 + 0.04), 1e-15);
  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  auto expect = [&](double p0, double gi, bool decay) {
    const double decayed = decay ? p0 * (1.0 - lr * 0.1) : p0;
    return decayed - lr * gi / (std::abs(gi) + cfg.adam_eps);
  };
  EXPECT_NEAR(p[0](0), expect(0.5, 0.3, true), 1e-12);
  EXPECT_NEAR(p[0](1), expect(-1.0, 0.4, true), 1e-12);
  EXPECT_NEAR(p[1](0), expect(0.25, -0.2, false), 1e-12);
  EXPECT_NEAR(st.ema[1](0), 0.9 * 0.25 + 0.1 * p[1](0), 1e-15);
}

TEST(Optimizer, ClipsToMaxNorm) {
  auto layout = std::make_shared<model::Layout>();
  layout->weight("w", 3, 1, 1);
  model::ParamStore<double> g(layout);
  g[0] << 3.0, 4.0, 0.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
  EXPECT_NEAR(g[0](0), 0.6, 1e-15);
  g[0] << 0.1, 0.0, 0.0;
  clip_grad_norm(g, 1.0);
  EXPECT_EQ(g[0](0), 0.1);
}

TEST(Optimizer, NonFiniteGradientThrowsBeforeUpdate) {
  auto layout = std::make_shared<model::Layout>();
  layout->weight("w", 1, 1, 1);
  model::ParamStore<double> p(layout), g(layout);
  p[0] << 1.0;
  g[0] << std::numeric_limits<double>::quiet_NaN();
  OptimizerState<double> st(p);
  EXPECT_THROW(optimizer_step(p, g, st, OptimConfig{}, 0.1), NumericError);
  EXPECT_EQ(p[0](0), 1.0);
  EXPECT_EQ(st.step, 0);
}

// --- metrics --------------------------------------------------------------

TEST(Metrics, F1FromHandCountedConfusion) {
  Confusion c(3);
  // truth, pred pairs
  const std::vector<std::pair<int, int>> pairs{{0, 0}, {0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 2}, {2, 0}};
  for (auto [t, p] : pairs) c.add(t, p);
  const auto f1 = c.per_class_f1();
  // class 0: tp 2, fp 1, fn 1; class 1: tp 1, fp 1, fn 1; class 2: tp 2, fp 1, fn 1
  EXPECT_NEAR(f1[0], 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(f1[1], 2.0 / 4.0, 1e-15);
  EXPECT_NEAR(f1[2], 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(c.macro_f1(), (4.0 / 6 + 0.5 + 4.0 / 6) / 3.0, 1e-15);
  EXPECT_NEAR(c.accuracy(), 5.0 / 8.0, 1e-15);
  EXPECT_THROW(c.add(3, 0), InputError);
}

TEST(Metrics, ChanceF1MatchesShuffledPredictions) {
  // Predictions shuffled against targets approach the marginal-preserving chance value.
  Rng rng(5);
  std::discrete_distribution<int> truth({0.4, 0.3, 0.2, 0.1}), pred({0.1, 0.2, 0.3, 0.4});
  std::vector<int> t(200000), p(200000);
  for (auto& v : t) v = truth(rng);
  for (auto& v : p) v = pred(rng);
  Confusion c(4);
  for (std::size_t i = 0; i < t.size(); ++i) c.add(t[i], p[i]);
  EXPECT_NEAR(c.macro_f1(), c.chance_macro_f1(), 0.005);
  double oracle = 0.0;
  const double pi[] = {0.4, 0.3, 0.2, 0.1}, q[] = {0.1, 0.2, 0.3, 0.4};
  for (int k = 0; k < 4; ++k) oracle += 2 * pi[k] * q[k] / (pi[k] + q[k]) / 4.0;
  EXPECT_NEAR(c.chance_macro_f1(), oracle, 0.005);
}

TEST(Metrics, EmptyActionConfusionIsAnError) {
  EXPECT_THROW(metrics_from_confusions(Confusion(kNumActions), Confusion(kNumScenarios)), MetricsError);
}

TEST(Pareto, DominanceFlags) {
  const std::vector<std::pair<double, double>> pts{{0.9, 0.1}, {0.5, 0.5}, {0.4, 0.4}, {0.1, 0.9}, {0.5, 0.5}};
  EXPECT_EQ(pareto_flags(pts), (std::vector<bool>{true, true, false, true, true}));
}

// --- training loop --------------------------------------------------------

namespace {

TrainData tiny_data(const model::ModelConfig& mc) {
  auto spec = signal::SynthSpec::defaults();
  spec.n_videos = 8;
  spec.duration_s = 8.0;
  const auto corpus = signal::synth_generate(spec, 2);
  std::vector<std::string> ids;
  for (const auto& v : corpus) ids.push_back(v.video_id);
  const auto split = signal::split_videos(ids, {0.5, 0.25}, 1);
  TrainData d;
  d.stats = signal::compute_norm_stats(signal::select_videos(corpus, split.train));
  const signal::SamplingConfig sc{mc.window_len, mc.window_len, mc.seq_len};
  d.train = signal::build_samples(signal::select_videos(corpus, split.train), d.stats, sc);
  d.val = signal::build_samples(signal::select_videos(corpus, split.val), d.stats, sc);
  return d;
}

TrainConfig tiny_train_config(int threads) {
  TrainConfig c;
  c.model = model::ModelConfig::tiny();
  c.model.window_len = 50;
  c.optim.lr = 3e-3;
  c.optim.batch = 4;
  c.optim.max_epochs = 3;
  c.optim.warmup_epochs = 1;
  c.optim.ema_decay = 0.5;
  c.threads = threads;
  return c;
}

}  // namespace

TEST(Trainer, DeterministicAcrossThreadCounts) {
  const auto c1 = tiny_train_config(1);
  const auto data = tiny_data(c1.model);
  ASSERT_FALSE(data.train.empty());
  ASSERT_FALSE(data.val.empty());
  const auto a = train<float>(c1, data, 7);
  const auto b = train<float>(tiny_train_config(3), data, 7);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_TRUE(a.best_ema == b.best_ema);
  EXPECT_EQ(a.rng_state, b.rng_state);
  ASSERT_EQ(a.history.size(), 3u);
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
  EXPECT_FALSE(a.params == train<float>(c1, data, 8).params);
}

TEST(Trainer, LossDecreasesAndBestSnapshotTracksValidation) {
  auto cfg = tiny_train_config(1);
  cfg.optim.max_epochs = 6;
  const auto data = tiny_data(cfg.model);
  const auto r = train<float>(cfg, data, 3);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& h : r.history)
    if (h.val.action_macro_f1 > best) best = h.val.action_macro_f1, best_epoch = h.epoch;
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_DOUBLE_EQ(r.best_val_f1, best);
  const model::HiTHAR<float> net(cfg.model);
  EXPECT_DOUBLE_EQ(evaluate(net, r.best_ema, std::span<const signal::SequenceSample>(data.val)).action_macro_f1, best);
}

TEST(Trainer, PatienceZeroStopsAtFirstMiss) {
  auto cfg = tiny_train_config(1);
  cfg.optim.max_epochs = 8;
  cfg.optim.patience = 0;
  const auto r = train<float>(cfg, tiny_data(cfg.model), 4);
  // Stops on the first epoch that fails to improve, or runs out of epochs.
  for (std::size_t i = 1; i + 1 < r.history.size(); ++i) EXPECT_TRUE(r.history[i].improved);
  if (r.history.size() < 8u) {
    EXPECT_TRUE(r.stopped_early);
    EXPECT_FALSE(r.history.back().improved);
  }
}

TEST(Trainer, RejectsEmptySplits) {
  auto cfg = tiny_train_config(1);
  TrainData d;
  EXPECT_THROW(train<float>(cfg, d, 1), ConfigError);
}
