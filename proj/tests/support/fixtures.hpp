#pragma once

// Small random inputs shared by the unit tests and the acceptance binary.

#include <random>
#include <string>
#include <vector>

#include "hithar/core/rng.hpp"
#include "hithar/model/config.hpp"
#include "hithar/signal/windows.hpp"

namespace hithar::fixtures {

/// A sequence sample with N(0,1) window data, random labels and weights.
/// Every `unlabeled_every`-th window is left unlabeled.
inline signal::SequenceSample random_sample(const model::ModelConfig& cfg, Rng& rng, int unlabeled_every = 3) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> action(0, kNumActions - 1);
  std::uniform_int_distribution<int> scenario(0, kNumScenarios - 1);
  std::uniform_real_distribution<double> weight(0.3, 1.0);
  signal::SequenceSample s;
  s.video_id = "fixture";
  s.scenario = static_cast<Scenario>(scenario(rng));
  for (int t = 0; t < cfg.seq_len; ++t) {
    signal::Window w;
    w.data.resize(cfg.in_channels, cfg.window_len);
    for (Eigen::Index i = 0; i < w.data.size(); ++i) w.data.data()[i] = normal(rng);
    w.scenario = s.scenario;
    w.video_id = s.video_id;
    w.offset = t * cfg.window_len;
    if (unlabeled_every <= 0 || (t + 1) % unlabeled_every != 0) {
      w.action = static_cast<Action>(action(rng));
      w.weight = weight(rng);
    }
    s.windows.push_back(std::move(w));
  }
  return s;
}

inline std::vector<signal::SequenceSample> random_batch(const model::ModelConfig& cfg, std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<signal::SequenceSample> out;
  for (int i = 0; i < n; ++i) out.push_back(random_sample(cfg, rng));
  return out;
}

}  // namespace hithar::fixtures
