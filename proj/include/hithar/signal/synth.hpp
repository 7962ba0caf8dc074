#pragma once

// Synthetic head-mounted IMU corpus with class-characteristic signatures and
// Markov behavioral-state sequences. All parameters are invented for
// desk-scale verification; none come from real recordings.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hithar/core/json.hpp"
#include "hithar/core/parallel.hpp"
#include "hithar/core/rng.hpp"
#include "hithar/signal/channels.hpp"

namespace hithar::signal {

using TransitionRows = std::array<std::array<double, kNumActions>, kNumActions>;

struct ScenarioProfile {
  Scenario scenario = Scenario::Cooking;
  TransitionRows transitions{};
  std::array<double, kNumActions> initial{0.2, 0.2, 0.2, 0.2, 0.2};
};

struct SynthSignals {
  double gait_freq_hz = 2.0;
  double gait_freq_jitter_hz = 0.1;
  double gait_amp_g = 0.35;
  double gait_lateral_ratio = 0.4;
  double gait_sway_rad_s = 0.15;
  double noise_acc_g = 0.01;
  double noise_gyro_rad_s = 0.01;
  double locomotion_noise_factor = 2.0;
  double burst_rate_hz = 1.0;
  double burst_yaw_rad_s = 0.5;
  double burst_width_s = 0.12;
  double burst_acc_g = 0.06;
  double tremor_freq_hz = 5.0;
  double tremor_acc_g = 0.02;
  double tremor_gyro_rad_s = 0.04;
  double transfer_tremor_ratio = 0.8;
  double search_yaw_rad_s = 0.1;
  double search_freq_hz = 0.5;
  double search_static_fraction = 0.8;
  double search_drift_rad_s = 0.015;  // slow yaw drift during static-mode Search
  double search_drift_freq_hz = 0.25;
  double tilt_max_deg = 10.0;
  double gyro_bias_rad_s = 0.005;
};

struct SynthSpec {
  int n_videos = 200;
  double duration_s = 60.0;
  double unit_s = 1.0;  // behavioral state resolution
  double label_coverage = 1.0;
  std::vector<ScenarioProfile> scenarios;
  SynthSignals signals;

  /// Two scenarios: manipulation-heavy Cooking and locomotion-heavy
  /// WalkingOutdoors. Rows: OT, TO, ST, LO, SE.
  static SynthSpec defaults() {
    SynthSpec spec;
    ScenarioProfile cooking;
    cooking.scenario = Scenario::Cooking;
    cooking.transitions = {{{0.70, 0.20, 0.05, 0.03, 0.02},
                            {0.15, 0.78, 0.05, 0.01, 0.01},
                            {0.08, 0.06, 0.82, 0.02, 0.02},
                            {0.10, 0.02, 0.04, 0.80, 0.04},
                            {0.08, 0.01, 0.01, 0.02, 0.88}}};
    ScenarioProfile outdoors;
    outdoors.scenario = Scenario::WalkingOutdoors;
    outdoors.transitions = {{{0.70, 0.05, 0.05, 0.15, 0.05},
                             {0.10, 0.70, 0.10, 0.10, 0.00},
                             {0.03, 0.02, 0.82, 0.10, 0.03},
                             {0.03, 0.01, 0.04, 0.84, 0.08},
                             {0.02, 0.00, 0.02, 0.08, 0.88}}};
    spec.scenarios = {cooking, outdoors};
    return spec;
  }

  void validate() const {
    if (n_videos < 1) throw InputError("synth: n_videos must be >= 1");
    if (!(duration_s > 0.0) || !(unit_s > 0.0)) throw InputError("synth: durations must be positive");
    if (label_coverage < 0.0 || label_coverage > 1.0)
      throw InputError("synth: label_coverage must be in [0,1]");
    if (signals.search_static_fraction < 0.0 || signals.search_static_fraction > 1.0)
      throw InputError("synth: search_static_fraction must be in [0,1]");
    if (scenarios.empty()) throw InputError("synth: at least one scenario profile is required");
    for (const auto& p : scenarios) {
      const std::string name(to_string(p.scenario));
      double init_sum = 0.0;
      for (double v : p.initial) {
        if (v < 0.0) throw InputError("synth: negative initial probability in " + name);
        init_sum += v;
      }
      if (std::abs(init_sum - 1.0) > 1e-6)
        throw InputError("synth: initial distribution of " + name + " does not sum to 1");
      for (int r = 0; r < kNumActions; ++r) {
        double sum = 0.0;
        for (double v : p.transitions[r]) {
          if (v < 0.0) throw InputError("synth: negative transition probability in " + name);
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
          throw InputError("synth: transition matrix of " + name + " is not row-stochastic (row " +
                           std::to_string(r) + " sums to " + std::to_string(sum) + ")");
      }
    }
  }
};

inline json to_json(const SynthSpec& s) {
  json j;
  j["n_videos"] = s.n_videos;
  j["duration_s"] = s.duration_s;
  j["unit_s"] = s.unit_s;
  j["label_coverage"] = s.label_coverage;
  json scen = json::array();
  for (const auto& p : s.scenarios) {
    scen.push_back({{"scenario", std::string(to_string(p.scenario))},
                    {"transitions", p.transitions},
                    {"initial", p.initial}});
  }
  j["scenarios"] = scen;
  const auto& g = s.signals;
  j["signals"] = {{"gait_freq_hz", g.gait_freq_hz},
                  {"gait_freq_jitter_hz", g.gait_freq_jitter_hz},
                  {"gait_amp_g", g.gait_amp_g},
                  {"gait_lateral_ratio", g.gait_lateral_ratio},
                  {"gait_sway_rad_s", g.gait_sway_rad_s},
                  {"noise_acc_g", g.noise_acc_g},
                  {"noise_gyro_rad_s", g.noise_gyro_rad_s},
                  {"locomotion_noise_factor", g.locomotion_noise_factor},
                  {"burst_rate_hz", g.burst_rate_hz},
                  {"burst_yaw_rad_s", g.burst_yaw_rad_s},
                  {"burst_width_s", g.burst_width_s},
                  {"burst_acc_g", g.burst_acc_g},
                  {"tremor_freq_hz", g.tremor_freq_hz},
                  {"tremor_acc_g", g.tremor_acc_g},
                  {"tremor_gyro_rad_s", g.tremor_gyro_rad_s},
                  {"transfer_tremor_ratio", g.transfer_tremor_ratio},
                  {"search_yaw_rad_s", g.search_yaw_rad_s},
                  {"search_freq_hz", g.search_freq_hz},
                  {"search_static_fraction", g.search_static_fraction},
                  {"search_drift_rad_s", g.search_drift_rad_s},
                  {"search_drift_freq_hz", g.search_drift_freq_hz},
                  {"tilt_max_deg", g.tilt_max_deg},
                  {"gyro_bias_rad_s", g.gyro_bias_rad_s}};
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s = SynthSpec::defaults();
  StrictReader r(j, "synth");
  r.get("n_videos", s.n_videos).get("duration_s", s.duration_s).get("unit_s", s.unit_s);
  r.get("label_coverage", s.label_coverage);
  if (const json* scen = r.sub("scenarios")) {
    if (!scen->is_array()) throw ConfigError("synth.scenarios: expected an array");
    s.scenarios.clear();
    for (const auto& item : *scen) {
      StrictReader pr(item, "synth.scenarios[]");
      ScenarioProfile p;
      std::string name;
      pr.get("scenario", name).get("transitions", p.transitions).get("initial", p.initial);
      pr.finish();
      auto parsed = parse_scenario(name);
      if (!parsed) throw ConfigError("synth.scenarios[]: unknown scenario '" + name + "'");
      p.scenario = *parsed;
      s.scenarios.push_back(p);
    }
  }
  if (const json* sig = r.sub("signals")) {
    auto& g = s.signals;
    StrictReader sr(*sig, "synth.signals");
    sr.get("gait_freq_hz", g.gait_freq_hz)
        .get("gait_freq_jitter_hz", g.gait_freq_jitter_hz)
        .get("gait_amp_g", g.gait_amp_g)
        .get("gait_lateral_ratio", g.gait_lateral_ratio)
        .get("gait_sway_rad_s", g.gait_sway_rad_s)
        .get("noise_acc_g", g.noise_acc_g)
        .get("noise_gyro_rad_s", g.noise_gyro_rad_s)
        .get("locomotion_noise_factor", g.locomotion_noise_factor)
        .get("burst_rate_hz", g.burst_rate_hz)
        .get("burst_yaw_rad_s", g.burst_yaw_rad_s)
        .get("burst_width_s", g.burst_width_s)
        .get("burst_acc_g", g.burst_acc_g)
        .get("tremor_freq_hz", g.tremor_freq_hz)
        .get("tremor_acc_g", g.tremor_acc_g)
        .get("tremor_gyro_rad_s", g.tremor_gyro_rad_s)
        .get("transfer_tremor_ratio", g.transfer_tremor_ratio)
        .get("search_yaw_rad_s", g.search_yaw_rad_s)
        .get("search_freq_hz", g.search_freq_hz)
        .get("search_static_fraction", g.search_static_fraction)
        .get("search_drift_rad_s", g.search_drift_rad_s)
        .get("search_drift_freq_hz", g.search_drift_freq_hz)
        .get("tilt_max_deg", g.tilt_max_deg)
        .get("gyro_bias_rad_s", g.gyro_bias_rad_s);
    sr.finish();
  }
  r.finish();
  return s;
}

inline std::string synth_video_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%04d", i);
  return buf;
}

namespace detail {

inline int draw_categorical(const std::array<double, kNumActions>& p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    acc += p[static_cast<std::size_t>(i)];
    if (x < acc) return i;
  }
  for (int i = kNumActions - 1; i >= 0; --i)
    if (p[static_cast<std::size_t>(i)] > 0.0) return i;
  return 0;
}

inline Eigen::Vector3d random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

inline ChannelizedSequence generate_video(const SynthSpec& spec, int index, std::uint64_t seed) {
  const std::string vid = synth_video_id(index);
  Rng rng(derive_seed(seed, vid));
  const ScenarioProfile& profile = spec.scenarios[static_cast<std::size_t>(index) % spec.scenarios.size()];
  const SynthSignals& g = spec.signals;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double fs = kSampleRateHz;

  const auto total = static_cast<Eigen::Index>(std::llround(spec.duration_s * fs));
  const auto unit_len = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(spec.unit_s * fs)));
  const Eigen::Index n_units = (total + unit_len - 1) / unit_len;

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Behavioral state chain at unit resolution.
  std::vector<int> states(static_cast<std::size_t>(n_units));
  states[0] = draw_categorical(profile.initial, rng);
  for (Eigen::Index k = 1; k < n_units; ++k)
    states[static_cast<std::size_t>(k)] =
        draw_categorical(profile.transitions[static_cast<std::size_t>(states[static_cast<std::size_t>(k - 1)])], rng);

  // Device frame: small random tilt of the head-mounted unit.
  std::uniform_real_distribution<double> tilt(-g.tilt_max_deg, g.tilt_max_deg);
  const Eigen::Matrix3d mount =
      Eigen::AngleAxisd(tilt(rng) * std::numbers::pi / 180.0, random_unit(rng)).toRotationMatrix();
  const Eigen::Vector3d up = mount * Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d lateral = mount * Eigen::Vector3d::UnitX();
  const Eigen::Vector3d forward = mount * Eigen::Vector3d::UnitY();
  const Eigen::Vector3d gyro_bias(normal(rng) * g.gyro_bias_rad_s, normal(rng) * g.gyro_bias_rad_s,
                                  normal(rng) * g.gyro_bias_rad_s);
  const double gait_f = g.gait_freq_hz + (2.0 * uni(rng) - 1.0) * g.gait_freq_jitter_hz;
  const double gait_phase = kTwoPi * uni(rng);
  const double tremor_f = g.tremor_freq_hz * (0.9 + 0.2 * uni(rng));
  const Eigen::Vector3d tremor_dir = random_unit(rng);
  const double search_phase = kTwoPi * uni(rng);

  Eigen::MatrixXd acc(3, total), gyro(3, total);
  for (Eigen::Index k = 0; k < n_units; ++k) {
    const auto state = static_cast<Action>(states[static_cast<std::size_t>(k)]);
    const Eigen::Index begin = k * unit_len;
    const Eigen::Index end = std::min(total, begin + unit_len);
    const double noise_scale = state == Action::Locomotion ? g.locomotion_noise_factor : 1.0;

    struct Burst {
      double center_s, amp;
      Eigen::Vector3d dir;
    };
    std::vector<Burst> bursts;
    bool search_active = false;
    if (state == Action::ObjectTransfer) {
      std::poisson_distribution<int> count(g.burst_rate_hz * spec.unit_s);
      const int n = count(rng);
      for (int b = 0; b < n; ++b) {
        const double c = (static_cast<double>(begin) + uni(rng) * static_cast<double>(end - begin)) / fs;
        const double amp = (uni(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * uni(rng)) * g.burst_yaw_rad_s;
        bursts.push_back({c, amp, random_unit(rng)});
      }
    } else if (state == Action::Search) {
      search_active = uni(rng) >= g.search_static_fraction;
    }

    for (Eigen::Index t = begin; t < end; ++t) {
      const double ts = static_cast<double>(t) / fs;
      Eigen::Vector3d a = up;
      Eigen::Vector3d w = gyro_bias;
      for (int i = 0; i < 3; ++i) {
        a[i] += normal(rng) * g.noise_acc_g * noise_scale;
        w[i] += normal(rng) * g.noise_gyro_rad_s * noise_scale;
      }
      switch (state) {
        case Action::Locomotion:
          a += g.gait_amp_g * std::sin(kTwoPi * gait_f * ts + gait_phase) * up;
          a += g.gait_amp_g * g.gait_lateral_ratio * std::sin(std::numbers::pi * gait_f * ts) * lateral;
          w += g.gait_sway_rad_s * std::sin(std::numbers::pi * gait_f * ts + gait_phase) * forward;
          w += 0.5 * g.gait_sway_rad_s * std::sin(std::numbers::pi * gait_f * ts + 1.0) * up;
          break;
        case Action::TaskOperation:
        case Action::ObjectTransfer: {
          const double ratio = state == Action::TaskOperation ? 1.0 : g.transfer_tremor_ratio;
          const double s = std::sin(kTwoPi * tremor_f * ts);
          a += ratio * g.tremor_acc_g * s * tremor_dir;
          w += ratio * g.tremor_gyro_rad_s * std::cos(kTwoPi * tremor_f * ts) * lateral;
          for (const auto& b : bursts) {
            const double d = (ts - b.center_s) / g.burst_width_s;
            const double env = std::exp(-0.5 * d * d);
            w += b.amp * env * up;
            a += g.burst_acc_g * env * b.dir;
          }
          break;
        }
        case Action::Search:
          if (search_active) w += g.search_yaw_rad_s * std::sin(kTwoPi * g.search_freq_hz * ts + search_phase) * up;
          else w += g.search_drift_rad_s * std::sin(kTwoPi * g.search_drift_freq_hz * ts + search_phase) * up;
          break;
        case Action::Stationary:
          break;
      }
      acc.col(t) = a;
      gyro.col(t) = w;
    }
  }

  ChannelizedSequence seq;
  seq.video_id = vid;
  seq.scenario = profile.scenario;
  seq.channels = derive_channels(acc, gyro);

  // Labeled units merge into spans; dropped units break spans.
  std::vector<bool> labeled(static_cast<std::size_t>(n_units), true);
  if (spec.label_coverage < 1.0)
    for (Eigen::Index k = 0; k < n_units; ++k) labeled[static_cast<std::size_t>(k)] = uni(rng) < spec.label_coverage;
  for (Eigen::Index k = 0; k < n_units; ++k) {
    if (!labeled[static_cast<std::size_t>(k)]) continue;
    const Eigen::Index begin = k * unit_len;
    const Eigen::Index end = std::min(total, begin + unit_len);
    const auto action = static_cast<Action>(states[static_cast<std::size_t>(k)]);
    if (!seq.spans.empty() && seq.spans.back().end == begin && seq.spans.back().action == action &&
        labeled[static_cast<std::size_t>(k - 1)]) {
      seq.spans.back().end = end;
    } else {
      seq.spans.push_back({begin, end, action, 1.0});
    }
  }
  return seq;
}

}  // namespace detail

/// Videos are assigned to scenario profiles round-robin; each video draws
/// from its own stream derived from (seed, video_id).
inline std::vector<ChannelizedSequence> synth_generate(const SynthSpec& spec, std::uint64_t seed,
                                                       int threads = 1) {
  spec.validate();
  std::vector<ChannelizedSequence> out(static_cast<std::size_t>(spec.n_videos));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = detail::generate_video(spec, static_cast<int>(i), seed);
  });
  return out;
}

}  // namespace hithar::signal
