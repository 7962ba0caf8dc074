#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "hithar/signal/windows.hpp"

namespace hithar::analysis {

inline constexpr int kStatsPerChannel = 5;
inline constexpr int kNumFeatures = signal::kNumChannels * kStatsPerChannel + 2;  // 42

using FeatureVector = Eigen::Matrix<double, kNumFeatures, 1>;

/// Feature order: for channel c in 0..7, entries 5c..5c+4 are mean, std,
/// min, max and mean absolute successive difference; entry 40 is the dominant
/// frequency of acc_norm in Hz and entry 41 its spectral energy.
inline std::string feature_name(int i) {
  static constexpr std::array<const char*, signal::kNumChannels> kChannels = {
      "acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z", "acc_norm", "gyro_norm"};
  static constexpr std::array<const char*, kStatsPerChannel> kStats = {"mean", "std", "min", "max", "masd"};
  if (i == kNumFeatures - 2) return "acc_norm_dominant_hz";
  if (i == kNumFeatures - 1) return "acc_norm_spectral_energy";
  return std::string(kChannels[static_cast<std::size_t>(i / kStatsPerChannel)]) + "_" +
         kStats[static_cast<std::size_t>(i % kStatsPerChannel)];
}

/// Dominant frequency and energy of the mean-removed signal over the
/// positive-frequency bins 1..n/2 of a direct DFT. Energy is
/// sum |X_k|^2 / n over those bins; a silent signal reports (0, 0).
inline std::pair<double, double> dominant_frequency(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                                    double sample_rate) {
  const Eigen::Index n = x.size();
  if (n < 2) return {0.0, 0.0};
  const Eigen::RowVectorXd y = x.array() - x.mean();
  double best_power = 0.0, energy = 0.0;
  Eigen::Index best_k = 0;
  for (Eigen::Index k = 1; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      re += y(t) * std::cos(phase);
      im -= y(t) * std::sin(phase);
    }
    const double power = (re * re + im * im) / static_cast<double>(n);
    energy += power;
    if (power > best_power) {
      best_power = power;
      best_k = k;
    }
  }
  return {static_cast<double>(best_k) * sample_rate / static_cast<double>(n), energy};
}

inline FeatureVector extract_features(const Eigen::Ref<const Eigen::MatrixXd>& data,
                                      double sample_rate = signal::kSampleRateHz) {
  if (data.rows() != signal::kNumChannels || data.cols() < 1)
    throw InputError("extract_features: expected 8 x L window with L >= 1");
  FeatureVector f;
  const auto n = static_cast<double>(data.cols());
  for (int c = 0; c < signal::kNumChannels; ++c) {
    const auto row = data.row(c);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().sum() / n;
    double masd = 0.0;
    if (data.cols() > 1)
      masd = (row.tail(data.cols() - 1) - row.head(data.cols() - 1)).cwiseAbs().sum() /
             static_cast<double>(data.cols() - 1);
    f(kStatsPerChannel * c + 0) = mean;
    f(kStatsPerChannel * c + 1) = std::sqrt(var);
    f(kStatsPerChannel * c + 2) = row.minCoeff();
    f(kStatsPerChannel * c + 3) = row.maxCoeff();
    f(kStatsPerChannel * c + 4) = masd;
  }
  const auto [freq, energy] = dominant_frequency(data.row(signal::kAccNorm), sample_rate);
  f(kNumFeatures - 2) = freq;
  f(kNumFeatures - 1) = energy;
  return f;
}

inline FeatureVector extract_features(const signal::Window& w, double sample_rate = signal::kSampleRateHz) {
  return extract_features(w.data, sample_rate);
}

}  // namespace hithar::analysis
