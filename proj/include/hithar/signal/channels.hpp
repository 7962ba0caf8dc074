#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/taxonomy.hpp"

namespace hithar::signal {

inline constexpr int kNumChannels = 8;
inline constexpr double kSampleRateHz = 50.0;

// Channel rows: acc x/y/z (g), gyro x/y/z (rad/s), |acc|, |gyro|.
enum Channel : int { kAccX = 0, kAccY, kAccZ, kGyroX, kGyroY, kGyroZ, kAccNorm, kGyroNorm };

using Vector8 = Eigen::Matrix<double, kNumChannels, 1>;

/// Labeled interval [start, end) in sample indices.
struct ActionSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;
  Action action = Action::Stationary;
  double weight = 1.0;
};

/// One video's 8-channel stream plus its sparse action labels.
struct ChannelizedSequence {
  std::string video_id;
  Scenario scenario = Scenario::Cooking;
  double sample_rate = kSampleRateHz;
  Eigen::MatrixXd channels;  // kNumChannels x T
  std::vector<ActionSpan> spans;

  Eigen::Index length() const { return channels.cols(); }
};

/// Recomputes rows 6-7 as per-timestep L2 norms of rows 0-2 and 3-5.
inline void recompute_norms(Eigen::Ref<Eigen::MatrixXd> channels) {
  channels.row(kAccNorm) = channels.topRows(3).colwise().norm();
  channels.row(kGyroNorm) = channels.middleRows(3, 3).colwise().norm();
}

inline Eigen::MatrixXd derive_channels(const Eigen::Ref<const Eigen::MatrixXd>& acc,
                                       const Eigen::Ref<const Eigen::MatrixXd>& gyro) {
  if (acc.rows() != 3 || gyro.rows() != 3)
    throw InputError("derive_channels: acc and gyro must have 3 rows");
  if (acc.cols() != gyro.cols())
    throw InputError("derive_channels: acc has " + std::to_string(acc.cols()) +
                     " samples but gyro has " + std::to_string(gyro.cols()));
  if (acc.cols() < 1) throw InputError("derive_channels: empty stream");
  Eigen::MatrixXd out(kNumChannels, acc.cols());
  out.topRows(3) = acc;
  out.middleRows(3, 3) = gyro;
  recompute_norms(out);
  return out;
}

struct NormStats {
  Vector8 mean = Vector8::Zero();
  Vector8 std = Vector8::Ones();
};

inline constexpr double kStdFloor = 1e-6;

/// Pooled per-channel mean and population std over every timestep of every
/// sequence (Welford accumulation), std clamped below at `std_floor`.
inline NormStats compute_norm_stats(std::span<const ChannelizedSequence> corpus,
                                    double std_floor = kStdFloor) {
  if (corpus.empty()) throw InputError("compute_norm_stats: empty corpus");
  Vector8 mean = Vector8::Zero();
  Vector8 m2 = Vector8::Zero();
  double count = 0.0;
  for (const auto& seq : corpus) {
    if (seq.channels.rows() != kNumChannels)
      throw InputError("compute_norm_stats: sequence " + seq.video_id + " does not have 8 channels");
    for (Eigen::Index t = 0; t < seq.channels.cols(); ++t) {
      count += 1.0;
      const Vector8 x = seq.channels.col(t);
      const Vector8 delta = x - mean;
      mean += delta / count;
      m2 += delta.cwiseProduct(x - mean);
    }
  }
  if (count == 0.0) throw InputError("compute_norm_stats: corpus has no samples");
  NormStats stats;
  stats.mean = mean;
  stats.std = (m2 / count).cwiseSqrt().cwiseMax(std_floor);
  return stats;
}

/// Per-channel mean of the z-scored stream; subtracted by normalize_sequence.
inline Vector8 video_center(const ChannelizedSequence& seq, const NormStats& stats) {
  if (seq.length() == 0) return Vector8::Zero();
  const Vector8 raw_mean = seq.channels.rowwise().mean();
  return (raw_mean - stats.mean).cwiseQuotient(stats.std);
}

/// Global z-score with training statistics, then per-video centering.
inline ChannelizedSequence normalize_sequence(const ChannelizedSequence& seq,
                                              const NormStats& stats) {
  ChannelizedSequence out = seq;
  out.channels = (seq.channels.colwise() - stats.mean).array().colwise() / stats.std.array();
  if (out.length() > 0) {
    const Vector8 center = out.channels.rowwise().mean();
    out.channels.colwise() -= center;
  }
  return out;
}

}  // namespace hithar::signal
