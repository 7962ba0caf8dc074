#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/parallel.hpp"
#include "hithar/core/rng.hpp"
#include "hithar/signal/channels.hpp"
#include "hithar/signal/windows.hpp"

namespace hithar::signal {

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;  // test receives the rest
};

struct VideoSplit {
  std::vector<std::string> train, val, test;
};

/// Seeded video-level split. Ids are sorted first so the result does not
/// depend on input order. Every split with a positive fraction gets at least
/// one video when there are enough.
inline VideoSplit split_videos(std::vector<std::string> ids, const SplitFractions& f, std::uint64_t seed) {
  if (f.train <= 0.0 || f.val < 0.0 || f.train + f.val > 1.0)
    throw ConfigError("split fractions must satisfy train > 0, val >= 0, train + val <= 1");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw InputError("split: duplicate video_id");
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = ids.size();
  auto n_val = static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n)));
  auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  if (f.val > 0.0 && n_val == 0 && n >= 3) n_val = 1;
  const double test_frac = 1.0 - f.train - f.val;
  if (test_frac > 1e-12 && n_train + n_val >= n && n >= 3) n_train = n - n_val - 1;
  n_train = std::min(n_train, n - std::min(n, n_val));
  VideoSplit s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
               ids.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_val)));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_val)), ids.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

/// Throws if any video id appears in more than one split.
inline void check_disjoint(const VideoSplit& s) {
  std::unordered_set<std::string> seen;
  for (const auto* v : {&s.train, &s.val, &s.test})
    for (const auto& id : *v)
      if (!seen.insert(id).second) throw InputError("video " + id + " appears in more than one split");
}

struct SamplingConfig {
  int window_len = kDefaultWindowLen;
  int stride = kDefaultStride;
  int seq_len = kDefaultSeqLen;
};

/// Normalizes each video, windows it and groups the windows into samples.
/// Each sample records the video's centering offset.
inline std::vector<SequenceSample> build_samples(std::span<const ChannelizedSequence> videos, const NormStats& stats,
                                                 const SamplingConfig& cfg, int threads = 1) {
  std::vector<std::vector<SequenceSample>> per_video(videos.size());
  parallel_for(videos.size(), threads, [&](std::size_t i) {
    const auto norm = normalize_sequence(videos[i], stats);
    const auto windows = segment_windows(norm, cfg.window_len, cfg.stride);
    per_video[i] = assemble_sequences(windows, cfg.seq_len);
    const Vector8 center = video_center(videos[i], stats);
    for (auto& s : per_video[i]) s.center = center;
  });
  std::vector<SequenceSample> out;
  for (auto& v : per_video)
    for (auto& s : v) out.push_back(std::move(s));
  return out;
}

/// Videos whose id is in `ids`, in corpus order.
inline std::vector<ChannelizedSequence> select_videos(std::span<const ChannelizedSequence> corpus,
                                                      std::span<const std::string> ids) {
  const std::unordered_set<std::string> keep(ids.begin(), ids.end());
  std::vector<ChannelizedSequence> out;
  for (const auto& v : corpus)
    if (keep.count(v.video_id)) out.push_back(v);
  return out;
}

}  // namespace hithar::signal
