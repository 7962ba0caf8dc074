#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hithar/signal/channels.hpp"

namespace hithar::signal {

inline constexpr int kDefaultWindowLen = 50;
inline constexpr int kDefaultStride = 10;
inline constexpr int kDefaultSeqLen = 30;

struct Window {
  Eigen::MatrixXd data;  // kNumChannels x window_len
  std::optional<Action> action;
  double weight = 0.0;  // 0 whenever action is empty
  Scenario scenario = Scenario::Cooking;
  std::string video_id;
  std::int64_t offset = 0;  // first sample index in the source stream
};

struct SequenceSample {
  std::vector<Window> windows;
  Scenario scenario = Scenario::Cooking;
  std::string video_id;
  // Per-video centering offset applied during normalization; lets augmentation
  // map windows back to physical units.
  Vector8 center = Vector8::Zero();
};

/// Label of the span with the largest overlap with [begin, end); ties go to
/// the earlier span start. Overlap below half the window leaves it unlabeled.
inline std::optional<ActionSpan> resolve_window_label(std::span<const ActionSpan> spans,
                                                      std::int64_t begin, std::int64_t end) {
  const ActionSpan* best = nullptr;
  std::int64_t best_overlap = 0;
  for (const auto& span : spans) {
    const std::int64_t overlap = std::min(end, span.end) - std::max(begin, span.start);
    if (overlap <= 0) continue;
    if (overlap > best_overlap ||
        (overlap == best_overlap && best != nullptr && span.start < best->start)) {
      best = &span;
      best_overlap = overlap;
    }
  }
  if (best == nullptr || 2 * best_overlap < end - begin) return std::nullopt;
  return *best;
}

inline std::vector<Window> segment_windows(const ChannelizedSequence& seq,
                                           int window_len = kDefaultWindowLen,
                                           int stride = kDefaultStride) {
  if (window_len < 1 || stride < 1)
    throw InputError("segment_windows: window_len and stride must be positive");
  std::vector<Window> out;
  const std::int64_t total = seq.length();
  if (total < window_len) return out;
  const std::int64_t count = (total - window_len) / stride + 1;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const std::int64_t begin = i * stride;
    Window w;
    w.data = seq.channels.middleCols(begin, window_len);
    w.scenario = seq.scenario;
    w.video_id = seq.video_id;
    w.offset = begin;
    if (auto span = resolve_window_label(seq.spans, begin, begin + window_len)) {
      w.action = span->action;
      w.weight = span->weight;
    }
    out.push_back(std::move(w));
  }
  return out;
}

/// Non-overlapping groups of `seq_len` consecutive windows per video; the
/// trailing remainder of each video is dropped. Windows of one video must be
/// adjacent in the input.
inline std::vector<SequenceSample> assemble_sequences(std::span<const Window> windows,
                                                      int seq_len = kDefaultSeqLen) {
  if (seq_len < 1) throw InputError("assemble_sequences: seq_len must be positive");
  std::vector<SequenceSample> out;
  std::size_t i = 0;
  while (i < windows.size()) {
    std::size_t run_end = i;
    while (run_end < windows.size() && windows[run_end].video_id == windows[i].video_id) ++run_end;
    for (std::size_t start = i; start + static_cast<std::size_t>(seq_len) <= run_end;
         start += static_cast<std::size_t>(seq_len)) {
      SequenceSample sample;
      sample.video_id = windows[start].video_id;
      sample.scenario = windows[start].scenario;
      sample.windows.assign(windows.begin() + static_cast<std::ptrdiff_t>(start),
                            windows.begin() + static_cast<std::ptrdiff_t>(start + seq_len));
      out.push_back(std::move(sample));
    }
    i = run_end;
  }
  return out;
}

}  // namespace hithar::signal
