#pragma once

// Annotation records for the datapipe tests and the acceptance binary.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hithar/core/rng.hpp"
#include "hithar/datapipe/records.hpp"

namespace hithar::fixtures {

using datapipe::AnnotationRecord;
using datapipe::Verdict;

inline AnnotationRecord make(std::string id, std::string vid, double t, std::string text, Action llm) {
  AnnotationRecord r;
  r.id = std::move(id);
  r.video_id = std::move(vid);
  r.timestamp_s = t;
  r.narration = std::move(text);
  r.llm_label = llm;
  return r;
}

inline AnnotationRecord gold(std::string id, std::string text, Action a, double t = 0.0, std::string vid = "v0") {
  auto r = make(std::move(id), std::move(vid), t, std::move(text), a);
  r.verdict = Verdict::Gold;
  return r;
}

// Random narrations built from a small vocabulary with noisy casing,
// articles, spacing and trailing punctuation.
inline std::vector<AnnotationRecord> fuzz_records(std::uint64_t seed, int n) {
  static const std::vector<std::string> words = {"C",   "picks", "up",   "the",  "a",   "An",    "knife", "pan",
                                                 "walks", "to",  "door", "THE",  "cuts", "onion", "looks", "around"};
  static const std::vector<std::string> tails = {"", ".", "!", " .", "...", "  ", "?!", ","};
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_word(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_tail(0, tails.size() - 1);
  std::uniform_int_distribution<int> len(0, 6), label(0, kNumActions - 1), vid(0, 9), spaces(1, 3);
  std::uniform_real_distribution<double> ts(0.0, 100.0);
  std::vector<AnnotationRecord> out;
  for (int i = 0; i < n; ++i) {
    std::string text = std::string(static_cast<std::size_t>(spaces(rng) - 1), ' ');
    const int k = len(rng);
    for (int w = 0; w < k; ++w) {
      if (w > 0) text += std::string(static_cast<std::size_t>(spaces(rng)), ' ');
      text += words[pick_word(rng)];
    }
    text += tails[pick_tail(rng)];
    out.push_back(make("r" + std::to_string(i), "v" + std::to_string(vid(rng)), std::round(ts(rng)), text,
                       static_cast<Action>(label(rng))));
  }
  return out;
}

}  // namespace hithar::fixtures
