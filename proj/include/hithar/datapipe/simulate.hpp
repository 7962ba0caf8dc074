#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/rng.hpp"
#include "hithar/datapipe/records.hpp"
#include "hithar/signal/channels.hpp"

namespace hithar::datapipe {

/// Knobs for simulated narration records. Not derived from any real corpus;
/// they only need to exercise every branch of the pipeline.
struct NarrationSimConfig {
  double narration_rate = 0.3;     // chance a labeled second gets a narration
  double verified_fraction = 0.25;
  double llm_accuracy = 0.9;
  double ambiguous_phrase_rate = 0.08;
  double secondary_choice_rate = 0.3;
  double ambiguous_verb_rate = 0.2;
  double skip_rate = 0.1;          // verified and correct, but skipped
  double correct_fix_rate = 0.7;   // verified and wrong: corrected rather than deleted

  void validate() const {
    for (double p : {narration_rate, verified_fraction, llm_accuracy, ambiguous_phrase_rate, secondary_choice_rate,
                     ambiguous_verb_rate, skip_rate, correct_fix_rate})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("narration simulation rates must lie in [0, 1]");
  }
};

inline json to_json(const NarrationSimConfig& c) {
  return json{{"narration_rate", c.narration_rate},
              {"verified_fraction", c.verified_fraction},
              {"llm_accuracy", c.llm_accuracy},
              {"ambiguous_phrase_rate", c.ambiguous_phrase_rate},
              {"secondary_choice_rate", c.secondary_choice_rate},
              {"ambiguous_verb_rate", c.ambiguous_verb_rate},
              {"skip_rate", c.skip_rate},
              {"correct_fix_rate", c.correct_fix_rate}};
}

inline NarrationSimConfig narration_sim_from_json(const json& j) {
  NarrationSimConfig c;
  StrictReader r(j, "narrations");
  r.get("narration_rate", c.narration_rate)
      .get("verified_fraction", c.verified_fraction)
      .get("llm_accuracy", c.llm_accuracy)
      .get("ambiguous_phrase_rate", c.ambiguous_phrase_rate)
      .get("secondary_choice_rate", c.secondary_choice_rate)
      .get("ambiguous_verb_rate", c.ambiguous_verb_rate)
      .get("skip_rate", c.skip_rate)
      .get("correct_fix_rate", c.correct_fix_rate);
  r.finish();
  c.validate();
  return c;
}

namespace detail {

// Indexed by Action: OT, TO, ST, LO, SE.
inline const std::array<std::vector<std::string_view>, kNumActions>& phrase_bank() {
  static const std::array<std::vector<std::string_view>, kNumActions> bank = {{
      {"picks up the knife", "puts down the cup", "places the bowl on the table", "hands the bag to the man",
       "picks a box from the floor"},
      {"cuts the onion", "stirs the pot", "tightens the screw", "wipes the counter", "kneads the dough"},
      {"stands still", "stands by the table", "waits near the door", "looks at the phone"},
      {"walks to the counter", "walks across the room", "walks down the street", "walks towards the car"},
      {"looks around the room", "scans the shelf", "searches the drawer", "looks for the keys"},
  }};
  return bank;
}

// Phrases narrators use for more than one behavior.
inline const std::vector<std::pair<std::string_view, std::array<Action, 2>>>& ambiguous_phrases() {
  static const std::vector<std::pair<std::string_view, std::array<Action, 2>>> phrases = {
      {"holds the pan", {Action::ObjectTransfer, Action::TaskOperation}},
      {"moves the pot", {Action::ObjectTransfer, Action::TaskOperation}},
      {"looks at the shelf", {Action::Search, Action::Stationary}},
  };
  return phrases;
}

inline std::string surface_form(std::string_view phrase, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, 3);
  std::string s = "C " + std::string(phrase);
  switch (pick(rng)) {
    case 0: s += "."; break;
    case 1: s[2] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[2]))); break;
    case 2: s += " slowly"; break;
    default: break;
  }
  return s;
}

}  // namespace detail

/// Narration records for labeled seconds of each sequence, drawn from the true
/// labels with LLM errors and human verdicts applied. Each video uses its own
/// stream derived from (seed, video_id).
inline std::vector<AnnotationRecord> simulate_narrations(std::span<const signal::ChannelizedSequence> corpus,
                                                         const NarrationSimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<AnnotationRecord> out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& seq : corpus) {
    Rng rng(derive_seed(seed, "narrations/" + seq.video_id));
    const auto sec = static_cast<std::int64_t>(seq.sample_rate);
    int n = 0;
    for (const auto& span : seq.spans) {
      for (std::int64_t b = span.start; b + sec <= span.end; b += sec) {
        if (u(rng) >= cfg.narration_rate) continue;
        AnnotationRecord r;
        char id[64];
        std::snprintf(id, sizeof(id), "%s/n%05d", seq.video_id.c_str(), n++);
        r.id = id;
        r.video_id = seq.video_id;
        r.timestamp_s = static_cast<double>(b) / seq.sample_rate;
        r.scenario = seq.scenario;
        const Action truth = span.action;
        std::string_view phrase;
        if (u(rng) < cfg.ambiguous_phrase_rate) {
          for (const auto& [p, actions] : detail::ambiguous_phrases())
            if (actions[0] == truth || actions[1] == truth) phrase = p;
        }
        if (phrase.empty()) {
          const auto& bank = detail::phrase_bank()[static_cast<std::size_t>(index(truth))];
          phrase = bank[std::uniform_int_distribution<std::size_t>(0, bank.size() - 1)(rng)];
        }
        r.narration = detail::surface_form(phrase, rng);
        r.llm_label = truth;
        if (u(rng) >= cfg.llm_accuracy)
          r.llm_label = static_cast<Action>((index(truth) + 1 + std::uniform_int_distribution<int>(0, 3)(rng)) % 5);
        if (u(rng) < cfg.verified_fraction) {
          if (r.llm_label == truth) {
            r.verdict = u(rng) < cfg.skip_rate ? Verdict::Skipped : Verdict::Gold;
            r.has_secondary_choice = u(rng) < cfg.secondary_choice_rate;
            r.ambiguous_verb = u(rng) < cfg.ambiguous_verb_rate;
          } else if (u(rng) < cfg.correct_fix_rate) {
            r.verdict = Verdict::Corrected;
            r.corrected_label = truth;
          } else {
            r.verdict = Verdict::Deleted;
          }
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

/// Labeled records (positive weight) as one-second action spans per video.
inline std::map<std::string, std::vector<signal::ActionSpan>> records_to_spans(
    std::span<const AnnotationRecord> records, double sample_rate = signal::kSampleRateHz, double span_s = 1.0) {
  std::map<std::string, std::vector<signal::ActionSpan>> out;
  for (const auto& r : records) {
    if (r.provenance == Provenance::Unlabeled || r.weight <= 0.0) continue;
    signal::ActionSpan s;
    s.start = static_cast<std::int64_t>(std::llround(r.timestamp_s * sample_rate));
    s.end = s.start + static_cast<std::int64_t>(std::llround(span_s * sample_rate));
    s.action = r.label();
    s.weight = r.weight;
    out[r.video_id].push_back(s);
  }
  for (auto& [vid, spans] : out)
    std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return out;
}

}  // namespace hithar::datapipe
