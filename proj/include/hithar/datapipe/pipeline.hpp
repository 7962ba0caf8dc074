#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/taxonomy.hpp"
#include "hithar/datapipe/records.hpp"

namespace hithar::datapipe {

namespace detail {

inline bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

inline std::string strip_trailing(std::string s) {
  while (!s.empty()) {
    const auto c = static_cast<unsigned char>(s.back());
    if (c < 128 && (std::ispunct(c) || std::isspace(c))) s.pop_back();
    else break;
  }
  return s;
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

/// Lowercases, strips trailing punctuation, drops standalone articles and
/// collapses whitespace. Repeated until nothing changes, so the result is a
/// fixed point of the function.
inline std::string normalize_narration(std::string_view text) {
  std::string s(text);
  for (auto& ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 128) ch = static_cast<char>(std::tolower(c));
  }
  while (true) {
    std::string next;
    for (const auto& w : detail::split_words(detail::strip_trailing(s))) {
      if (detail::is_article(w)) continue;
      if (!next.empty()) next.push_back(' ');
      next += w;
    }
    next = detail::strip_trailing(std::move(next));
    if (next == s) return s;
    s = std::move(next);
  }
}

/// Word set of an already normalized narration.
inline std::vector<std::string> token_set(std::string_view normalized) {
  auto words = detail::split_words(normalized);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

/// Jaccard similarity of two sorted word sets; two empty sets count as identical.
inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0, i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter, ++i, ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// ---------------------------------------------------------------------------
// Deduplication

struct DedupGroup {
  std::string normalized;
  Action label = Action::Stationary;
  std::size_t representative = 0;    // index into the input
  std::vector<std::size_t> members;  // input indices, representative first
};

/// Groups narrations sharing normalized text and LLM label. Groups are ordered
/// by key and the representative is the earliest member by (video, time, id),
/// so the result does not depend on input order.
inline std::vector<DedupGroup> dedup_narrations(std::span<const AnnotationRecord> records) {
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i)
    groups[{normalize_narration(records[i].narration), index(records[i].llm_label)}].push_back(i);
  std::vector<DedupGroup> out;
  out.reserve(groups.size());
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = records[a];
      const auto& rb = records[b];
      return std::tie(ra.video_id, ra.timestamp_s, ra.id, a) < std::tie(rb.video_id, rb.timestamp_s, rb.id, b);
    });
    out.push_back({key.first, static_cast<Action>(key.second), members.front(), std::move(members)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling quota

/// Integer quota per class proportional to count^alpha, capped at the class
/// count. Capped classes are fixed and the rest of the budget is re-shared
/// among the others until no cap binds; fractional shares are then rounded by
/// largest remainder (ties to the lower class index). Quotas sum to the budget.
inline std::vector<std::int64_t> sqrt_quota(std::span<const std::int64_t> counts, std::int64_t budget,
                                            double alpha = 0.5) {
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw InputError("sqrt_quota: negative class count");
    total += c;
  }
  if (total == 0) throw InputError("sqrt_quota: every class count is zero");
  if (budget <= 0) throw InputError("sqrt_quota: budget must be positive");
  if (budget > total)
    throw InputError("sqrt_quota: budget " + std::to_string(budget) + " exceeds the " + std::to_string(total) +
                     " available items");
  const std::size_t n = counts.size();
  std::vector<std::int64_t> quota(n, 0);
  std::vector<bool> fixed(n, false);
  for (std::size_t c = 0; c < n; ++c) fixed[c] = counts[c] == 0;
  std::int64_t remaining = budget;
  std::vector<double> share(n, 0.0);
  while (true) {
    double wsum = 0.0;
    for (std::size_t c = 0; c < n; ++c)
      if (!fixed[c]) wsum += std::pow(static_cast<double>(counts[c]), alpha);
    bool capped = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (fixed[c]) continue;
      share[c] = static_cast<double>(remaining) * std::pow(static_cast<double>(counts[c]), alpha) / wsum;
      if (share[c] >= static_cast<double>(counts[c])) {
        fixed[c] = true;
        quota[c] = counts[c];
        remaining -= counts[c];
        capped = true;
      }
    }
    if (!capped) break;
  }
  std::int64_t assigned = 0;
  std::vector<std::size_t> open;
  for (std::size_t c = 0; c < n; ++c) {
    if (fixed[c]) continue;
    quota[c] = static_cast<std::int64_t>(std::floor(share[c]));
    assigned += quota[c];
    open.push_back(c);
  }
  std::stable_sort(open.begin(), open.end(), [&](std::size_t a, std::size_t b) {
    return share[a] - std::floor(share[a]) > share[b] - std::floor(share[b]);
  });
  for (std::size_t i = 0; assigned < remaining && i < open.size(); ++i) {
    quota[open[i]] += 1;
    ++assigned;
  }
  return quota;
}

// ---------------------------------------------------------------------------
// Confidence tiers

struct TierConfig {
  double corrected_weight = 0.6;

  void validate() const {
    if (!(corrected_weight >= 0.5 && corrected_weight <= 0.7))
      throw ConfigError("tiers.corrected_weight must lie in [0.5, 0.7]");
  }
};

struct TierAssignment {
  int tier = 0;
  double weight = 0.0;
};

inline TierAssignment assign_tier(const AnnotationRecord& r, const TierConfig& cfg = {}) {
  if (!r.verdict) throw InputError("assign_tier: record " + r.id + " has no verdict");
  switch (*r.verdict) {
    case Verdict::Gold:
      if (r.has_secondary_choice || r.ambiguous_verb) return {2, 0.8};
      return {1, 1.0};
    case Verdict::Corrected:
      if (!r.corrected_label) throw InputError("assign_tier: corrected record " + r.id + " has no corrected_label");
      return {3, cfg.corrected_weight};
    case Verdict::Skipped:
    case Verdict::Deleted:
      return {4, 0.0};
  }
  throw InputError("assign_tier: unknown verdict");
}

/// Sets tier, weight and provenance on every verified record.
inline void assign_tiers(std::vector<AnnotationRecord>& records, const TierConfig& cfg = {}) {
  cfg.validate();
  for (auto& r : records) {
    if (!r.verdict) continue;
    const auto t = assign_tier(r, cfg);
    r.tier = t.tier;
    r.weight = t.weight;
    r.provenance = Provenance::Gold;
  }
}

// ---------------------------------------------------------------------------
// Propagation

struct PropagationConfig {
  double threshold = 0.8;  // Jaccard must exceed this; above 1 only exact matches pass
  double discount = 0.9;

  void validate() const {
    if (!(threshold >= 0.0)) throw ConfigError("propagation.threshold must be non-negative");
    if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("propagation.discount must lie in (0, 1]");
  }
};

struct PropagationConflict {
  std::string record_id;
  std::string narration;
  std::vector<Action> labels;  // distinct candidate labels, sorted
};

struct PropagationReport {
  std::int64_t gold = 0;        // verified records with positive weight
  std::int64_t exact = 0;       // pool records labeled through an identical normalized text
  std::int64_t similar = 0;     // labeled through Jaccard similarity only
  std::int64_t unmatched = 0;
  std::vector<PropagationConflict> conflicts;

  std::int64_t propagated() const { return exact + similar; }
  /// (gold + propagated) / gold.
  double expansion() const {
    return gold == 0 ? 0.0 : static_cast<double>(gold + propagated()) / static_cast<double>(gold);
  }
  double exact_expansion() const {
    return gold == 0 ? 0.0 : static_cast<double>(gold + exact) / static_cast<double>(gold);
  }
};

/// Copies labels from verified records (tiers 1-3) to unverified records whose
/// narration matches exactly after normalization or has Jaccard similarity
/// above the threshold. The best source (exact first, then highest similarity,
/// then highest weight, then id) supplies the label and its weight times the
/// discount. Records with candidates disagreeing on the label stay unlabeled
/// and are reported. Verified records are never modified. Tiers must already
/// be assigned.
inline PropagationReport propagate_labels(std::vector<AnnotationRecord>& records, const PropagationConfig& cfg = {}) {
  cfg.validate();
  struct Source {
    std::size_t idx;
    std::string norm;
    std::vector<std::string> tokens;
  };
  std::vector<Source> sources;
  std::map<std::string, std::vector<std::size_t>> by_token;  // token -> source indices
  PropagationReport rep;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.verdict) continue;
    if (r.tier == 0) throw InputError("propagate_labels: record " + r.id + " has no tier");
    if (r.weight <= 0.0) continue;
    ++rep.gold;
    auto norm = normalize_narration(r.narration);
    auto tokens = token_set(norm);
    for (const auto& t : tokens) by_token[t].push_back(sources.size());
    sources.push_back({i, std::move(norm), std::move(tokens)});
  }
  const bool need_all = cfg.threshold <= 0.0;

  for (auto& r : records) {
    if (r.verdict) continue;
    const auto norm = normalize_narration(r.narration);
    const auto tokens = token_set(norm);
    std::set<std::size_t> cands;
    if (need_all || tokens.empty()) {
      for (std::size_t s = 0; s < sources.size(); ++s) cands.insert(s);
    } else {
      for (const auto& t : tokens)
        if (auto it = by_token.find(t); it != by_token.end()) cands.insert(it->second.begin(), it->second.end());
    }
    struct Match {
      std::size_t src;
      bool exact;
      double sim;
    };
    std::vector<Match> matches;
    for (auto s : cands) {
      const bool exact = sources[s].norm == norm;
      const double sim = exact ? 1.0 : jaccard(tokens, sources[s].tokens);
      if (exact || sim > cfg.threshold) matches.push_back({s, exact, sim});
    }
    if (matches.empty()) {
      ++rep.unmatched;
      continue;
    }
    std::set<int> labels;
    for (const auto& m : matches) labels.insert(index(records[sources[m.src].idx].label()));
    if (labels.size() > 1) {
      PropagationConflict c{r.id, r.narration, {}};
      for (int l : labels) c.labels.push_back(static_cast<Action>(l));
      rep.conflicts.push_back(std::move(c));
      continue;
    }
    const auto best = std::min_element(matches.begin(), matches.end(), [&](const Match& a, const Match& b) {
      const auto& ra = records[sources[a.src].idx];
      const auto& rb = records[sources[b.src].idx];
      return std::make_tuple(!a.exact, -a.sim, -ra.weight, ra.id) < std::make_tuple(!b.exact, -b.sim, -rb.weight, rb.id);
    });
    const auto& src = records[sources[best->src].idx];
    r.corrected_label = src.label();
    r.weight = src.weight * cfg.discount;
    r.tier = src.tier;
    r.provenance = Provenance::Propagated;
    r.source_id = src.id;
    (best->exact ? rep.exact : rep.similar) += 1;
  }
  return rep;
}

inline json to_json(const PropagationReport& r) {
  json conflicts = json::array();
  for (const auto& c : r.conflicts) {
    json labels = json::array();
    for (auto l : c.labels) labels.push_back(std::string(to_string(l)));
    conflicts.push_back({{"record_id", c.record_id}, {"narration", c.narration}, {"labels", labels}});
  }
  return json{{"gold", r.gold},
              {"propagated_exact", r.exact},
              {"propagated_similar", r.similar},
              {"unmatched", r.unmatched},
              {"expansion", r.expansion()},
              {"exact_expansion", r.exact_expansion()},
              {"conflicts", conflicts}};
}

// ---------------------------------------------------------------------------
// Coverage and conflicting annotations

struct LabelConflict {
  std::string normalized;
  std::int64_t occurrences = 0;  // labeled records with this text
  std::vector<Action> labels;    // distinct labels, sorted
};

struct CoverageReport {
  double total_seconds = 0.0;
  double gold_seconds = 0.0;
  double labeled_seconds = 0.0;  // gold plus propagated
  double gold_fraction = 0.0;
  double labeled_fraction = 0.0;
  std::vector<LabelConflict> conflicts;  // most frequent first
  Eigen::Matrix<std::int64_t, kNumActions, kNumActions> pair_histogram =
      Eigen::Matrix<std::int64_t, kNumActions, kNumActions>::Zero();  // upper triangle used
};

namespace detail {
inline double union_length(std::vector<std::pair<double, double>> iv) {
  std::sort(iv.begin(), iv.end());
  double total = 0.0, lo = 0.0, hi = -1.0;
  bool open = false;
  for (const auto& [a, b] : iv) {
    if (b <= a) continue;
    if (!open || a > hi) {
      if (open) total += hi - lo;
      lo = a, hi = b, open = true;
    } else {
      hi = std::max(hi, b);
    }
  }
  if (open) total += hi - lo;
  return total;
}
}  // namespace detail

/// Each labeled record covers [t, t + span_s) clipped to its video. Coverage is
/// the union of covered time over total video duration. Conflicts are
/// normalized narrations carrying more than one label among labeled records.
inline CoverageReport coverage_and_conflicts(std::span<const AnnotationRecord> records,
                                             const std::map<std::string, double>& durations, double span_s = 1.0) {
  CoverageReport rep;
  for (const auto& [vid, d] : durations) {
    if (!(d >= 0.0)) throw InputError("coverage: negative duration for " + vid);
    rep.total_seconds += d;
  }
  if (rep.total_seconds <= 0.0) throw InputError("coverage: total duration is zero");
  std::map<std::string, std::vector<std::pair<double, double>>> gold, labeled;
  std::map<std::string, std::pair<std::int64_t, std::set<int>>> texts;
  for (const auto& r : records) {
    if (r.provenance == Provenance::Unlabeled || r.weight <= 0.0) continue;
    auto it = durations.find(r.video_id);
    if (it == durations.end()) throw InputError("coverage: no duration for video " + r.video_id);
    const std::pair<double, double> iv{std::clamp(r.timestamp_s, 0.0, it->second),
                                       std::clamp(r.timestamp_s + span_s, 0.0, it->second)};
    labeled[r.video_id].push_back(iv);
    if (r.provenance == Provenance::Gold) gold[r.video_id].push_back(iv);
    auto& t = texts[normalize_narration(r.narration)];
    t.first += 1;
    t.second.insert(index(r.label()));
  }
  for (auto& [v, iv] : gold) rep.gold_seconds += detail::union_length(iv);
  for (auto& [v, iv] : labeled) rep.labeled_seconds += detail::union_length(iv);
  rep.gold_fraction = rep.gold_seconds / rep.total_seconds;
  rep.labeled_fraction = rep.labeled_seconds / rep.total_seconds;
  for (const auto& [text, info] : texts) {
    if (info.second.size() < 2) continue;
    LabelConflict c{text, info.first, {}};
    for (int l : info.second) c.labels.push_back(static_cast<Action>(l));
    for (std::size_t i = 0; i < c.labels.size(); ++i)
      for (std::size_t j = i + 1; j < c.labels.size(); ++j) rep.pair_histogram(index(c.labels[i]), index(c.labels[j])) += 1;
    rep.conflicts.push_back(std::move(c));
  }
  std::stable_sort(rep.conflicts.begin(), rep.conflicts.end(),
                   [](const LabelConflict& a, const LabelConflict& b) { return a.occurrences > b.occurrences; });
  return rep;
}

inline json to_json(const CoverageReport& r) {
  json conflicts = json::array();
  for (const auto& c : r.conflicts) {
    json labels = json::array();
    for (auto l : c.labels) labels.push_back(std::string(to_string(l)));
    conflicts.push_back({{"narration", c.normalized}, {"occurrences", c.occurrences}, {"labels", labels}});
  }
  json pairs = json::array();
  for (int i = 0; i < kNumActions; ++i)
    for (int j = i + 1; j < kNumActions; ++j)
      if (r.pair_histogram(i, j) > 0)
        pairs.push_back({{"a", std::string(to_string(static_cast<Action>(i)))},
                         {"b", std::string(to_string(static_cast<Action>(j)))},
                         {"count", r.pair_histogram(i, j)}});
  return json{{"total_seconds", r.total_seconds},   {"gold_seconds", r.gold_seconds},
              {"labeled_seconds", r.labeled_seconds}, {"gold_coverage", r.gold_fraction},
              {"labeled_coverage", r.labeled_fraction}, {"conflicts", conflicts},
              {"conflict_pairs", pairs}};
}

}  // namespace hithar::datapipe
