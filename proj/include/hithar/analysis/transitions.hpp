#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hithar/core/json.hpp"
#include "hithar/core/taxonomy.hpp"
#include "hithar/signal/channels.hpp"
#include "hithar/signal/windows.hpp"

namespace hithar::analysis {

using LabelStream = std::vector<std::optional<Action>>;

struct TransitionMatrix {
  std::string scope = "global";  // "global" or a scenario name
  Eigen::Matrix<std::int64_t, kNumActions, kNumActions> counts =
      Eigen::Matrix<std::int64_t, kNumActions, kNumActions>::Zero();
  Eigen::Matrix<double, kNumActions, kNumActions> probs = Eigen::Matrix<double, kNumActions, kNumActions>::Zero();
  std::array<bool, kNumActions> empty_row{};  // no outgoing transitions observed

  std::int64_t total() const { return counts.sum(); }
};

/// Counts transitions between consecutive labeled entries of each stream; an
/// unlabeled entry breaks adjacency. Rows with no observations stay zero and
/// are flagged.
inline TransitionMatrix transition_matrix(std::span<const LabelStream> streams, std::string scope = "global") {
  TransitionMatrix m;
  m.scope = std::move(scope);
  for (const auto& s : streams)
    for (std::size_t t = 1; t < s.size(); ++t)
      if (s[t - 1] && s[t]) m.counts(index(*s[t - 1]), index(*s[t])) += 1;
  for (int r = 0; r < kNumActions; ++r) {
    const auto n = m.counts.row(r).sum();
    m.empty_row[static_cast<std::size_t>(r)] = n == 0;
    if (n > 0) m.probs.row(r) = m.counts.row(r).cast<double>() / static_cast<double>(n);
  }
  return m;
}

/// Labels of non-overlapping windows of `window_len` samples.
inline LabelStream label_stream(const signal::ChannelizedSequence& seq, int window_len) {
  LabelStream out;
  for (std::int64_t b = 0; b + window_len <= seq.length(); b += window_len) {
    const auto span = signal::resolve_window_label(seq.spans, b, b + window_len);
    out.push_back(span && span->weight > 0.0 ? std::optional<Action>(span->action) : std::nullopt);
  }
  return out;
}

/// Global matrix followed by one per scenario present, in scenario order.
inline std::vector<TransitionMatrix> transition_matrices(std::span<const signal::ChannelizedSequence> corpus,
                                                         int window_len) {
  std::vector<LabelStream> all;
  std::array<std::vector<LabelStream>, kNumScenarios> by_scenario;
  for (const auto& seq : corpus) {
    all.push_back(label_stream(seq, window_len));
    by_scenario[static_cast<std::size_t>(index(seq.scenario))].push_back(all.back());
  }
  std::vector<TransitionMatrix> out{transition_matrix(all)};
  for (int s = 0; s < kNumScenarios; ++s)
    if (!by_scenario[static_cast<std::size_t>(s)].empty())
      out.push_back(transition_matrix(by_scenario[static_cast<std::size_t>(s)],
                                      std::string(to_string(static_cast<Scenario>(s)))));
  return out;
}

inline json to_json(const TransitionMatrix& m) {
  json probs = json::array(), counts = json::array(), empty = json::array();
  for (int r = 0; r < kNumActions; ++r) {
    json pr = json::array(), cr = json::array();
    for (int c = 0; c < kNumActions; ++c) {
      pr.push_back(m.probs(r, c));
      cr.push_back(m.counts(r, c));
    }
    probs.push_back(pr);
    counts.push_back(cr);
    empty.push_back(m.empty_row[static_cast<std::size_t>(r)]);
  }
  return json{{"scope", m.scope}, {"classes", kActionNames}, {"probs", probs}, {"counts", counts},
              {"empty_rows", empty}, {"transitions", m.total()}};
}

inline std::string to_csv(std::span<const TransitionMatrix> ms) {
  std::ostringstream os;
  os.precision(10);
  os << "scope,from,to,count,probability\n";
  for (const auto& m : ms)
    for (int r = 0; r < kNumActions; ++r)
      for (int c = 0; c < kNumActions; ++c)
        os << m.scope << "," << kActionNames[static_cast<std::size_t>(r)] << ","
           << kActionNames[static_cast<std::size_t>(c)] << "," << m.counts(r, c) << "," << m.probs(r, c) << "\n";
  return os.str();
}

}  // namespace hithar::analysis
