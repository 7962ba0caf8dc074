#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/taxonomy.hpp"

namespace hithar::training {

/// Rows are true classes, columns predicted classes.
struct Confusion {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  explicit Confusion(int classes = 0) : counts(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(classes, classes)) {}

  int classes() const { return static_cast<int>(counts.rows()); }
  void add(int truth, int pred) {
    if (truth < 0 || truth >= classes() || pred < 0 || pred >= classes())
      throw InputError("confusion: class index out of range");
    counts(truth, pred) += 1;
  }
  std::int64_t total() const { return counts.sum(); }
  std::int64_t support(int c) const { return counts.row(c).sum(); }
  std::int64_t predicted(int c) const { return counts.col(c).sum(); }

  double accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(counts.trace()) / static_cast<double>(n);
  }

  /// 2TP / (2TP + FP + FN); 0 when the class never occurs nor is predicted.
  std::vector<double> per_class_f1() const {
    std::vector<double> f1(static_cast<std::size_t>(classes()), 0.0);
    for (int c = 0; c < classes(); ++c) {
      const auto tp = counts(c, c);
      const auto denom = support(c) + predicted(c);
      if (denom > 0) f1[static_cast<std::size_t>(c)] = 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    return f1;
  }

  /// Unweighted mean over all classes.
  double macro_f1() const {
    const auto f1 = per_class_f1();
    if (f1.empty()) return 0.0;
    double s = 0.0;
    for (double v : f1) s += v;
    return s / static_cast<double>(f1.size());
  }

  /// Mean over classes that occur in the targets or the predictions.
  double macro_f1_present() const {
    const auto f1 = per_class_f1();
    double s = 0.0;
    int n = 0;
    for (int c = 0; c < classes(); ++c) {
      if (support(c) + predicted(c) == 0) continue;
      s += f1[static_cast<std::size_t>(c)];
      ++n;
    }
    return n == 0 ? 0.0 : s / n;
  }

  /// Expected macro-F1 of a predictor that ignores its input but keeps the
  /// observed prediction marginals: F1_c = 2 pi_c q_c / (pi_c + q_c), averaged
  /// over classes present in targets or predictions.
  double chance_macro_f1() const {
    const double n = static_cast<double>(total());
    if (n == 0.0) return 0.0;
    double s = 0.0;
    int k = 0;
    for (int c = 0; c < classes(); ++c) {
      const double pi = static_cast<double>(support(c)) / n;
      const double q = static_cast<double>(predicted(c)) / n;
      if (pi + q == 0.0) continue;
      s += 2.0 * pi * q / (pi + q);
      ++k;
    }
    return k == 0 ? 0.0 : s / k;
  }
};

struct Metrics {
  double action_macro_f1 = 0.0;
  double action_micro_acc = 0.0;
  double scenario_macro_f1 = 0.0;
  double scenario_micro_acc = 0.0;
  double action_chance_f1 = 0.0;
  double scenario_chance_f1 = 0.0;
  std::vector<double> per_class_f1;
  Confusion confusion{kNumActions};
  Confusion scenario_confusion{kNumScenarios};
  std::int64_t labeled_windows = 0;
  std::int64_t sequences = 0;
};

/// Action metrics average over all five classes; scenario metrics over the
/// scenarios present in targets or predictions.
inline Metrics metrics_from_confusions(const Confusion& action, const Confusion& scenario) {
  if (action.total() == 0) throw MetricsError("no labeled windows to evaluate");
  Metrics m;
  m.confusion = action;
  m.scenario_confusion = scenario;
  m.per_class_f1 = action.per_class_f1();
  m.action_macro_f1 = action.macro_f1();
  m.action_micro_acc = action.accuracy();
  m.action_chance_f1 = action.chance_macro_f1();
  m.scenario_macro_f1 = scenario.macro_f1_present();
  m.scenario_micro_acc = scenario.accuracy();
  m.scenario_chance_f1 = scenario.chance_macro_f1();
  m.labeled_windows = action.total();
  m.sequences = scenario.total();
  return m;
}

inline json confusion_json(const Confusion& c) {
  json rows = json::array();
  for (int r = 0; r < c.classes(); ++r) {
    json row = json::array();
    for (int k = 0; k < c.classes(); ++k) row.push_back(c.counts(r, k));
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const Metrics& m) {
  json per_class = json::object();
  for (int c = 0; c < kNumActions; ++c)
    per_class[std::string(to_string(static_cast<Action>(c)))] = m.per_class_f1[static_cast<std::size_t>(c)];
  return json{{"action_macro_f1", m.action_macro_f1},
              {"action_micro_acc", m.action_micro_acc},
              {"action_chance_f1", m.action_chance_f1},
              {"scenario_macro_f1", m.scenario_macro_f1},
              {"scenario_micro_acc", m.scenario_micro_acc},
              {"scenario_chance_f1", m.scenario_chance_f1},
              {"per_class_f1", per_class},
              {"confusion", confusion_json(m.confusion)},
              {"scenario_confusion", confusion_json(m.scenario_confusion)},
              {"labeled_windows", m.labeled_windows},
              {"sequences", m.sequences}};
}

}  // namespace hithar::training
