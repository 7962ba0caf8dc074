#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/parallel.hpp"
#include "hithar/core/rng.hpp"
#include "hithar/core/taxonomy.hpp"
#include "hithar/training/metrics.hpp"

namespace hithar::analysis {

/// Fold index per sample. Groups are shuffled with the seed, stably sorted by
/// size (largest first) and each is placed in the currently lightest fold, so
/// every group lands in exactly one fold.
inline std::vector<int> group_kfold(std::span<const std::string> groups, int folds, std::uint64_t seed) {
  std::map<std::string, std::int64_t> sizes;
  for (const auto& g : groups) sizes[g] += 1;
  if (folds < 2) throw ConfigError("group_kfold: need at least 2 folds");
  if (static_cast<int>(sizes.size()) < folds)
    throw ConfigError("group_kfold: " + std::to_string(sizes.size()) + " groups cannot fill " +
                      std::to_string(folds) + " folds");
  std::vector<std::pair<std::string, std::int64_t>> order(sizes.begin(), sizes.end());
  Rng rng(derive_seed(seed, "group_kfold"));
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::int64_t> load(static_cast<std::size_t>(folds), 0);
  std::map<std::string, int> fold_of;
  for (const auto& [g, n] : order) {
    const auto f = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    fold_of[g] = f;
    load[static_cast<std::size_t>(f)] += n;
  }
  std::vector<int> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(fold_of[g]);
  return out;
}

/// k-nearest-neighbor majority vote (Euclidean). Ties between classes go to
/// the tied class holding the nearest of the k neighbors.
inline std::vector<int> knn_predict(const Eigen::MatrixXd& train, std::span<const int> train_labels,
                                    const Eigen::MatrixXd& test, int k, int n_classes, int threads = 1) {
  if (train.rows() == 0) throw InputError("knn_predict: empty training set");
  const int kk = std::min<int>(k, static_cast<int>(train.rows()));
  const Eigen::VectorXd train_sq = train.rowwise().squaredNorm();
  std::vector<int> pred(static_cast<std::size_t>(test.rows()));
  constexpr Eigen::Index kBlock = 256;
  const auto n_blocks = static_cast<std::size_t>((test.rows() + kBlock - 1) / kBlock);
  parallel_for(n_blocks, threads, [&](std::size_t b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index rows = std::min(kBlock, test.rows() - r0);
    // Squared distances up to the per-row constant |x|^2, which does not change ranks.
    Eigen::MatrixXd d = -2.0 * train * test.middleRows(r0, rows).transpose();
    d.colwise() += train_sq;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(train.rows()));
    for (Eigen::Index q = 0; q < rows; ++q) {
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      const double* col = d.col(q).data();
      std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](Eigen::Index a, Eigen::Index c) {
        return col[a] < col[c] || (col[a] == col[c] && a < c);
      });
      std::vector<int> votes(static_cast<std::size_t>(n_classes), 0);
      for (int j = 0; j < kk; ++j) votes[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])])] += 1;
      const int top = *std::max_element(votes.begin(), votes.end());
      int choice = -1;
      for (int j = 0; j < kk && choice < 0; ++j) {
        const int c = train_labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        if (votes[static_cast<std::size_t>(c)] == top) choice = c;
      }
      pred[static_cast<std::size_t>(r0 + q)] = choice;
    }
  });
  return pred;
}

/// Taxonomy granularities: 5 classes; 4 with Search merged into Stationary;
/// 3 additionally merging ObjectTransfer into TaskOperation.
inline int merge_label(int label, int granularity) {
  if (granularity <= 4 && label == index(Action::Search)) label = index(Action::Stationary);
  if (granularity <= 3 && label == index(Action::ObjectTransfer)) label = index(Action::TaskOperation);
  return label;
}

struct KnnConfig {
  int k = 5;
  int folds = 5;
  bool standardize = true;
};

struct CeilingResult {
  int granularity = 5;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  training::Confusion confusion{kNumActions};
};

/// Out-of-fold KNN predictions; features are standardized with each fold's
/// training mean and std.
inline std::vector<int> knn_cross_predict(const Eigen::MatrixXd& x, std::span<const int> labels,
                                          std::span<const int> fold, const KnnConfig& cfg, int threads = 1) {
  std::vector<int> pred(labels.size(), -1);
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
    if (te.empty()) continue;
    Eigen::MatrixXd xtr = x(tr, Eigen::all), xte = x(te, Eigen::all);
    if (cfg.standardize) {
      const Eigen::RowVectorXd mean = xtr.colwise().mean();
      Eigen::RowVectorXd sd = ((xtr.rowwise() - mean).array().square().colwise().sum() /
                               static_cast<double>(xtr.rows())).sqrt();
      for (Eigen::Index c = 0; c < sd.size(); ++c)
        if (!(sd(c) > 1e-12)) sd(c) = 1.0;
      xtr = (xtr.rowwise() - mean).array().rowwise() / sd.array();
      xte = (xte.rowwise() - mean).array().rowwise() / sd.array();
    }
    std::vector<int> ytr;
    for (auto i : tr) ytr.push_back(labels[static_cast<std::size_t>(i)]);
    const auto p = knn_predict(xtr, ytr, xte, cfg.k, kNumActions, threads);
    for (std::size_t j = 0; j < te.size(); ++j) pred[static_cast<std::size_t>(te[j])] = p[j];
  }
  return pred;
}

/// Per-window feature ceiling at 5, 4 and 3 class granularities. Labels are
/// merged before the neighbor vote; macro-F1 averages over classes present.
inline std::vector<CeilingResult> knn_ceiling(const Eigen::MatrixXd& features, std::span<const int> labels,
                                              std::span<const std::string> groups, const KnnConfig& cfg,
                                              std::uint64_t seed, int threads = 1) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()) || labels.size() != groups.size())
    throw InputError("knn_ceiling: features, labels and groups must have the same length");
  const auto fold = group_kfold(groups, cfg.folds, seed);
  std::vector<CeilingResult> out;
  for (int gran : {5, 4, 3}) {
    std::vector<int> merged(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) merged[i] = merge_label(labels[i], gran);
    const auto pred = knn_cross_predict(features, merged, fold, cfg, threads);
    CeilingResult r;
    r.granularity = gran;
    for (std::size_t i = 0; i < merged.size(); ++i) r.confusion.add(merged[i], pred[i]);
    r.macro_f1 = r.confusion.macro_f1_present();
    r.accuracy = r.confusion.accuracy();
    out.push_back(r);
  }
  return out;
}

inline json to_json(const CeilingResult& r) {
  return json{{"granularity", r.granularity}, {"macro_f1", r.macro_f1}, {"accuracy", r.accuracy},
              {"confusion", training::confusion_json(r.confusion)}};
}

}  // namespace hithar::analysis
