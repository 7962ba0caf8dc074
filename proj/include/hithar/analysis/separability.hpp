#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/parallel.hpp"
#include "hithar/core/rng.hpp"
#include "hithar/core/taxonomy.hpp"
#include "hithar/signal/channels.hpp"
#include "hithar/signal/windows.hpp"

namespace hithar::analysis {

/// Rows are samples, columns dimensions.
using Points = Eigen::MatrixXd;

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased
};

inline Moments moments(const Points& x) {
  if (x.rows() < 2) throw InputError("moments: need at least 2 samples");
  Moments m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - m.mean.transpose();
  m.cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  return m;
}

/// Bhattacharyya distance between Gaussians fitted to two samples:
///   D = 1/8 dmu' S^-1 dmu + 1/2 ln(det S / sqrt(det Sx det Sy)), S = (Sx + Sy) / 2,
/// with lambda = 1e-6 trace(S) / d added to the diagonals of Sx and Sy.
inline double bhattacharyya_gaussian(const Moments& a, const Moments& b) {
  const Eigen::Index d = a.mean.size();
  if (b.mean.size() != d) throw InputError("bhattacharyya: dimension mismatch");
  const double lambda = 1e-6 * (0.5 * (a.cov + b.cov)).trace() / static_cast<double>(d);
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd sa = a.cov + lambda * ident;
  const Eigen::MatrixXd sb = b.cov + lambda * ident;
  const Eigen::MatrixXd s = 0.5 * (sa + sb);
  const Eigen::LLT<Eigen::MatrixXd> llt(s), llt_a(sa), llt_b(sb);
  if (llt.info() != Eigen::Success || llt_a.info() != Eigen::Success || llt_b.info() != Eigen::Success ||
      !(lambda > 0.0))
    throw NumericError("bhattacharyya: covariance singular after regularization", "covariance");
  auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& l) {
    return 2.0 * l.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const Eigen::VectorXd dmu = a.mean - b.mean;
  const double maha = dmu.dot(llt.solve(dmu));
  const double d_b = 0.125 * maha + 0.5 * (logdet(llt) - 0.5 * (logdet(llt_a) + logdet(llt_b)));
  return std::max(0.0, d_b);
}

inline double bhattacharyya_gaussian(const Points& x, const Points& y) {
  return bhattacharyya_gaussian(moments(x), moments(y));
}

/// Median pairwise Euclidean distance of the pooled sample.
inline double median_heuristic(const Points& x, const Points& y) {
  Points pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

/// Gaussian RBF Gram matrix exp(-|a-b|^2 / (2 sigma^2)) of the pooled sample.
inline Eigen::MatrixXd rbf_gram(const Points& pooled, double bandwidth) {
  const Eigen::VectorXd sq = pooled.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * pooled * pooled.transpose();
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  const double inv = -1.0 / (2.0 * bandwidth * bandwidth);
  return (d2.cwiseMax(0.0) * inv).array().exp().matrix();
}

/// Unbiased MMD^2 from a pooled Gram matrix; in_x[i] marks members of X.
inline double mmd2_from_gram(const Eigen::MatrixXd& k, const std::vector<char>& in_x) {
  const Eigen::Index n_total = k.rows();
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  double nx = 0.0;
  for (Eigen::Index i = 0; i < n_total; ++i) nx += in_x[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  const double ny = static_cast<double>(n_total) - nx;
  for (Eigen::Index j = 0; j < n_total; ++j) {
    const bool xj = in_x[static_cast<std::size_t>(j)];
    const double* col = k.col(j).data();
    for (Eigen::Index i = 0; i < j; ++i) {
      const bool xi = in_x[static_cast<std::size_t>(i)];
      if (xi && xj) sxx += col[i];
      else if (!xi && !xj) syy += col[i];
      else sxy += col[i];
    }
  }
  return 2.0 * sxx / (nx * (nx - 1.0)) + 2.0 * syy / (ny * (ny - 1.0)) - 2.0 * sxy / (nx * ny);
}

/// Unbiased U-statistic estimate of MMD^2 with a Gaussian RBF kernel.
inline double mmd2_unbiased(const Points& x, const Points& y, double bandwidth) {
  if (x.rows() < 2 || y.rows() < 2) throw InputError("mmd2_unbiased: need at least 2 samples per set");
  if (!(bandwidth > 0.0)) throw InputError("mmd2_unbiased: bandwidth must be positive");
  Points pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  std::vector<char> in_x(static_cast<std::size_t>(pooled.rows()), 0);
  std::fill(in_x.begin(), in_x.begin() + x.rows(), 1);
  return mmd2_from_gram(rbf_gram(pooled, bandwidth), in_x);
}

struct PermutationResult {
  double mmd2 = 0.0;
  double p_raw = 1.0;
  double p_corrected = 1.0;
  double bandwidth = 0.0;
};

/// Label-permutation test with median-heuristic bandwidth on the pooled
/// sample. p_raw = (1 + #{perm >= observed}) / (n_perm + 1); p_corrected
/// multiplies by `n_comparisons` and caps at 1.
inline PermutationResult mmd_permutation_test(const Points& x, const Points& y, int n_perm, std::uint64_t seed,
                                              int n_comparisons = 1) {
  if (x.rows() + y.rows() < 4 || x.rows() < 2 || y.rows() < 2)
    throw InputError("mmd_permutation_test: need at least 2 samples per set");
  PermutationResult r;
  r.bandwidth = median_heuristic(x, y);
  Points pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const Eigen::MatrixXd k = rbf_gram(pooled, r.bandwidth);
  std::vector<char> in_x(static_cast<std::size_t>(pooled.rows()), 0);
  std::fill(in_x.begin(), in_x.begin() + x.rows(), 1);
  r.mmd2 = mmd2_from_gram(k, in_x);
  Rng rng(derive_seed(seed, "mmd_permutation"));
  int exceed = 0;
  for (int p = 0; p < n_perm; ++p) {
    std::shuffle(in_x.begin(), in_x.end(), rng);
    if (mmd2_from_gram(k, in_x) >= r.mmd2) ++exceed;
  }
  r.p_raw = (1.0 + exceed) / (static_cast<double>(n_perm) + 1.0);
  r.p_corrected = std::min(1.0, r.p_raw * std::max(1, n_comparisons));
  return r;
}

// --- pairwise report ---------------------------------------------------------

struct SeparabilityConfig {
  int bhattacharyya_cap = 5000;  // per-class sample cap for the Gaussian fit
  int mmd_cap = 250;             // per-class sample cap for the permutation test
  int n_perm = 1000;
  double alpha = 0.05;
  int min_samples = 9;
};

inline json to_json(const SeparabilityConfig& c) {
  return json{{"bhattacharyya_cap", c.bhattacharyya_cap}, {"mmd_cap", c.mmd_cap}, {"n_perm", c.n_perm},
              {"alpha", c.alpha}, {"min_samples", c.min_samples}};
}

inline SeparabilityConfig separability_config_from_json(const json& j, SeparabilityConfig c = {}) {
  StrictReader r(j, "analysis.separability");
  r.get("bhattacharyya_cap", c.bhattacharyya_cap)
      .get("mmd_cap", c.mmd_cap)
      .get("n_perm", c.n_perm)
      .get("alpha", c.alpha)
      .get("min_samples", c.min_samples);
  r.finish();
  if (c.bhattacharyya_cap < 9 || c.mmd_cap < 2 || c.n_perm < 1 || !(c.alpha > 0.0 && c.alpha < 1.0))
    throw ConfigError("analysis.separability: caps, n_perm or alpha out of range");
  return c;
}

struct SeparabilityReport {
  std::vector<Action> classes;
  std::vector<bool> skipped;  // class had fewer than min_samples points
  std::vector<std::int64_t> counts;
  Eigen::MatrixXd bhattacharyya, mmd2, p_raw, p_corrected, bandwidth;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> significant;
  int n_comparisons = 0;
  double alpha = 0.05;

  int index_of(Action a) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == a) return static_cast<int>(i);
    return -1;
  }
};

/// Deterministic subsample of at most `cap` rows.
inline Points subsample_rows(const Points& x, int cap, std::uint64_t seed) {
  if (x.rows() <= cap) return x;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  Points out(cap, x.cols());
  for (int i = 0; i < cap; ++i) out.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

/// At most one row per group (random choice), then at most `cap` rows.
/// Points sharing a recording are not exchangeable, so the permutation test
/// draws from distinct groups.
inline Points subsample_groups(const Points& x, std::span<const int> groups, int cap, std::uint64_t seed) {
  if (groups.size() != static_cast<std::size_t>(x.rows()))
    throw InputError("subsample_groups: one group id per row required");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::unordered_set<int> seen;
  std::vector<Eigen::Index> keep;
  for (auto i : idx)
    if (seen.insert(groups[static_cast<std::size_t>(i)]).second) keep.push_back(i);
  if (keep.size() > static_cast<std::size_t>(cap)) keep.resize(static_cast<std::size_t>(cap));
  std::sort(keep.begin(), keep.end());
  Points out(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(keep[i]);
  return out;
}

/// All class pairs: Bhattacharyya on up to bhattacharyya_cap points per
/// class, MMD permutation test on up to mmd_cap, Bonferroni over the pairs
/// actually tested. With `groups` (one id per row, per class) the MMD sample
/// takes at most one point per group. Pairs run in parallel with per-pair seeds.
inline SeparabilityReport separability_matrix(std::span<const Points> per_class, const SeparabilityConfig& cfg,
                                              std::uint64_t seed, int threads = 1,
                                              std::span<const std::vector<int>> groups = {}) {
  if (!groups.empty() && groups.size() != per_class.size())
    throw InputError("separability_matrix: groups must be given for every class");
  const auto n = static_cast<Eigen::Index>(per_class.size());
  SeparabilityReport r;
  r.alpha = cfg.alpha;
  for (Eigen::Index c = 0; c < n; ++c) {
    r.classes.push_back(static_cast<Action>(c));
    r.counts.push_back(per_class[static_cast<std::size_t>(c)].rows());
    r.skipped.push_back(per_class[static_cast<std::size_t>(c)].rows() < cfg.min_samples);
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b)
      if (!r.skipped[static_cast<std::size_t>(a)] && !r.skipped[static_cast<std::size_t>(b)]) pairs.emplace_back(a, b);
  int usable = 0;
  for (bool s : r.skipped) usable += s ? 0 : 1;
  if (usable < 2) throw InputError("separability_matrix: fewer than 2 classes with enough samples");
  r.n_comparisons = static_cast<int>(pairs.size());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.bhattacharyya = Eigen::MatrixXd::Constant(n, n, nan);
  r.mmd2 = Eigen::MatrixXd::Constant(n, n, nan);
  r.p_raw = Eigen::MatrixXd::Constant(n, n, nan);
  r.p_corrected = Eigen::MatrixXd::Constant(n, n, nan);
  r.bandwidth = Eigen::MatrixXd::Constant(n, n, nan);
  r.significant = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (r.skipped[static_cast<std::size_t>(c)]) continue;
    r.bhattacharyya(c, c) = 0.0;
    r.mmd2(c, c) = 0.0;
    r.p_raw(c, c) = r.p_corrected(c, c) = 1.0;
  }

  std::vector<Points> bh(per_class.size()), mm(per_class.size());
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (r.skipped[c]) continue;
    bh[c] = subsample_rows(per_class[c], cfg.bhattacharyya_cap, derive_seed(seed, c, 1));
    mm[c] = groups.empty() ? subsample_rows(per_class[c], cfg.mmd_cap, derive_seed(seed, c, 2))
                           : subsample_groups(per_class[c], groups[c], cfg.mmd_cap, derive_seed(seed, c, 2));
  }
  std::vector<double> d_b(pairs.size());
  std::vector<PermutationResult> tests(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const auto [a, b] = pairs[i];
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    d_b[i] = bhattacharyya_gaussian(bh[ua], bh[ub]);
    tests[i] = mmd_permutation_test(mm[ua], mm[ub], cfg.n_perm, derive_seed(seed, ua + 1, ub + 1),
                                    r.n_comparisons);
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [a, b] = pairs[i];
    r.bhattacharyya(a, b) = r.bhattacharyya(b, a) = d_b[i];
    r.mmd2(a, b) = r.mmd2(b, a) = tests[i].mmd2;
    r.p_raw(a, b) = r.p_raw(b, a) = tests[i].p_raw;
    r.p_corrected(a, b) = r.p_corrected(b, a) = tests[i].p_corrected;
    r.bandwidth(a, b) = r.bandwidth(b, a) = tests[i].bandwidth;
    r.significant(a, b) = r.significant(b, a) = tests[i].p_corrected < cfg.alpha;
  }
  return r;
}

struct ClassPoints {
  std::vector<Points> points;             // per class
  std::vector<std::vector<int>> groups;   // per class: source sequence index of each row
};

/// Per-class 8-dim points: `per_window` random timesteps from every labeled
/// non-overlapping window, in the stream's own units.
inline ClassPoints class_points(std::span<const signal::ChannelizedSequence> corpus, int window_len, int per_window,
                                std::uint64_t seed) {
  std::vector<std::vector<Eigen::Matrix<double, 1, signal::kNumChannels>>> rows(kNumActions);
  ClassPoints cp;
  cp.groups.resize(kNumActions);
  for (std::size_t v = 0; v < corpus.size(); ++v) {
    const auto& seq = corpus[v];
    Rng rng(derive_seed(seed, seq.video_id));
    std::uniform_int_distribution<int> pick(0, window_len - 1);
    const std::int64_t count = seq.length() / window_len;
    for (std::int64_t w = 0; w < count; ++w) {
      const std::int64_t begin = w * window_len;
      const auto span = signal::resolve_window_label(seq.spans, begin, begin + window_len);
      if (!span || span->weight <= 0.0) continue;
      const auto c = static_cast<std::size_t>(index(span->action));
      for (int k = 0; k < per_window; ++k) {
        rows[c].push_back(seq.channels.col(begin + pick(rng)).transpose());
        cp.groups[c].push_back(static_cast<int>(v));
      }
    }
  }
  cp.points.resize(kNumActions);
  for (std::size_t c = 0; c < rows.size(); ++c) {
    cp.points[c].resize(static_cast<Eigen::Index>(rows[c].size()), signal::kNumChannels);
    for (std::size_t i = 0; i < rows[c].size(); ++i) cp.points[c].row(static_cast<Eigen::Index>(i)) = rows[c][i];
  }
  return cp;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (std::isfinite(m(r, c))) row.push_back(m(r, c));
      else row.push_back(nullptr);
    }
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const SeparabilityReport& r) {
  json classes = json::array(), counts = json::array(), skipped = json::array();
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    classes.push_back(std::string(to_string(r.classes[i])));
    counts.push_back(r.counts[i]);
    skipped.push_back(static_cast<bool>(r.skipped[i]));
  }
  json sig = json::array();
  for (Eigen::Index a = 0; a < r.significant.rows(); ++a) {
    json row = json::array();
    for (Eigen::Index b = 0; b < r.significant.cols(); ++b) row.push_back(static_cast<bool>(r.significant(a, b)));
    sig.push_back(row);
  }
  return json{{"classes", classes},
              {"counts", counts},
              {"skipped", skipped},
              {"n_comparisons", r.n_comparisons},
              {"alpha", r.alpha},
              {"bhattacharyya", matrix_json(r.bhattacharyya)},
              {"mmd2", matrix_json(r.mmd2)},
              {"p_raw", matrix_json(r.p_raw)},
              {"p_corrected", matrix_json(r.p_corrected)},
              {"bandwidth", matrix_json(r.bandwidth)},
              {"significant", sig}};
}

/// Heatmap cells, one line per unordered pair.
inline std::string to_csv(const SeparabilityReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "pair,class_a,class_b,bhattacharyya,mmd2,p_raw,p_corrected,significant\n";
  const auto n = static_cast<Eigen::Index>(r.classes.size());
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      if (r.skipped[static_cast<std::size_t>(a)] || r.skipped[static_cast<std::size_t>(b)]) continue;
      const auto ca = r.classes[static_cast<std::size_t>(a)], cb = r.classes[static_cast<std::size_t>(b)];
      os << kActionShortNames[static_cast<std::size_t>(index(ca))] << "-"
         << kActionShortNames[static_cast<std::size_t>(index(cb))] << "," << to_string(ca) << "," << to_string(cb)
         << "," << r.bhattacharyya(a, b) << "," << r.mmd2(a, b) << "," << r.p_raw(a, b) << ","
         << r.p_corrected(a, b) << "," << (r.significant(a, b) ? "true" : "false") << "\n";
    }
  }
  return os.str();
}

}  // namespace hithar::analysis
