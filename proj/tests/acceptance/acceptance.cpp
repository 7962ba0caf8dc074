// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Criteria 4 to 9 share one run of the CLI on the desk
// config; 5 adds a sweep on the same corpus with a longer budget; 11 runs the
// smoke config twice.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "hithar/cli/commands.hpp"
#include "hithar/training/gradcheck.hpp"
#include "narrations.hpp"

using namespace hithar;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradStep = 1e-4;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr double kPaperParams = 703'000.0;
constexpr double kParamTol = 0.15;
constexpr double kFocalTol = 1e-6;
constexpr double kAffineTol = 1e-9;
constexpr double kMinActionF1 = 0.80;
constexpr double kEndToEndSeconds = 20.0 * 60.0;
constexpr double kScenarioChanceTol = 0.10;
constexpr double kActionChanceTol = 0.15;
constexpr double kBetaGapTol = 0.05;
constexpr double kAlpha = 0.05;
constexpr int kNullDraws = 200;
constexpr double kNullRateTol = 0.03;
constexpr int kNullVideosPerSide = 40;
constexpr double kTransitionTol = 0.05;
constexpr std::int64_t kTransitionCount = 10'000;
constexpr double kRowSumTol = 1e-9;
constexpr double kPermutedTol = 0.10;
constexpr int kFuzzRecords = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

class Checks {
 public:
  void add(bool ok, std::string what) {
    pass_ = pass_ && ok;
    if (!detail_.empty()) detail_ += "; ";
    detail_ += (ok ? "" : "FAILED ") + std::move(what);
  }
  Outcome done() const { return {pass_, detail_}; }

 private:
  bool pass_ = true;
  std::string detail_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

struct Env {
  fs::path cli, work, configs;
  int threads = 1;
};

void run_cli(const Env& env, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + env.cli.string() + "\" " + args + " --threads " + std::to_string(env.threads) +
                          " > \"" + log.string() + "\" 2>&1";
  if (std::system(cmd.c_str()) != 0) throw Error("command failed (see " + log.string() + "): " + cmd);
}

struct Pipeline {
  fs::path root;
  double pipeline_seconds = 0.0;
  fs::path dataset() const { return root / "prepare" / "dataset.hhds"; }
  fs::path checkpoint() const { return root / "train" / "checkpoint.hhck"; }
};

/// synth -> prepare -> train -> eval -> analyze under `root`.
Pipeline run_pipeline(const Env& env, const fs::path& config, const fs::path& root, bool annotations) {
  fs::remove_all(root);
  fs::create_directories(root);
  Pipeline p{root};
  const std::string cfg = "--config \"" + config.string() + "\"";
  auto q = [](const fs::path& x) { return "\"" + x.string() + "\""; };
  const auto t0 = std::chrono::steady_clock::now();
  run_cli(env, "synth " + cfg + " --out " + q(root / "synth"), root / "synth.log");
  std::string inputs = "--imu " + q(root / "synth" / "imu") + " --labels " + q(root / "synth" / "labels.jsonl");
  if (annotations) inputs += " --annotations " + q(root / "synth" / "annotations.jsonl");
  run_cli(env, "prepare " + cfg + " " + inputs + " --out " + q(root / "prepare"), root / "prepare.log");
  run_cli(env, "-v train " + cfg + " --data " + q(p.dataset()) + " --out " + q(root / "train"), root / "train.log");
  run_cli(env, "eval --data " + q(p.dataset()) + " --checkpoint " + q(p.checkpoint()) + " --split test --out " +
                   q(root / "eval"),
          root / "eval.log");
  p.pipeline_seconds = seconds_since(t0);
  run_cli(env, "analyze " + cfg + " --data " + q(p.dataset()) + " --checkpoint " + q(p.checkpoint()) + " --out " +
                   q(root / "analyze"),
          root / "analyze.log");
  return p;
}

// --- 1 ---------------------------------------------------------------------

Outcome gradient_check() {
  const auto cfg = model::ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  Checks c;
  double worst = 0.0;
  std::string worst_name;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto batch = fixtures::random_batch(cfg, seed + 100, 2);
    const auto checks =
        training::gradient_check(net, net.init_params(seed), batch, {}, model::Mode::Eval, seed, kGradStep);
    for (const auto& t : checks)
      if (t.rel_error > worst) {
        worst = t.rel_error;
        worst_name = t.name + " (seed " + std::to_string(seed) + ")";
      }
  }
  const double secs = seconds_since(t0);
  c.add(worst < kGradRelTol, "max per-tensor relative error " + num(worst * 1e6, 3) + "e-6 at " + worst_name +
                                 " < 1e-4 over seeds 1,2,3 (D=16 S=4 L=20)");
  c.add(secs < kGradSeconds, num(secs, 1) + " s < 120 s");
  return c.done();
}

// --- 2 ---------------------------------------------------------------------

Outcome parameter_count() {
  const model::ModelConfig cfg;
  const auto n = model::HiTHAR<float>(cfg).param_count();
  const double dev = std::abs(static_cast<double>(n) - kPaperParams) / kPaperParams;
  std::ostringstream widths;
  widths << "stem " << cfg.stem_channels << ", blocks";
  for (int b : cfg.block_channels) widths << " " << b;
  widths << ", GRU " << cfg.gru_hidden << "x2, pool " << cfg.attn_pool_dim << ", D " << cfg.embed_dim << ", FF "
         << cfg.wat_ff << ", gate " << cfg.gate_hidden;
  Checks c;
  c.add(dev < kParamTol, std::to_string(n) + " parameters, " + num(100.0 * dev, 2) + "% from 703K (" +
                             widths.str() + ")");
  return c.done();
}

// --- 3 ---------------------------------------------------------------------

// Focal term written directly from its definition, no smoothing.
double focal_direct(const std::vector<double>& z, int target, double gamma) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double p = std::exp(z[static_cast<std::size_t>(target)] - m) / s;
  return -std::pow(1.0 - p, gamma) * std::log(p);
}

Outcome focal_and_multitask() {
  Checks c;
  const Eigen::VectorXd half = Eigen::VectorXd::Zero(2);  // p = 0.5
  const double g0 = training::focal_loss(half, 0, {1.0, 1.0}, 0.0, 0.0, 1.0);
  const double g2 = training::focal_loss(half, 0, {1.0, 1.0}, 2.0, 0.0, 1.0);
  c.add(std::abs(g0 - 0.693147) < kFocalTol && std::abs(g0 - std::log(2.0)) < kFocalTol,
        "gamma=0: " + num(g0, 7));
  c.add(std::abs(g2 - 0.173287) < kFocalTol && std::abs(g2 - 0.25 * std::log(2.0)) < kFocalTol,
        "gamma=2: " + num(g2, 7));

  const auto cfg = model::ModelConfig::tiny();
  const model::HiTHAR<double> net(cfg);
  const auto params = net.init_params(3);
  const auto batch = fixtures::random_batch(cfg, 4, 3);
  training::LossConfig lc;
  lc.label_smoothing = 0.0;
  lc.action_class_weights.assign(kNumActions, 1.0);
  lc.scenario_class_weights.assign(kNumScenarios, 1.0);
  double scen = 0.0, act = 0.0, wsum = 0.0;
  for (const auto& s : batch) {
    const auto out = net.forward(params, s);
    const Eigen::VectorXd zs = out.scenario_logits.col(0);
    scen += focal_direct({zs.data(), zs.data() + zs.size()}, index(s.scenario), lc.focal_gamma);
    for (std::size_t t = 0; t < s.windows.size(); ++t) {
      const auto& w = s.windows[t];
      if (!w.action) continue;
      const Eigen::VectorXd za = out.action_logits.col(static_cast<Eigen::Index>(t));
      act += w.weight * focal_direct({za.data(), za.data() + za.size()}, index(*w.action), lc.focal_gamma);
      wsum += w.weight;
    }
  }
  scen /= static_cast<double>(batch.size());
  act /= wsum;
  double worst = 0.0;
  for (double beta : {0.0, 0.5, 1.0}) {
    lc.beta = beta;
    const auto b = training::batch_loss(net, params, batch, lc, model::Mode::Eval);
    worst = std::max(worst, std::abs(b.total - (beta * scen + (1.0 - beta) * act)));
  }
  c.add(worst < kAffineTol, "L(beta) = beta*L_scen + (1-beta)*L_act at beta 0,0.5,1, max gap " +
                                num(worst * 1e12, 3) + "e-12");
  return c.done();
}

// --- 4, 5, 6, 9 (desk pipeline) ----------------------------------------------

struct DeskRun {
  Pipeline p;
  json metrics;   // eval on test, beta from the config
  json sweep;     // beta 0, 0.3 and 1
};

Outcome end_to_end(const DeskRun& d) {
  const auto& m = d.metrics.at("metrics");
  const double f1 = m.at("action_macro_f1").get<double>();
  std::string top;
  double best = -1.0, runner_up = -1.0;
  std::string per;
  for (const auto& [name, v] : m.at("per_class_f1").items()) {
    const double x = v.get<double>();
    per += (per.empty() ? "" : " ") + name.substr(0, 4) + "=" + num(x, 3);
    if (x > best) {
      runner_up = best;
      best = x;
      top = name;
    } else {
      runner_up = std::max(runner_up, x);
    }
  }
  const auto hist = read_json(d.p.root / "train" / "history.json");
  Checks c;
  c.add(f1 >= kMinActionF1, "test action macro-F1 " + num(f1, 3) + " >= 0.80");
  c.add(top == "Locomotion" && best > runner_up, "top class " + top + " (" + per + ")");
  c.add(hist.size() <= 15, std::to_string(hist.size()) + " epochs <= 15");
  c.add(d.p.pipeline_seconds < kEndToEndSeconds, "synth..eval " + num(d.p.pipeline_seconds / 60.0, 1) + " min < 20");
  return c.done();
}

Outcome beta_sweep(const DeskRun& d) {
  std::map<double, json> row;
  for (const auto& r : d.sweep.at("rows")) row[r.at("beta").get<double>()] = r;
  if (!row.count(0.0) || !row.count(0.3) || !row.count(1.0)) return {false, "sweep lacks beta 0, 0.3 or 1"};
  const double s0 = row[0.0]["scenario_macro_f1"], s0c = row[0.0]["scenario_chance_f1"];
  const double a1 = row[1.0]["action_macro_f1"], a1c = row[1.0]["action_chance_f1"];
  const double a0 = row[0.0]["action_macro_f1"], a3 = row[0.3]["action_macro_f1"];
  Checks c;
  c.add(std::abs(s0 - s0c) <= kScenarioChanceTol,
        "beta=0 scenario F1 " + num(s0, 3) + " vs chance " + num(s0c, 3));
  c.add(std::abs(a1 - a1c) <= kActionChanceTol, "beta=1 action F1 " + num(a1, 3) + " vs chance " + num(a1c, 3));
  c.add(std::abs(a3 - a0) <= kBetaGapTol, "beta=0.3 action F1 " + num(a3, 3) + " vs beta=0 " + num(a0, 3));
  return c.done();
}

Outcome separability(const DeskRun& d) {
  const auto sep = read_json(d.p.root / "analyze" / "separability.json");
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < sep.at("classes").size(); ++i) idx[sep["classes"][i].get<std::string>()] = static_cast<int>(i);
  auto at = [&](const char* key, const char* a, const char* b) {
    const auto& v = sep.at(key)[static_cast<std::size_t>(idx.at(a))][static_cast<std::size_t>(idx.at(b))];
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  Checks c;
  double min_loc = std::numeric_limits<double>::infinity(), max_p = 0.0;
  for (const char* other : {"ObjectTransfer", "TaskOperation", "Stationary", "Search"}) {
    min_loc = std::min(min_loc, at("bhattacharyya", "Locomotion", other));
    max_p = std::max(max_p, at("p_corrected", "Locomotion", other));
  }
  c.add(max_p < kAlpha, "Locomotion pairs significant, max corrected p " + num(max_p, 4));
  const double p_ss = at("p_corrected", "Stationary", "Search");
  c.add(p_ss >= kAlpha, "Stationary-Search corrected p " + num(p_ss, 3) + " (not significant)");
  const double ot_to = at("bhattacharyya", "ObjectTransfer", "TaskOperation");
  const double st_se = at("bhattacharyya", "Stationary", "Search");
  c.add(min_loc > std::max(ot_to, st_se), "min Locomotion D_B " + num(min_loc, 3) + " > max(OT-TO " +
                                              num(ot_to, 3) + ", ST-SE " + num(st_se, 3) + ")");
  return c.done();
}

Outcome knn_ceiling(const DeskRun& d, const cli::RunConfig& cfg, const Env& env) {
  const auto data = io::load_dataset(d.p.dataset());
  const auto feats = cli::window_features(data.videos, cfg.analysis.window_len, env.threads);
  Checks c;
  // Fold assignment exactly as analyze draws it.
  const auto fold = analysis::group_kfold(feats.groups, cfg.analysis.knn.folds, derive_seed(cfg.seed, "knn"));
  int leaks = 0;
  for (int f = 0; f < cfg.analysis.knn.folds; ++f) {
    std::set<std::string> train, test;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).insert(feats.groups[i]);
    for (const auto& v : test) leaks += train.count(v) ? 1 : 0;
  }
  c.add(leaks == 0, std::to_string(leaks) + " videos shared between train and test over " +
                        std::to_string(cfg.analysis.knn.folds) + " folds");

  auto labels = feats.labels;
  Rng rng(derive_seed(cfg.seed, "permuted"));
  std::shuffle(labels.begin(), labels.end(), rng);
  const auto perm = analysis::knn_ceiling(feats.x, labels, feats.groups, cfg.analysis.knn, 1, env.threads);
  const double pf1 = perm.front().macro_f1;
  c.add(std::abs(pf1 - 1.0 / kNumActions) <= kPermutedTol, "permuted-label macro-F1 " + num(pf1, 3) + " vs 0.200");

  const auto knn = read_json(d.p.root / "analyze" / "knn_ceiling.json");
  const double ceiling = knn.at("results")[0].at("macro_f1").get<double>();
  const double model_f1 = d.metrics.at("metrics").at("action_macro_f1").get<double>();
  c.add(model_f1 >= ceiling, "model " + num(model_f1, 3) + " >= KNN-5 ceiling " + num(ceiling, 3));
  return c.done();
}

// --- 7 ---------------------------------------------------------------------

/// Two disjoint random halves of the videos holding Locomotion, one point per
/// video on each side, so both samples come from the same distribution.
Outcome mmd_null(const DeskRun& d, const cli::RunConfig& cfg) {
  const auto data = io::load_dataset(d.p.dataset());
  const auto cp = analysis::class_points(data.videos, cfg.analysis.window_len, cfg.analysis.per_window,
                                         derive_seed(cfg.seed, "class_points"));
  const auto c = static_cast<std::size_t>(index(Action::Locomotion));
  const auto& pts = cp.points[c];
  const auto& groups = cp.groups[c];
  std::vector<int> videos(groups.begin(), groups.end());
  std::sort(videos.begin(), videos.end());
  videos.erase(std::unique(videos.begin(), videos.end()), videos.end());
  if (static_cast<int>(videos.size()) < 2 * kNullVideosPerSide) return {false, "too few Locomotion videos"};
  const int n_cmp = kNumActions * (kNumActions - 1) / 2;
  const std::uint64_t base = derive_seed(cfg.seed, "mmd_null");
  int raw = 0, corrected = 0;
  for (int draw = 0; draw < kNullDraws; ++draw) {
    const auto d64 = static_cast<std::uint64_t>(draw);
    Rng rng(derive_seed(base, d64, 0));
    std::shuffle(videos.begin(), videos.end(), rng);
    std::map<int, int> side;
    for (int i = 0; i < 2 * kNullVideosPerSide; ++i) side[videos[static_cast<std::size_t>(i)]] = i < kNullVideosPerSide ? 0 : 1;
    std::array<std::vector<Eigen::Index>, 2> rows;
    std::array<std::vector<int>, 2> gs;
    for (std::size_t r = 0; r < groups.size(); ++r)
      if (auto it = side.find(groups[r]); it != side.end()) {
        rows[static_cast<std::size_t>(it->second)].push_back(static_cast<Eigen::Index>(r));
        gs[static_cast<std::size_t>(it->second)].push_back(groups[r]);
      }
    std::array<analysis::Points, 2> sample;
    for (std::size_t s = 0; s < 2; ++s)
      sample[s] = analysis::subsample_groups(pts(rows[s], Eigen::all), gs[s], cfg.analysis.separability.mmd_cap,
                                             derive_seed(base, d64, 1 + s));
    const auto r = analysis::mmd_permutation_test(sample[0], sample[1], cfg.analysis.separability.n_perm,
                                                  derive_seed(base, d64, 3), n_cmp);
    raw += r.p_raw < kAlpha ? 1 : 0;
    corrected += r.p_corrected < kAlpha ? 1 : 0;
  }
  const double raw_rate = static_cast<double>(raw) / kNullDraws;
  const double cor_rate = static_cast<double>(corrected) / kNullDraws;
  Checks ch;
  ch.add(std::abs(raw_rate - kAlpha) <= kNullRateTol,
         "raw false-positive rate " + num(raw_rate, 3) + " over 200 Locomotion-vs-Locomotion draws");
  ch.add(cor_rate <= raw_rate, "corrected rate " + num(cor_rate, 3));
  return ch.done();
}

// --- 8 ---------------------------------------------------------------------

Outcome transitions(const DeskRun& d, const Env& env) {
  auto spec = signal::SynthSpec::defaults();
  spec.n_videos = 40;
  spec.duration_s = 600.0;
  const auto corpus = signal::synth_generate(spec, 2024, env.threads);
  const auto mats = analysis::transition_matrices(corpus, signal::kDefaultWindowLen);
  Checks c;
  double worst = 0.0, worst_sum = 0.0;
  std::int64_t fewest = std::numeric_limits<std::int64_t>::max();
  for (const auto& m : mats) {
    for (int r = 0; r < kNumActions; ++r)
      if (!m.empty_row[static_cast<std::size_t>(r)]) worst_sum = std::max(worst_sum, std::abs(m.probs.row(r).sum() - 1.0));
    for (const auto& p : spec.scenarios) {
      if (m.scope != to_string(p.scenario)) continue;
      fewest = std::min(fewest, m.total());
      for (int r = 0; r < kNumActions; ++r)
        for (int k = 0; k < kNumActions; ++k)
          worst = std::max(worst, std::abs(m.probs(r, k) - p.transitions[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)]));
    }
  }
  // Rows written by analyze on the desk corpus.
  for (const auto& m : read_json(d.p.root / "analyze" / "transitions.json"))
    for (const auto& row : m.at("probs")) {
      double s = 0.0;
      for (const auto& v : row) s += v.get<double>();
      if (s != 0.0) worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  c.add(fewest >= kTransitionCount, "fewest transitions per scenario " + std::to_string(fewest));
  c.add(worst <= kTransitionTol, "max cell error " + num(worst, 4) + " <= 0.05");
  c.add(worst_sum <= kRowSumTol, "max row-sum error " + num(worst_sum * 1e15, 2) + "e-15");
  return c.done();
}

// --- 10 --------------------------------------------------------------------

Outcome datapipe_checks() {
  using namespace datapipe;
  Checks c;
  const std::vector<std::int64_t> counts{100, 25};
  const auto q = sqrt_quota(counts, 30);
  c.add(q == std::vector<std::int64_t>{20, 10}, "sqrt_quota([100,25], 30) = [" + std::to_string(q[0]) + "," +
                                                    std::to_string(q[1]) + "]");

  int rows = 0, wrong = 0;
  for (double cw : {0.5, 0.6, 0.7})
    for (int v = 0; v < 4; ++v)
      for (bool secondary : {false, true})
        for (bool ambiguous : {false, true}) {
          auto r = fixtures::make("x", "v", 0, "c walks", Action::Locomotion);
          r.verdict = static_cast<Verdict>(v);
          r.has_secondary_choice = secondary;
          r.ambiguous_verb = ambiguous;
          if (r.verdict == Verdict::Corrected) r.corrected_label = Action::Search;
          int tier = 1;
          double w = 1.0;
          if (v == 2 || v == 3) {
            tier = 4;
            w = 0.0;
          } else if (v == 1) {
            tier = 3;
            w = cw;
          } else if (secondary || ambiguous) {
            tier = 2;
            w = 0.8;
          }
          const auto got = assign_tier(r, TierConfig{cw});
          wrong += (got.tier != tier || got.weight != w) ? 1 : 0;
          ++rows;
        }
  c.add(wrong == 0, "tier table " + std::to_string(rows - wrong) + "/" + std::to_string(rows) + " rows");

  auto recs = fixtures::fuzz_records(2024, kFuzzRecords);
  int not_idem = 0;
  for (const auto& r : recs) {
    const auto once = normalize_narration(r.narration);
    not_idem += normalize_narration(once) != once ? 1 : 0;
  }
  auto signature = [](const std::vector<AnnotationRecord>& rs) {
    std::set<std::pair<std::string, std::set<std::string>>> out;
    for (const auto& g : dedup_narrations(rs)) {
      std::set<std::string> ids;
      for (auto m : g.members) ids.insert(rs[m].id);
      out.insert({g.normalized + "|" + std::string(to_string(g.label)), ids});
    }
    return out;
  };
  const auto ref = signature(recs);
  bool order_ok = true;
  std::mt19937_64 shuffler(9);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(recs.begin(), recs.end(), shuffler);
    order_ok = order_ok && signature(recs) == ref;
  }
  std::vector<AnnotationRecord> reps;
  const auto groups = dedup_narrations(recs);
  for (const auto& g : groups) reps.push_back(recs[g.representative]);
  const bool dedup_idem = dedup_narrations(reps).size() == groups.size();
  c.add(not_idem == 0 && order_ok && dedup_idem,
        "normalize/dedup idempotent and order-invariant over 1000 fuzzed records (" + std::to_string(groups.size()) +
            " groups)");

  std::map<std::string, double> durations;
  for (int v = 0; v < 10; ++v) durations["v" + std::to_string(v)] = 101.0;
  Rng rng(8);
  std::bernoulli_distribution verified(0.3);
  for (auto& r : recs)
    if (verified(rng)) r.verdict = Verdict::Gold;
  assign_tiers(recs);
  const double gold = coverage_and_conflicts(recs, durations).labeled_seconds;
  propagate_labels(recs, PropagationConfig{0.5, 0.9});
  std::vector<AnnotationRecord> grow;
  double last = 0.0;
  bool mono = true;
  for (const auto& r : recs) {
    grow.push_back(r);
    const double now = coverage_and_conflicts(grow, durations).labeled_seconds;
    mono = mono && now >= last - 1e-12;
    last = now;
  }
  c.add(mono && last >= gold, "coverage monotone as records are added (" + num(gold, 0) + " s gold, " + num(last, 0) +
                                  " s with propagation)");
  return c.done();
}

// --- 11 --------------------------------------------------------------------

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() != ".log")
      out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return out;
}

Outcome determinism(const Env& env) {
  const auto cfg = env.configs / "smoke.json";
  run_pipeline(env, cfg, env.work / "determinism_a", true);
  run_pipeline(env, cfg, env.work / "determinism_b", true);
  const auto a = tree_bytes(env.work / "determinism_a");
  const auto b = tree_bytes(env.work / "determinism_b");
  std::vector<std::string> differ;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) differ.push_back(name);
  }
  for (const auto& [name, bytes] : b)
    if (!a.count(name)) differ.push_back(name);
  Checks c;
  c.add(differ.empty() && a.size() > 10, std::to_string(a.size()) + " output files compared, " +
                                             std::to_string(differ.size()) + " differ" +
                                             (differ.empty() ? "" : " (first: " + differ.front() + ")"));
  return c.done();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Env env;
  std::string cli_path, work = "acceptance_work", configs = HITHAR_CONFIG_DIR;
  std::vector<int> only;
  app.add_option("--cli", cli_path, "Path to the hithar binary")->required();
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--configs", configs, "Directory holding desk.json, sweep.json and smoke.json");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--threads", env.threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);
  env.cli = fs::absolute(cli_path);
  env.work = fs::absolute(work);
  env.configs = configs;
  fs::create_directories(env.work);

  const auto desk_cfg = cli::load_run_config(env.configs / "desk.json");
  std::optional<DeskRun> desk;
  auto need_desk = [&]() -> const DeskRun& {
    if (!desk) {
      DeskRun d;
      d.p = run_pipeline(env, env.configs / "desk.json", env.work / "desk", false);
      d.metrics = read_json(d.p.root / "eval" / "metrics_test.json");
      run_cli(env, "-v sweep --config \"" + (env.configs / "sweep.json").string() + "\" --data \"" +
                       d.p.dataset().string() + "\" --out \"" + (d.p.root / "sweep").string() + "\"",
              d.p.root / "sweep.log");
      d.sweep = read_json(d.p.root / "sweep" / "sweep.json");
      desk = std::move(d);
    }
    return *desk;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient check", gradient_check},
      {"parameter count", parameter_count},
      {"focal and multi-task loss", focal_and_multitask},
      {"synthetic end-to-end", [&] { return end_to_end(need_desk()); }},
      {"beta sweep", [&] { return beta_sweep(need_desk()); }},
      {"separability", [&] { return separability(need_desk()); }},
      {"MMD null calibration", [&] { return mmd_null(need_desk(), desk_cfg); }},
      {"transition recovery", [&] { return transitions(need_desk(), env); }},
      {"KNN ceiling", [&] { return knn_ceiling(need_desk(), desk_cfg, env); }},
      {"datapipe", datapipe_checks},
      {"determinism", [&] { return determinism(env); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
