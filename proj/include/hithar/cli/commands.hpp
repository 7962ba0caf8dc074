#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hithar/analysis/embeddings.hpp"
#include "hithar/analysis/features.hpp"
#include "hithar/analysis/knn.hpp"
#include "hithar/analysis/separability.hpp"
#include "hithar/analysis/transitions.hpp"
#include "hithar/cli/run_config.hpp"
#include "hithar/datapipe/pipeline.hpp"
#include "hithar/datapipe/records.hpp"
#include "hithar/datapipe/simulate.hpp"
#include "hithar/io/binary.hpp"
#include "hithar/io/checkpoint.hpp"
#include "hithar/io/dataset_file.hpp"
#include "hithar/io/imu_csv.hpp"
#include "hithar/signal/dataset.hpp"
#include "hithar/signal/synth.hpp"
#include "hithar/training/trainer.hpp"

namespace hithar::cli {

namespace fs = std::filesystem;

/// Training and evaluation run in single precision; gradient checks use double.
using Scalar = float;

// ---------------------------------------------------------------------------
// Shared helpers

/// Labeled non-overlapping windows per class plus the unlabeled count.
struct WindowCounts {
  std::array<std::int64_t, kNumActions> per_class{};
  std::int64_t unlabeled = 0;
};

inline WindowCounts count_windows(std::span<const signal::ChannelizedSequence> corpus, int window_len) {
  WindowCounts c;
  for (const auto& seq : corpus)
    for (std::int64_t b = 0; b + window_len <= seq.length(); b += window_len) {
      const auto span = signal::resolve_window_label(seq.spans, b, b + window_len);
      if (span && span->weight > 0.0) c.per_class[static_cast<std::size_t>(index(span->action))] += 1;
      else c.unlabeled += 1;
    }
  return c;
}

inline WindowCounts count_windows(std::span<const signal::SequenceSample> samples) {
  WindowCounts c;
  for (const auto& s : samples)
    for (const auto& w : s.windows) {
      if (w.action && w.weight > 0.0) c.per_class[static_cast<std::size_t>(index(*w.action))] += 1;
      else c.unlabeled += 1;
    }
  return c;
}

inline json to_json(const WindowCounts& c) {
  json j = json::object();
  for (int a = 0; a < kNumActions; ++a) j[std::string(kActionNames[static_cast<std::size_t>(a)])] = c.per_class[static_cast<std::size_t>(a)];
  j["unlabeled"] = c.unlabeled;
  return j;
}

inline json stamp(const RunConfig& cfg) {
  return json{{"tool", "hithar"}, {"version", kToolVersion}, {"schema_version", kSchemaVersion},
              {"config_hash", config_hash(cfg)}, {"seed", cfg.seed}};
}

inline void write_json(const fs::path& p, const json& j) { io::write_file(p, j.dump(2) + "\n"); }

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct Splits {
  io::PreparedDataset data;
  std::vector<signal::SequenceSample> train, val, test;
};

inline Splits load_splits(const fs::path& dataset, const RunConfig& cfg, int threads) {
  Splits s;
  s.data = io::load_dataset(dataset);
  const auto tr = s.data.subset(s.data.split.train);
  const auto va = s.data.subset(s.data.split.val);
  const auto te = s.data.subset(s.data.split.test);
  s.train = signal::build_samples(tr, s.data.stats, cfg.sampling, threads);
  s.val = signal::build_samples(va, s.data.stats, cfg.sampling, threads);
  s.test = signal::build_samples(te, s.data.stats, cfg.sampling, threads);
  return s;
}

// ---------------------------------------------------------------------------
// synth

/// Writes imu/<video>.csv, labels.jsonl, annotations.jsonl, config.json and
/// manifest.json under `out`.
inline json run_synth(const RunConfig& cfg, const fs::path& out, int threads) {
  const auto corpus = signal::synth_generate(cfg.synth, cfg.seed, threads);
  fs::create_directories(out / "imu");
  json videos = json::array();
  std::vector<io::LabelRecord> labels;
  std::vector<std::string> csv(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    std::ostringstream os;
    io::write_imu_csv(os, corpus[i]);
    csv[i] = os.str();
  });
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& v = corpus[i];
    io::write_file(out / "imu" / (v.video_id + ".csv"), csv[i]);
    videos.push_back({{"video_id", v.video_id},
                      {"scenario", std::string(to_string(v.scenario))},
                      {"samples", v.length()},
                      {"imu_digest", io::digest(csv[i])}});
    for (auto& l : io::labels_of(v)) labels.push_back(std::move(l));
  }
  std::ostringstream ls;
  io::write_labels(ls, labels);
  io::write_file(out / "labels.jsonl", ls.str());
  const auto notes = datapipe::simulate_narrations(corpus, cfg.narrations, cfg.seed);
  std::ostringstream ns;
  datapipe::write_annotations(ns, notes);
  io::write_file(out / "annotations.jsonl", ns.str());
  write_json(out / "config.json", to_json(cfg));

  json manifest = stamp(cfg);
  manifest["kind"] = "synth";
  manifest["window_len"] = cfg.sampling.window_len;
  manifest["window_counts"] = to_json(count_windows(corpus, cfg.sampling.window_len));
  manifest["n_videos"] = corpus.size();
  manifest["n_label_spans"] = labels.size();
  manifest["n_annotations"] = notes.size();
  manifest["labels_digest"] = io::digest(ls.str());
  manifest["annotations_digest"] = io::digest(ns.str());
  manifest["videos"] = videos;
  write_json(out / "manifest.json", manifest);
  return manifest;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareInputs {
  fs::path imu_dir;
  std::optional<fs::path> labels;
  std::optional<fs::path> annotations;
};

/// Reads raw inputs, runs the annotation pipeline when narrations are given,
/// splits by video and writes dataset.hhds plus per-split manifests.
inline json run_prepare(const RunConfig& cfg, const PrepareInputs& in, const fs::path& out, int threads) {
  if (!in.labels && !in.annotations) throw InputError("prepare: need --labels and/or --annotations");
  if (!fs::is_directory(in.imu_dir)) throw InputError("prepare: IMU directory not found: " + in.imu_dir.string());

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in.imu_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("prepare: no .csv files in " + in.imu_dir.string());

  std::vector<signal::ChannelizedSequence> videos(files.size());
  parallel_for(files.size(), threads, [&](std::size_t i) {
    auto f = io::open_in(files[i]);
    io::ImuStream s;
    try {
      s = io::read_imu_csv(f);
    } catch (const InputError& e) {
      throw InputError(files[i].filename().string() + ": " + e.what());
    }
    if (std::abs(s.sample_rate - signal::kSampleRateHz) > 0.01 * signal::kSampleRateHz)
      throw InputError(files[i].filename().string() + ": sample rate " + fmt(s.sample_rate) + " Hz, expected 50 Hz");
    videos[i].video_id = files[i].stem().string();
    videos[i].sample_rate = signal::kSampleRateHz;
    videos[i].channels = signal::derive_channels(s.acc, s.gyro);
  });
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < videos.size(); ++i) by_id[videos[i].video_id] = i;
  std::map<std::string, Scenario> scenario_of;
  auto note_scenario = [&](const std::string& vid, Scenario s) {
    auto [it, fresh] = scenario_of.emplace(vid, s);
    if (!fresh && it->second != s) throw InputError("prepare: video " + vid + " has conflicting scenario labels");
  };
  auto require_video = [&](const std::string& vid) -> signal::ChannelizedSequence& {
    auto it = by_id.find(vid);
    if (it == by_id.end()) throw InputError("prepare: labels reference video " + vid + " with no IMU file");
    return videos[it->second];
  };

  json summary = stamp(cfg);
  summary["kind"] = "prepare";
  if (in.labels) {
    auto f = io::open_in(*in.labels);
    const auto labels = io::read_labels(f);
    for (const auto& l : labels) {
      auto& v = require_video(l.video_id);
      note_scenario(l.video_id, l.scenario);
      v.spans.push_back(io::to_span(l, v.sample_rate));
    }
    summary["n_label_spans"] = labels.size();
  }
  if (in.annotations) {
    auto f = io::open_in(*in.annotations);
    auto records = datapipe::read_annotations(f);
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
      return std::tie(a.video_id, a.timestamp_s, a.id) < std::tie(b.video_id, b.timestamp_s, b.id);
    });
    const auto groups = datapipe::dedup_narrations(records);
    datapipe::assign_tiers(records, cfg.tiers);
    const auto prop = datapipe::propagate_labels(records, cfg.propagation);
    std::map<std::string, double> durations;
    for (const auto& v : videos) durations[v.video_id] = static_cast<double>(v.length()) / v.sample_rate;
    for (const auto& r : records) {
      require_video(r.video_id);
      note_scenario(r.video_id, r.scenario);
    }
    const auto cov = datapipe::coverage_and_conflicts(records, durations);
    std::array<std::int64_t, 5> tiers{};
    for (const auto& r : records)
      if (r.provenance == datapipe::Provenance::Gold) tiers[static_cast<std::size_t>(r.tier)] += 1;
    for (auto& [vid, spans] : datapipe::records_to_spans(records)) {
      auto& v = require_video(vid);
      v.spans.insert(v.spans.end(), spans.begin(), spans.end());
    }
    fs::create_directories(out / "datapipe");
    std::ostringstream rs;
    datapipe::write_annotations(rs, records);
    io::write_file(out / "datapipe" / "records.jsonl", rs.str());
    json pj = datapipe::to_json(prop);
    pj["dedup_groups"] = groups.size();
    pj["records"] = records.size();
    pj["tier_counts"] = {{"1", tiers[1]}, {"2", tiers[2]}, {"3", tiers[3]}, {"4", tiers[4]}};
    write_json(out / "datapipe" / "propagation.json", pj);
    write_json(out / "datapipe" / "coverage.json", datapipe::to_json(cov));
    std::string cc = "narration,occurrences,labels\n";
    for (const auto& c : cov.conflicts) {
      std::string labs;
      for (auto l : c.labels) labs += (labs.empty() ? "" : "|") + std::string(to_string(l));
      cc += "\"" + c.normalized + "\"," + std::to_string(c.occurrences) + "," + labs + "\n";
    }
    io::write_file(out / "datapipe" / "conflicts.csv", cc);
    io::write_file(out / "datapipe" / "coverage.csv",
                   "scope,seconds,fraction\ngold," + fmt(cov.gold_seconds) + "," + fmt(cov.gold_fraction) +
                       "\ngold+propagated," + fmt(cov.labeled_seconds) + "," + fmt(cov.labeled_fraction) + "\n");
    summary["annotations"] = {{"records", records.size()},       {"dedup_groups", groups.size()},
                              {"expansion", prop.expansion()},    {"gold_coverage", cov.gold_fraction},
                              {"labeled_coverage", cov.labeled_fraction}, {"conflicts", cov.conflicts.size()}};
  }
  std::vector<std::string> ids;
  for (auto& v : videos) {
    auto it = scenario_of.find(v.video_id);
    if (it == scenario_of.end()) throw InputError("prepare: no scenario known for video " + v.video_id);
    v.scenario = it->second;
    std::stable_sort(v.spans.begin(), v.spans.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    ids.push_back(v.video_id);
  }

  io::PreparedDataset ds;
  ds.split = signal::split_videos(ids, cfg.split, cfg.seed);
  signal::check_disjoint(ds.split);
  ds.videos = std::move(videos);
  ds.stats = signal::compute_norm_stats(ds.subset(ds.split.train));
  std::ostringstream bin;
  io::write_dataset(bin, ds);
  io::write_file(out / "dataset.hhds", bin.str());
  summary["dataset_digest"] = io::digest(bin.str());

  json splits = json::object();
  for (const auto& [name, ids_ref] : {std::pair<std::string, const std::vector<std::string>*>{"train", &ds.split.train},
                                     {"val", &ds.split.val},
                                     {"test", &ds.split.test}}) {
    const auto vids = ds.subset(*ids_ref);
    const auto samples = signal::build_samples(vids, ds.stats, cfg.sampling, threads);
    json m = stamp(cfg);
    m["kind"] = "split";
    m["split"] = name;
    m["video_ids"] = *ids_ref;
    m["n_sequences"] = samples.size();
    m["window_counts"] = to_json(count_windows(samples));
    write_json(out / "manifests" / (name + ".json"), m);
    splits[name] = {{"videos", ids_ref->size()}, {"sequences", samples.size()}};
  }
  summary["splits"] = splits;
  write_json(out / "prepare.json", summary);
  return summary;
}

// ---------------------------------------------------------------------------
// train / eval / sweep

inline std::string history_csv(std::span<const training::EpochRecord> history) {
  std::string s = "epoch,train_loss,train_scenario_loss,train_action_loss,lr,grad_norm,val_action_macro_f1,"
                  "val_scenario_macro_f1,improved\n";
  for (const auto& r : history)
    s += std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + fmt(r.train_scenario_loss) + "," +
         fmt(r.train_action_loss) + "," + fmt(r.lr) + "," + fmt(r.grad_norm) + "," + fmt(r.val.action_macro_f1) +
         "," + fmt(r.val.scenario_macro_f1) + "," + (r.improved ? "1" : "0") + "\n";
  return s;
}

/// Trains on the prepared dataset and writes checkpoint.hhck (best EMA
/// snapshot), history.json/.csv and train.json.
inline json run_train(const RunConfig& cfg, const fs::path& dataset, const fs::path& out, int threads,
                      const std::function<void(const training::EpochRecord&)>& on_epoch = {}) {
  const auto s = load_splits(dataset, cfg, threads);
  training::TrainData data{s.train, s.val, s.data.stats};
  const auto result = training::train<Scalar>(cfg.train_config(threads), data, cfg.seed, on_epoch);
  io::Checkpoint<Scalar> ck{to_json(cfg), result.best_params, result.best_ema, result.rng_state};
  std::ostringstream bin;
  io::write_checkpoint(bin, ck);
  io::write_file(out / "checkpoint.hhck", bin.str());
  json hist = json::array();
  for (const auto& r : result.history) hist.push_back(training::to_json(r));
  write_json(out / "history.json", hist);
  io::write_file(out / "history.csv", history_csv(result.history));
  json summary = stamp(cfg);
  summary["kind"] = "train";
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_action_macro_f1"] = result.best_val_f1;
  summary["epochs_run"] = result.history.size();
  summary["stopped_early"] = result.stopped_early;
  summary["param_count"] = model::HiTHAR<Scalar>(cfg.model).param_count();
  summary["checkpoint_digest"] = io::digest(bin.str());
  write_json(out / "train.json", summary);
  return summary;
}

inline std::span<const signal::SequenceSample> pick_split(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

inline std::string confusion_csv(const training::Confusion& c, std::span<const std::string_view> names) {
  std::string s = "true\\pred";
  for (auto n : names) s += "," + std::string(n);
  s += "\n";
  for (Eigen::Index r = 0; r < c.counts.rows(); ++r) {
    s += std::string(names[static_cast<std::size_t>(r)]);
    for (Eigen::Index k = 0; k < c.counts.cols(); ++k) s += "," + std::to_string(c.counts(r, k));
    s += "\n";
  }
  return s;
}

/// Scores the checkpoint's EMA weights. The model and sampling sections come
/// from the checkpoint, so eval never retrains or reinterprets the weights.
inline json run_eval(const fs::path& dataset, const fs::path& checkpoint, const std::string& split,
                     const fs::path& out, int threads) {
  const auto ck = io::load_checkpoint<Scalar>(checkpoint);
  const RunConfig cfg = run_config_from_json(ck.config);
  const auto s = load_splits(dataset, cfg, threads);
  const model::HiTHAR<Scalar> net(cfg.model);
  const auto m = training::evaluate(net, ck.ema, pick_split(s, split), threads);
  json j = stamp(cfg);
  j["kind"] = "eval";
  j["split"] = split;
  j["metrics"] = training::to_json(m);
  write_json(out / ("metrics_" + split + ".json"), j);
  io::write_file(out / ("confusion_action_" + split + ".csv"), confusion_csv(m.confusion, kActionNames));
  io::write_file(out / ("confusion_scenario_" + split + ".csv"), confusion_csv(m.scenario_confusion, kScenarioNames));
  return j;
}

inline json run_sweep(const RunConfig& cfg, const fs::path& dataset, const fs::path& out, int threads,
                      const std::function<void(double, const training::EpochRecord&)>& on_epoch = {}) {
  const auto s = load_splits(dataset, cfg, threads);
  training::TrainData data{s.train, s.val, s.data.stats};
  const auto rows = training::beta_sweep<Scalar>(cfg.train_config(threads), cfg.sweep_betas, data, s.test, cfg.seed,
                                                 on_epoch);
  json j = stamp(cfg);
  j["kind"] = "sweep";
  json arr = json::array();
  std::string csv = "beta,action_macro_f1,scenario_macro_f1,action_chance_f1,scenario_chance_f1,params,pareto\n";
  for (const auto& r : rows) {
    arr.push_back({{"beta", r.beta},
                   {"action_macro_f1", r.test.action_macro_f1},
                   {"scenario_macro_f1", r.test.scenario_macro_f1},
                   {"action_chance_f1", r.test.action_chance_f1},
                   {"scenario_chance_f1", r.test.scenario_chance_f1},
                   {"params", r.params},
                   {"pareto", r.pareto}});
    csv += fmt(r.beta) + "," + fmt(r.test.action_macro_f1) + "," + fmt(r.test.scenario_macro_f1) + "," +
           fmt(r.test.action_chance_f1) + "," + fmt(r.test.scenario_chance_f1) + "," + std::to_string(r.params) +
           "," + (r.pareto ? "1" : "0") + "\n";
  }
  j["rows"] = arr;
  write_json(out / "sweep.json", j);
  io::write_file(out / "sweep.csv", csv);
  return j;
}

// ---------------------------------------------------------------------------
// analyze

/// Hand-crafted features, labels and video ids of every labeled
/// non-overlapping window.
struct WindowFeatures {
  Eigen::MatrixXd x;
  std::vector<int> labels;
  std::vector<std::string> groups;
};

inline WindowFeatures window_features(std::span<const signal::ChannelizedSequence> corpus, int window_len,
                                      int threads = 1) {
  std::vector<std::vector<std::pair<Eigen::RowVectorXd, int>>> per(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto& seq = corpus[i];
    for (std::int64_t b = 0; b + window_len <= seq.length(); b += window_len) {
      const auto span = signal::resolve_window_label(seq.spans, b, b + window_len);
      if (!span || span->weight <= 0.0) continue;
      per[i].emplace_back(analysis::extract_features(seq.channels.middleCols(b, window_len), seq.sample_rate).transpose(),
                          index(span->action));
    }
  });
  WindowFeatures f;
  std::size_t n = 0;
  for (const auto& v : per) n += v.size();
  f.x.resize(static_cast<Eigen::Index>(n), analysis::kNumFeatures);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < per.size(); ++i)
    for (const auto& [x, y] : per[i]) {
      f.x.row(row++) = x;
      f.labels.push_back(y);
      f.groups.push_back(corpus[i].video_id);
    }
  return f;
}

inline json run_analyze(const RunConfig& cfg, const fs::path& dataset, const std::optional<fs::path>& checkpoint,
                        const fs::path& out, int threads) {
  const auto data = io::load_dataset(dataset);
  const auto& corpus = data.videos;
  json summary = stamp(cfg);
  summary["kind"] = "analyze";

  const auto points = analysis::class_points(corpus, cfg.analysis.window_len, cfg.analysis.per_window,
                                             derive_seed(cfg.seed, "class_points"));
  const auto sep = analysis::separability_matrix(points.points, cfg.analysis.separability,
                                                 derive_seed(cfg.seed, "separability"), threads, points.groups);
  write_json(out / "separability.json", analysis::to_json(sep));
  io::write_file(out / "separability.csv", analysis::to_csv(sep));

  const auto trans = analysis::transition_matrices(corpus, cfg.analysis.window_len);
  json tj = json::array();
  for (const auto& m : trans) tj.push_back(analysis::to_json(m));
  write_json(out / "transitions.json", tj);
  io::write_file(out / "transitions.csv", analysis::to_csv(trans));

  const auto feats = window_features(corpus, cfg.analysis.window_len, threads);
  const auto ceiling = analysis::knn_ceiling(feats.x, feats.labels, feats.groups, cfg.analysis.knn,
                                             derive_seed(cfg.seed, "knn"), threads);
  json cj = json::array();
  std::string ccsv = "granularity,macro_f1,accuracy\n";
  for (const auto& c : ceiling) {
    cj.push_back(analysis::to_json(c));
    ccsv += std::to_string(c.granularity) + "," + fmt(c.macro_f1) + "," + fmt(c.accuracy) + "\n";
  }
  json knn = {{"k", cfg.analysis.knn.k}, {"folds", cfg.analysis.knn.folds}, {"windows", feats.labels.size()},
              {"results", cj}};

  if (checkpoint) {
    const auto ck = io::load_checkpoint<Scalar>(*checkpoint);
    const RunConfig mcfg = run_config_from_json(ck.config);
    const model::HiTHAR<Scalar> net(mcfg.model);
    const auto test = signal::build_samples(data.subset(data.split.test), data.stats, mcfg.sampling, threads);
    io::write_file(out / "embeddings.csv", analysis::export_embeddings(net, ck.ema, test, threads));
    const auto m = training::evaluate(net, ck.ema, test, threads);
    knn["model_test_action_macro_f1"] = m.action_macro_f1;
    knn["model_exceeds_ceiling"] = m.action_macro_f1 >= ceiling.front().macro_f1;
    summary["embeddings"] = "embeddings.csv";
  }
  write_json(out / "knn_ceiling.json", knn);
  io::write_file(out / "knn_ceiling.csv", ccsv);
  summary["separability"] = "separability.json";
  summary["transitions"] = "transitions.json";
  summary["knn_ceiling"] = "knn_ceiling.json";
  write_json(out / "analyze.json", summary);
  return summary;
}

}  // namespace hithar::cli
