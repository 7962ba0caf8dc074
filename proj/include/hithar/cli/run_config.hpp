#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hithar/analysis/knn.hpp"
#include "hithar/analysis/separability.hpp"
#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/datapipe/pipeline.hpp"
#include "hithar/datapipe/simulate.hpp"
#include "hithar/io/binary.hpp"
#include "hithar/signal/augment.hpp"
#include "hithar/signal/dataset.hpp"
#include "hithar/signal/synth.hpp"
#include "hithar/training/trainer.hpp"

namespace hithar::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct AnalysisConfig {
  int window_len = 50;
  int per_window = 5;  // timesteps drawn from each labeled window for separability
  analysis::SeparabilityConfig separability;
  analysis::KnnConfig knn;
};

/// Everything a run depends on. Serialized back out with all defaults filled
/// in, and its hash is stamped on every output.
struct RunConfig {
  std::uint64_t seed = 42;
  model::ModelConfig model;
  training::LossConfig loss;
  training::OptimConfig optim;
  signal::AugmentConfig augment;
  signal::SamplingConfig sampling;
  signal::SplitFractions split;
  signal::SynthSpec synth = signal::SynthSpec::defaults();
  datapipe::NarrationSimConfig narrations;
  datapipe::TierConfig tiers;
  datapipe::PropagationConfig propagation;
  AnalysisConfig analysis;
  std::vector<double> sweep_betas{0.0, 0.3, 1.0};

  void validate() const {
    model.validate();
    loss.validate();
    optim.validate();
    augment.validate();
    synth.validate();
    narrations.validate();
    tiers.validate();
    propagation.validate();
    if (sampling.window_len != model.window_len)
      throw ConfigError("sampling.window_len must equal model.window_len");
    if (sampling.seq_len != model.seq_len) throw ConfigError("sampling.seq_len must equal model.seq_len");
    if (sampling.stride < 1) throw ConfigError("sampling.stride must be >= 1");
    if (analysis.window_len < 2 || analysis.per_window < 1) throw ConfigError("analysis: window_len or per_window too small");
    if (analysis.knn.k < 1 || analysis.knn.folds < 2) throw ConfigError("analysis.knn: need k >= 1 and folds >= 2");
    for (double b : sweep_betas)
      if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("sweep.betas must lie in [0,1]");
    if (sweep_betas.empty()) throw ConfigError("sweep.betas is empty");
  }

  training::TrainConfig train_config(int threads) const {
    return {model, loss, optim, augment, threads};
  }
};

inline json to_json(const RunConfig& c) {
  const auto& s = c.analysis.separability;
  return json{
      {"schema_version", kSchemaVersion},
      {"seed", c.seed},
      {"model", model::to_json(c.model)},
      {"loss", training::to_json(c.loss)},
      {"optim", training::to_json(c.optim)},
      {"augment", signal::to_json(c.augment)},
      {"sampling", {{"window_len", c.sampling.window_len}, {"stride", c.sampling.stride}, {"seq_len", c.sampling.seq_len}}},
      {"split", {{"train", c.split.train}, {"val", c.split.val}}},
      {"synth", signal::to_json(c.synth)},
      {"narrations", datapipe::to_json(c.narrations)},
      {"datapipe",
       {{"corrected_weight", c.tiers.corrected_weight},
        {"propagation_threshold", c.propagation.threshold},
        {"propagation_discount", c.propagation.discount}}},
      {"analysis",
       {{"window_len", c.analysis.window_len},
        {"per_window", c.analysis.per_window},
        {"separability", analysis::to_json(s)},
        {"knn", {{"k", c.analysis.knn.k}, {"folds", c.analysis.knn.folds}, {"standardize", c.analysis.knn.standardize}}}}},
      {"sweep", {{"betas", c.sweep_betas}}}};
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  StrictReader r(j, "config");
  int schema = kSchemaVersion;
  r.get("schema_version", schema).get("seed", c.seed);
  if (schema != kSchemaVersion)
    throw ConfigError("config: schema_version " + std::to_string(schema) + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  if (const json* m = r.sub("model")) c.model = model::model_config_from_json(*m);
  if (const json* l = r.sub("loss")) c.loss = training::loss_config_from_json(*l);
  if (const json* o = r.sub("optim")) c.optim = training::optim_config_from_json(*o);
  if (const json* a = r.sub("augment")) c.augment = signal::augment_config_from_json(*a);
  if (const json* s = r.sub("sampling")) {
    StrictReader sr(*s, "sampling");
    sr.get("window_len", c.sampling.window_len).get("stride", c.sampling.stride).get("seq_len", c.sampling.seq_len);
    sr.finish();
  }
  if (const json* s = r.sub("split")) {
    StrictReader sr(*s, "split");
    sr.get("train", c.split.train).get("val", c.split.val);
    sr.finish();
  }
  if (const json* s = r.sub("synth")) c.synth = signal::synth_spec_from_json(*s);
  if (const json* n = r.sub("narrations")) c.narrations = datapipe::narration_sim_from_json(*n);
  if (const json* d = r.sub("datapipe")) {
    StrictReader dr(*d, "datapipe");
    dr.get("corrected_weight", c.tiers.corrected_weight)
        .get("propagation_threshold", c.propagation.threshold)
        .get("propagation_discount", c.propagation.discount);
    dr.finish();
  }
  if (const json* a = r.sub("analysis")) {
    StrictReader ar(*a, "analysis");
    ar.get("window_len", c.analysis.window_len).get("per_window", c.analysis.per_window);
    if (const json* s = ar.sub("separability")) c.analysis.separability = analysis::separability_config_from_json(*s);
    if (const json* k = ar.sub("knn")) {
      StrictReader kr(*k, "analysis.knn");
      kr.get("k", c.analysis.knn.k).get("folds", c.analysis.knn.folds).get("standardize", c.analysis.knn.standardize);
      kr.finish();
    }
    ar.finish();
  }
  if (const json* s = r.sub("sweep")) {
    StrictReader sr(*s, "sweep");
    sr.get("betas", c.sweep_betas);
    sr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(io::read_file(p));
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

/// Digest of the fully resolved config (keys sorted, defaults filled in).
inline std::string config_hash(const RunConfig& c) { return io::digest(to_json(c).dump()); }

}  // namespace hithar::cli
