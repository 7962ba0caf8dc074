// hithar: command-line front end for the synthetic corpus, annotation
// pipeline, training and analyses.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "hithar/cli/commands.hpp"

namespace {

using hithar::json;
namespace fs = std::filesystem;
namespace cli = hithar::cli;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = hithar::default_thread_count();
  std::string out;
};

// Path precedence: flag, then environment variable, then fallback.
std::string path_or_env(const std::string& flag, const char* env, const std::string& fallback = {}) {
  if (!flag.empty()) return flag;
  if (const char* v = std::getenv(env); v != nullptr && *v != '\0') return v;
  return fallback;
}

cli::RunConfig resolve_config(const Common& c) {
  const std::string path = path_or_env(c.config, "HITHAR_CONFIG");
  cli::RunConfig cfg = path.empty() ? cli::RunConfig{} : cli::load_run_config(path);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

fs::path resolve_out(const Common& c) {
  const std::string out = path_or_env(c.out, "HITHAR_OUT");
  if (out.empty()) throw hithar::ConfigError("no output directory: pass --out or set HITHAR_OUT");
  fs::create_directories(out);
  return out;
}

int exit_code(const char* kind) {
  const std::string k(kind);
  if (k == "config") return 2;
  if (k == "input") return 3;
  if (k == "io") return 4;
  if (k == "numeric") return 5;
  if (k == "metrics") return 6;
  return 1;
}

void report(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "Run config (JSON); env HITHAR_CONFIG");
  app->add_option("--seed", c.seed, "Master seed, overrides the config");
  app->add_option("--threads", c.threads, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
  if (with_out) app->add_option("--out", c.out, "Output directory; env HITHAR_OUT");
}

void print_summary(const json& j) { std::cout << j.dump() << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HiT-HAR toolkit: synthetic IMU corpus, annotation pipeline, training and analyses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("hithar ") + cli::kToolVersion + " (config schema " +
                                        std::to_string(cli::kSchemaVersion) + ")");
  app.set_help_all_flag("--help-all");

  Common common;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Per-epoch progress on stderr");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth, common);

  auto* prepare = app.add_subcommand("prepare", "Annotation pipeline, windowing and video split");
  add_common(prepare, common);
  std::string imu_dir, labels, annotations;
  prepare->add_option("--imu", imu_dir, "Directory of per-video IMU CSV files; env HITHAR_IMU");
  prepare->add_option("--labels", labels, "Action span records (JSONL); env HITHAR_LABELS");
  prepare->add_option("--annotations", annotations, "Narration records (JSONL); env HITHAR_ANNOTATIONS");

  std::string data, checkpoint, split = "test";
  auto* train = app.add_subcommand("train", "Train a model on a prepared dataset");
  add_common(train, common);
  train->add_option("--data", data, "Prepared dataset (dataset.hhds); env HITHAR_DATA");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on one split");
  add_common(eval, common);
  eval->add_option("--data", data, "Prepared dataset; env HITHAR_DATA");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint from train; env HITHAR_CHECKPOINT");
  eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* sweep = app.add_subcommand("sweep", "Train one model per beta and report the Pareto front");
  add_common(sweep, common);
  sweep->add_option("--data", data, "Prepared dataset; env HITHAR_DATA");
  std::vector<double> betas;
  sweep->add_option("--betas", betas, "Override the config's beta list");

  auto* analyze = app.add_subcommand("analyze", "Separability, transitions, KNN ceiling, embeddings");
  add_common(analyze, common);
  analyze->add_option("--data", data, "Prepared dataset; env HITHAR_DATA");
  analyze->add_option("--checkpoint", checkpoint, "Optional checkpoint for embeddings; env HITHAR_CHECKPOINT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return 64;
  }

  try {
    auto progress = [&](const hithar::training::EpochRecord& r) {
      if (verbose)
        std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " val_action_f1 " << r.val.action_macro_f1
                  << " val_scenario_f1 " << r.val.scenario_macro_f1 << std::endl;
    };
    auto need = [](const std::string& v, const char* what) {
      if (v.empty()) throw hithar::ConfigError(std::string("missing ") + what);
      return v;
    };

    if (*synth) {
      const auto cfg = resolve_config(common);
      print_summary(cli::run_synth(cfg, resolve_out(common), common.threads));
    } else if (*prepare) {
      const auto cfg = resolve_config(common);
      cli::PrepareInputs in;
      in.imu_dir = need(path_or_env(imu_dir, "HITHAR_IMU"), "--imu");
      if (auto l = path_or_env(labels, "HITHAR_LABELS"); !l.empty()) in.labels = l;
      if (auto a = path_or_env(annotations, "HITHAR_ANNOTATIONS"); !a.empty()) in.annotations = a;
      print_summary(cli::run_prepare(cfg, in, resolve_out(common), common.threads));
    } else if (*train) {
      const auto cfg = resolve_config(common);
      print_summary(cli::run_train(cfg, need(path_or_env(data, "HITHAR_DATA"), "--data"), resolve_out(common),
                                   common.threads, progress));
    } else if (*eval) {
      print_summary(cli::run_eval(need(path_or_env(data, "HITHAR_DATA"), "--data"),
                                  need(path_or_env(checkpoint, "HITHAR_CHECKPOINT"), "--checkpoint"), split,
                                  resolve_out(common), common.threads));
    } else if (*sweep) {
      auto cfg = resolve_config(common);
      if (!betas.empty()) {
        cfg.sweep_betas = betas;
        cfg.validate();
      }
      print_summary(cli::run_sweep(cfg, need(path_or_env(data, "HITHAR_DATA"), "--data"), resolve_out(common),
                                   common.threads, [&](double, const hithar::training::EpochRecord& r) { progress(r); }));
    } else if (*analyze) {
      const auto cfg = resolve_config(common);
      std::optional<fs::path> ck;
      if (auto c = path_or_env(checkpoint, "HITHAR_CHECKPOINT"); !c.empty()) ck = c;
      print_summary(cli::run_analyze(cfg, need(path_or_env(data, "HITHAR_DATA"), "--data"), ck, resolve_out(common),
                                     common.threads));
    }
  } catch (const hithar::Error& e) {
    report(e.kind(), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    report("io", e.what());
    return 4;
  } catch (const std::exception& e) {
    report("error", e.what());
    return 1;
  }
  return 0;
}
