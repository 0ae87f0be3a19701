#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ilap/calibration.hpp"
#include "ilap/config.hpp"
#include "ilap/data.hpp"

namespace ilap {

/// Files of one run (one method, one seed).
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config;      // effective config, INI
  std::filesystem::path runlog;      // one JSON record per line
  std::filesystem::path metrics;     // flat key = value
  std::filesystem::path checkpoint;  // learner + state after the last exposure
  std::filesystem::path plots;

  static RunPaths at(const std::filesystem::path& dir);
};

/// <output_dir>/<method>/seed_<seed>
std::filesystem::path run_dir(const RunConfig& cfg, std::uint64_t seed);

using Metrics = std::map<std::string, std::string>;
void write_metrics(const std::filesystem::path& path, const Metrics& m);
Metrics read_metrics(const std::filesystem::path& path);
double metric_value(const Metrics& m, const std::string& key);

struct RunOutcome {
  std::filesystem::path dir;
  Metrics metrics;
};

/// Runs the exposure loop for cfg.method with one seed, writing the run log,
/// checkpoints, metrics and plots under run_dir(cfg, seed). Any error leaves
/// the log intact up to the last completed exposure.
RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed, const Dataset& data);
RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed);

/// Continues an interrupted run from its last checkpoint.
RunOutcome resume_experiment(const std::filesystem::path& dir);

/// Parsed run log.
struct RunLogData {
  nlohmann::json header;
  std::vector<nlohmann::json> exposures;
  nlohmann::json final_record;  // null when the run did not finish
};
RunLogData read_runlog(const std::filesystem::path& path);

/// Recomputes the metrics file content from the log alone.
Metrics replay_runlog(const std::filesystem::path& path);

struct OodRow {
  std::string method;
  std::size_t runs = 0;
  double fpr95_mean = 0, fpr95_std = 0;
  double auroc_mean = 0, auroc_std = 0;
  double aupr_mean = 0, aupr_std = 0;
};

/// Runs (or, with reuse, reads back) every method over cfg.seeds and reports
/// FPR95 / AUROC / AUPR as mean and sample standard deviation across seeds.
std::vector<OodRow> evaluate_ood(const RunConfig& cfg, const std::vector<Method>& methods,
                                 bool reuse_existing = true);
std::string format_ood_table(const std::vector<OodRow>& rows);

/// Accuracy and classes-detected curves for one or more runs (overlaid), and
/// the feature-distance drift plot for feature-distance runs.
std::vector<std::filesystem::path> emit_plots(const std::vector<std::filesystem::path>& runlogs,
                                              const std::filesystem::path& out_dir);
void emit_sweep_plot(const SweepResult& sweep, const std::filesystem::path& path);

}  // namespace ilap
