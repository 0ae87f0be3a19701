#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ilap/calibration.hpp"
#include "ilap/config.hpp"
#include "ilap/data.hpp"
#include "ilap/errors.hpp"
#include "ilap/harness.hpp"

namespace fs = std::filesystem;
using namespace ilap;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "INI config file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "Override one key, e.g. --set train.epochs=5")->take_all();
    app->add_option("--seeds", seeds, "Seeds to run (overrides run.seeds)");
    app->add_option("-o,--out", out, "Output directory (overrides run.output_dir)");
  }

  RunConfig load() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out.empty()) cfg.output_dir = out;
    cfg.validate();
    return cfg;
  }
};

void print_metrics(const Metrics& m) {
  for (const auto& [k, v] : m) fmt::print("  {} = {}\n", k, v);
}

int cmd_run(const Common& c) {
  const RunConfig cfg = c.load();
  const Dataset data = load_dataset(cfg.dataset_options());
  for (auto seed : cfg.seeds) {
    const auto r = run_experiment(cfg, seed, data);
    fmt::print("{}\n", r.dir.string());
    print_metrics(r.metrics);
  }
  return 0;
}

int cmd_sweep(const Common& c) {
  const RunConfig cfg = c.load();
  const Dataset data = load_dataset(cfg.dataset_options());
  const SweepResult r = run_imbalance_sweep(data.train, cfg.sweep_config());
  const Calibration cal = select_lambda_theta(r);
  const fs::path dir = cfg.output_dir / "calibration";
  fs::create_directories(dir);
  nlohmann::json j = r;
  j["lambda_star"] = cal.lambda;
  j["theta_star"] = cal.theta;
  std::ofstream(dir / "sweep.json") << j.dump(2) << '\n';
  emit_sweep_plot(r, dir / "sweep.svg");
  fmt::print("{:>8} {:>10} {:>13} {:>10}\n", "lambda", "repeated", "non-repeated", "bystander");
  for (std::size_t i = 0; i < r.lambda_grid.size(); ++i) {
    fmt::print("{:>8.3f} {:>10.4f} {:>13.4f} {:>10.4f}\n", r.lambda_grid[i], r.drop_repeated[i],
               r.drop_nonrepeated[i], i < r.drop_bystander.size() ? r.drop_bystander[i] : 0.0);
  }
  fmt::print("lambda* = {:g}, theta* = {:.4f}\nwrote {}\n", cal.lambda, cal.theta, dir.string());
  return 0;
}

int cmd_ood(const Common& c, const std::vector<std::string>& method_names, bool rerun) {
  const RunConfig cfg = c.load();
  std::vector<Method> methods;
  for (const auto& m : method_names) methods.push_back(parse_method(m));
  const auto rows = evaluate_ood(cfg, methods, !rerun);
  const std::string table = format_ood_table(rows);
  fmt::print("{}", table);
  fs::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "ood_table.txt") << table;
  return 0;
}

int cmd_plot(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<fs::path> logs;
  for (const auto& r : runs) {
    const fs::path p = fs::is_directory(r) ? RunPaths::at(r).runlog : fs::path(r);
    if (!fs::exists(p)) throw IngestionError("no run log at " + p.string());
    logs.push_back(p);
  }
  const fs::path dir = out.empty() ? (logs.size() == 1 ? logs.front().parent_path() / "plots" : fs::path("plots"))
                                   : fs::path(out);
  for (const auto& p : emit_plots(logs, dir)) fmt::print("{}\n", p.string());
  return 0;
}

int cmd_resume(const std::string& dir) {
  const auto r = resume_experiment(dir);
  fmt::print("{}\n", r.dir.string());
  print_metrics(r.metrics);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental learning of repeated and novel classes from unlabeled exposures"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  Common run_opts, sweep_opts, ood_opts;
  auto* run = app.add_subcommand("run", "Run one method over an exposure stream for each seed");
  run_opts.attach(run);

  auto* sweep = app.add_subcommand("sweep", "Class-imbalance sweep and lambda/theta selection");
  sweep_opts.attach(sweep);

  auto* ood = app.add_subcommand("ood-eval", "FPR95/AUROC/AUPR table over methods and seeds");
  ood_opts.attach(ood);
  std::vector<std::string> methods{"ilap_ci", "ilap_noci", "msp", "odin", "feature_distance"};
  bool rerun = false;
  ood->add_option("--methods", methods, "Methods to compare")->capture_default_str();
  ood->add_flag("--rerun", rerun, "Ignore finished runs and run again");

  auto* plot = app.add_subcommand("plot", "Plots from run logs");
  std::vector<std::string> runs;
  std::string plot_out;
  plot->add_option("runs", runs, "Run directories or runlog.jsonl files")->required();
  plot->add_option("-o,--out", plot_out, "Output directory");

  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  std::string resume_dir;
  resume->add_option("run_dir", resume_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep) return cmd_sweep(sweep_opts);
    if (*ood) return cmd_ood(ood_opts, methods, rerun);
    if (*plot) return cmd_plot(runs, plot_out);
    if (*resume) return cmd_resume(resume_dir);
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
