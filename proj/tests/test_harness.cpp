#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "ilap/errors.hpp"
#include "ilap/harness.hpp"

using namespace ilap;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(const fs::path& out, Method method = Method::ilap_ci) {
  RunConfig c;
  c.method = method;
  c.output_dir = out;
  c.dataset = "blobs2d";
  c.blobs.num_classes = 3;
  c.blobs.train_per_class = 600;
  c.blobs.test_per_class = 50;
  c.stream.repeats_per_class = 2;
  c.train = fixture::blob_training();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> exposure_lines(const fs::path& runlog) {
  std::vector<std::string> out;
  for (const auto& e : read_runlog(runlog).exposures) out.push_back(e.dump());
  return out;
}

}  // namespace

TEST_CASE("a run writes its artifacts and the log replays to the same metrics") {
  fixture::TempDir tmp("harness_run");
  const auto cfg = small_config(tmp.path());
  const auto data = make_blobs2d(cfg.blobs);
  const auto r = run_experiment(cfg, 0, data);
  const auto paths = RunPaths::at(r.dir);
  CHECK(r.dir == run_dir(cfg, 0));
  CHECK(fs::exists(paths.config));
  CHECK(fs::exists(paths.runlog));
  CHECK(fs::exists(paths.metrics));
  CHECK(fs::exists(paths.plots / "accuracy_classes.svg"));

  const auto log = read_runlog(paths.runlog);
  CHECK(log.exposures.size() == 6);
  CHECK_FALSE(log.final_record.is_null());
  for (const char* key : {"classes_detected", "mapped_accuracy", "fpr95", "auroc", "aupr", "detection_f1",
                          "label_map_bijective"}) {
    CHECK(r.metrics.count(key) == 1);
  }
  CHECK(metric_value(r.metrics, "exposures") == 6);
  CHECK(read_metrics(paths.metrics) == r.metrics);
  CHECK(replay_runlog(paths.runlog) == r.metrics);
  CHECK(load_run_config(paths.config).method == Method::ilap_ci);
}

TEST_CASE("runs are deterministic per seed") {
  fixture::TempDir a("harness_det_a"), b("harness_det_b");
  const auto data = make_blobs2d(small_config(a.path()).blobs);
  const auto ra = run_experiment(small_config(a.path()), 4, data);
  const auto rb = run_experiment(small_config(b.path()), 4, data);
  CHECK(slurp(RunPaths::at(ra.dir).metrics) == slurp(RunPaths::at(rb.dir).metrics));
  CHECK(exposure_lines(RunPaths::at(ra.dir).runlog) == exposure_lines(RunPaths::at(rb.dir).runlog));
}

TEST_CASE("an interrupted run resumes to the uninterrupted result") {
  fixture::TempDir full_dir("harness_full"), cut_dir("harness_cut");
  const auto data = make_blobs2d(small_config(full_dir.path()).blobs);
  const auto full = run_experiment(small_config(full_dir.path()), 2, data);

  // stop after three exposures, then drop the final record as a crash would
  auto cut_cfg = small_config(cut_dir.path());
  cut_cfg.max_exposures = 3;
  const auto cut = run_experiment(cut_cfg, 2, data);
  const auto paths = RunPaths::at(cut.dir);
  {
    auto lines = slurp(paths.runlog);
    lines.erase(lines.rfind('\n', lines.size() - 2) + 1);
    std::ofstream(paths.runlog, std::ios::binary | std::ios::trunc) << lines;
    cut_cfg.max_exposures = 0;
    std::ofstream cfg_out(paths.config);
    write_run_config(cfg_out, cut_cfg);
  }
  REQUIRE(read_runlog(paths.runlog).final_record.is_null());
  REQUIRE(read_runlog(paths.runlog).exposures.size() == 3);

  const auto resumed = resume_experiment(cut.dir);
  CHECK(resumed.metrics == full.metrics);
  CHECK(exposure_lines(paths.runlog) == exposure_lines(RunPaths::at(full.dir).runlog));

  // a finished run is left alone
  const auto again = resume_experiment(cut.dir);
  CHECK(again.metrics == full.metrics);
}

TEST_CASE("feature distance fits its threshold and plots drift") {
  fixture::TempDir tmp("harness_fd");
  const auto cfg = small_config(tmp.path(), Method::feature_distance);
  const auto r = run_experiment(cfg, 1, make_blobs2d(cfg.blobs));
  CHECK(r.metrics.count("distance_threshold") == 1);
  CHECK(r.metrics.count("detection_f1") == 1);
  CHECK(fs::exists(RunPaths::at(r.dir).plots / "feature_distance.svg"));
}

TEST_CASE("ood evaluation aggregates over seeds") {
  fixture::TempDir tmp("harness_ood");
  auto cfg = small_config(tmp.path(), Method::msp);
  cfg.seeds = {0};
  cfg.data_root = tmp.path();
  const auto rows = evaluate_ood(cfg, {Method::msp});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].method == "msp");
  CHECK(rows[0].runs == 1);
  CHECK(rows[0].auroc_std == 0.0);
  CHECK(rows[0].auroc_mean >= 0.0);
  CHECK(rows[0].auroc_mean <= 1.0);
  const auto table = format_ood_table(rows);
  CHECK(table.find("msp") != std::string::npos);
  CHECK(table.find("FPR95") != std::string::npos);
}

TEST_CASE("plots and malformed logs") {
  fixture::TempDir tmp("harness_plots");
  fs::create_directories(tmp / "x");
  std::ofstream(tmp / "x" / "empty.jsonl").close();
  CHECK_THROWS_AS(emit_plots({tmp / "x" / "empty.jsonl"}, tmp / "out"), IngestionError);
  std::ofstream(tmp / "x" / "bad.jsonl") << "{\"type\":\"header\"}\nnot json\n";
  CHECK_THROWS_AS(read_runlog(tmp / "x" / "bad.jsonl"), IngestionError);

  auto cfg = small_config(tmp / "runs");
  cfg.max_exposures = 1;
  const auto data = make_blobs2d(cfg.blobs);
  const auto one = run_experiment(cfg, 0, data);
  const auto two = run_experiment(cfg, 1, data);
  const auto single = emit_plots({RunPaths::at(one.dir).runlog}, tmp / "single");
  CHECK_FALSE(single.empty());
  for (const auto& p : single) CHECK(fs::file_size(p) > 0);
  const auto overlaid = emit_plots({RunPaths::at(one.dir).runlog, RunPaths::at(two.dir).runlog}, tmp / "both");
  REQUIRE_FALSE(overlaid.empty());
  const auto svg = slurp(overlaid.front());
  CHECK(svg.find("seed 0") != std::string::npos);
  CHECK(svg.find("seed 1") != std::string::npos);
}

TEST_CASE("metrics files round-trip") {
  fixture::TempDir tmp("harness_metrics");
  const Metrics m{{"a", "1"}, {"b", "0.25"}, {"c", "nan"}};
  write_metrics(tmp / "m.txt", m);
  CHECK(read_metrics(tmp / "m.txt") == m);
  CHECK(metric_value(m, "b") == 0.25);
  CHECK(std::isnan(metric_value(m, "c")));
  CHECK_THROWS(metric_value(m, "d"));
}
