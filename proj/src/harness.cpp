#include "ilap/harness.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "ilap/baselines.hpp"
#include "ilap/errors.hpp"
#include "ilap/metrics.hpp"
#include "ilap/plots.hpp"
#include "ilap/random.hpp"
#include "ilap/stream.hpp"

namespace ilap {

namespace fs = std::filesystem;
using nlohmann::json;

RunPaths RunPaths::at(const fs::path& dir) {
  return {dir, dir / "config.ini", dir / "runlog.jsonl", dir / "metrics.txt", dir / "checkpoint",
          dir / "plots"};
}

fs::path run_dir(const RunConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir / to_string(cfg.method) / ("seed_" + std::to_string(seed));
}

void write_metrics(const fs::path& path, const Metrics& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [k, v] : m) out << k << " = " << v << '\n';
}

Metrics read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read " + path.string());
  Metrics m;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    m[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return m;
}

double metric_value(const Metrics& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw InvariantError("metric '" + key + "' missing");
  return std::stod(it->second);
}

namespace {

enum SeedTag : std::uint64_t { kLearnerSeed = 21, kExposureSeed = 22 };

/// How labels are decided inside the loop.
enum class Mode {
  ilap,        // detection training
  supervised,  // revealed labels; optionally scores exposures first
  distance,    // feature-distance threshold decides
};

std::string fmt_num(double v) { return std::isfinite(v) ? fmt::format("{}", v) : "nan"; }

json store_to_json(const ExemplarStore& s) {
  json banks = json::array();
  for (const auto& [label, bank] : s.banks()) {
    banks.push_back({{"label", label}, {"train", bank.train}, {"val", bank.val}});
  }
  return {{"cap_train", s.cap_train()}, {"cap_val", s.cap_val()}, {"banks", banks}};
}

ExemplarStore store_from_json(const json& j) {
  ExemplarStore s(j.at("cap_train").get<std::size_t>(), j.at("cap_val").get<std::size_t>());
  for (const auto& b : j.at("banks")) {
    s.set_bank(b.at("label").get<Label>(),
               Bank{b.at("train").get<std::vector<SampleId>>(), b.at("val").get<std::vector<SampleId>>()});
  }
  return s;
}

json means_to_json(const FeatureMeans& m) {
  json out = json::array();
  for (const auto& [label, e] : m.entries()) {
    out.push_back({{"label", label}, {"count", e.count}, {"mean", e.mean}});
  }
  return out;
}

FeatureMeans means_from_json(const json& j) {
  FeatureMeans m;
  for (const auto& e : j) {
    m.set(e.at("label").get<Label>(),
          {e.at("mean").get<std::vector<double>>(), e.at("count").get<std::size_t>()});
  }
  return m;
}

json confusion_to_json(const Confusion& c) {
  json out = json::array();
  for (const auto& [cls, row] : c) {
    for (const auto& [label, n] : row) out.push_back({cls, label, n});
  }
  return out;
}

Confusion confusion_from_json(const json& j) {
  Confusion c;
  for (const auto& e : j) c[e.at(0).get<ClassId>()][e.at(1).get<Label>()] = e.at(2).get<std::size_t>();
  return c;
}

json map_to_json(const LabelMap& m) {
  json out = json::object();
  for (const auto& [label, cls] : m.forward()) out[std::to_string(label)] = cls;
  return out;
}

struct DetectionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  void add(bool predicted_novel, bool novel) {
    if (predicted_novel) (novel ? tp : fp)++;
    else (novel ? fn : tn)++;
  }
  double f1() const { return tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn); }
  double precision() const { return tp + fp == 0 ? 0.0 : tp / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : tp / static_cast<double>(tp + fn); }
};

/// Metrics shared by the live run and log replay.
struct Tally {
  std::vector<Assignment> assignments;
  ScoredStream scored;
  DetectionCounts detection;
  bool has_decisions = false;
};

Metrics finish_metrics(const json& header, const Tally& t, std::span<const Label> active,
                       const Confusion& confusion, std::size_t exposures, std::size_t stream_classes) {
  Metrics m;
  m["method"] = header.at("method").get<std::string>();
  m["dataset"] = header.at("dataset").get<std::string>();
  m["arch"] = header.at("arch").get<std::string>();
  m["seed"] = std::to_string(header.at("seed").get<std::uint64_t>());
  m["exposures"] = std::to_string(exposures);
  const LabelMap map = build_label_map(t.assignments, active);
  m["classes_detected"] = std::to_string(active.size());
  m["unique_classes"] = std::to_string(unique_classes_learned(map));
  m["label_map_bijective"] =
      (map.injective() && map.size() == active.size() && unique_classes_learned(map) == stream_classes)
          ? "true"
          : "false";
  m["mapped_accuracy"] = fmt_num(mapped_accuracy(confusion, map));

  std::size_t pos = 0;
  for (bool n : t.scored.is_novel) pos += n;
  const bool ood = pos > 0 && pos < t.scored.size();
  m["fpr95"] = ood ? fmt_num(fpr_at_95_tpr(t.scored)) : "nan";
  m["auroc"] = ood ? fmt_num(auroc(t.scored)) : "nan";
  m["aupr"] = ood ? fmt_num(aupr(t.scored)) : "nan";
  m["scored_exposures"] = std::to_string(t.scored.size());
  if (t.has_decisions) {
    m["detection_f1"] = fmt_num(t.detection.f1());
    m["detection_precision"] = fmt_num(t.detection.precision());
    m["detection_recall"] = fmt_num(t.detection.recall());
  }
  if (header.contains("distance_threshold")) {
    m["distance_threshold"] = fmt_num(header.at("distance_threshold").get<double>());
  }
  return m;
}

class Runner {
 public:
  Runner(const RunConfig& cfg, std::uint64_t seed, const Dataset& data, Mode mode, fs::path dir,
         std::optional<double> threshold)
      : cfg_(cfg),
        seed_(seed),
        data_(data),
        mode_(mode),
        paths_(RunPaths::at(std::move(dir))),
        threshold_(threshold),
        detector_(cfg.detector()) {
    StreamConfig sc = cfg.stream;
    sc.seed = seed;
    if (sc.class_ids.empty()) {
      sc.class_ids.resize(static_cast<std::size_t>(data.num_classes()));
      std::iota(sc.class_ids.begin(), sc.class_ids.end(), ClassId{0});
    }
    auto schedule = generate_schedule(sc);
    if (cfg.max_exposures > 0 && schedule.size() > cfg.max_exposures) schedule.resize(cfg.max_exposures);
    sampler_.emplace(data.train, std::move(schedule), sc);
    stream_classes_ = std::set<ClassId>(sampler_->schedule().begin(), sampler_->schedule().end()).size();
    cap_train_ = cfg.cap_train ? cfg.cap_train : static_cast<std::size_t>(sc.train_count());
    cap_val_ = cfg.cap_val ? cfg.cap_val : static_cast<std::size_t>(sc.val_count());
  }

  RunOutcome run(bool resume) {
    fs::create_directories(paths_.dir);
    if (resume && load_checkpoint()) {
      spdlog::info("resuming {} at exposure {}/{}", paths_.dir.string(), next_, sampler_->size());
    } else {
      start_fresh();
    }
    std::ofstream log(paths_.runlog, std::ios::app | std::ios::binary);
    if (!log) throw Error("cannot open " + paths_.runlog.string());
    while (next_ < sampler_->size()) {
      json event = step(next_);
      log << event.dump() << '\n';
      log.flush();
      ++next_;
      if (cfg_.checkpoint) save_checkpoint();
    }
    const auto metrics = finish(log);
    return {paths_.dir, metrics};
  }

 private:
  void start_fresh() {
    LearnerOptions lo = cfg_.learner;
    lo.input = data_.train.images.shape();
    lo.num_initial_labels = 0;
    lo.seed = derive_seed(seed_, {kLearnerSeed});
    state_.emplace(IncrementalState{Learner::build(lo), ExemplarStore(cap_train_, cap_val_)});
    {
      std::ofstream cfg_out(paths_.config);
      write_run_config(cfg_out, cfg_);
    }
    std::ofstream log(paths_.runlog, std::ios::trunc | std::ios::binary);
    log << header().dump() << '\n';
    next_ = 0;
  }

  json header() const {
    json h{{"type", "header"},
           {"method", to_string(cfg_.method)},
           {"mode", mode_ == Mode::ilap ? "ilap" : mode_ == Mode::distance ? "distance" : "supervised"},
           {"dataset", cfg_.dataset},
           {"arch", to_string(cfg_.learner.arch)},
           {"seed", seed_},
           {"schedule", sampler_->schedule()},
           {"stream_classes", stream_classes_},
           {"lambda", detector_.lambda},
           {"theta", detector_.theta}};
    if (threshold_) h["distance_threshold"] = *threshold_;
    return h;
  }

  bool scores_with_msp() const { return cfg_.method == Method::msp; }
  bool scores_with_odin() const { return cfg_.method == Method::odin; }
  bool scores_with_distance() const { return mode_ == Mode::distance || cfg_.method == Method::feature_distance; }

  json step(std::size_t i) {
    const ScheduledExposure se = sampler_->materialize(i);
    const Exposure& ex = se.exposure;
    const bool is_novel = !seen_.count(se.hidden_class);
    const auto eseed = derive_seed(seed_, {kExposureSeed, i});
    auto& st = *state_;
    const auto ids = ex.all_ids();

    json ev{{"type", "exposure"}, {"index", i}, {"hidden_class", se.hidden_class}, {"is_novel", is_novel}};
    std::optional<double> score;
    std::optional<DistanceScore> dist;
    if (st.learner.num_active() > 0) {
      if (scores_with_msp()) score = msp_score(st.learner, data_.train.images, ids);
      if (scores_with_odin()) {
        score = odin_score(st.learner, data_.train.images, ids, cfg_.odin.temperature, cfg_.odin.epsilon);
      }
    }
    if (scores_with_distance() && !means_.empty()) {
      dist = feature_distance_score(st.learner, data_.train.images, ids, means_);
      score = dist->score;
      ev["nearest"] = dist->nearest;
    }

    ExposureResult r;
    std::string decision;
    switch (mode_) {
      case Mode::ilap: {
        r = process_exposure(st, data_.train.images, ex, detector_, eseed);
        decision = r.outcome.bypassed ? "first" : r.outcome.novel ? "novel" : "repeated";
        if (!r.outcome.bypassed) score = novelty_score(r.outcome);
        ev["labels"] = r.outcome.labels;
        ev["pre_acc"] = r.outcome.pre_acc;
        ev["post_acc"] = r.outcome.post_acc;
        ev["deltas"] = r.outcome.deltas;
        ev["detection_epochs"] = r.detection_fit.epochs_run;
        break;
      }
      case Mode::distance: {
        const bool novel = !dist || dist->score > *threshold_;
        decision = !dist ? "first" : novel ? "novel" : "repeated";
        r = apply_update(st, data_.train.images, ex,
                         novel ? std::nullopt : std::optional<Label>(dist->nearest), detector_, eseed);
        break;
      }
      case Mode::supervised: {
        std::optional<Label> known;
        if (auto it = class_to_label_.find(se.hidden_class); it != class_to_label_.end()) known = it->second;
        r = supervised_oracle_step(st, data_.train.images, ex, known, detector_, eseed);
        class_to_label_[se.hidden_class] = r.assigned;
        decision = "supervised";
        break;
      }
    }
    seen_.insert(se.hidden_class);

    for (Label gone : r.discard.removed) means_.erase(gone);
    for (auto it = class_to_label_.begin(); it != class_to_label_.end();) {
      it = st.learner.is_active(it->second) ? std::next(it) : class_to_label_.erase(it);
    }
    if (scores_with_distance() && st.learner.is_active(r.assigned)) {
      feature_mean_update(means_, st.learner, data_.train.images, ids, r.assigned);
    }

    tally_.assignments.push_back({r.assigned, se.hidden_class});
    if (score) tally_.scored.add(*score, is_novel);
    if (decision == "novel" || decision == "repeated") {
      tally_.has_decisions = true;
      tally_.detection.add(decision == "novel", is_novel);
    }

    ev["decision"] = decision;
    ev["assigned"] = r.assigned;
    ev["score"] = score ? json(*score) : json(nullptr);
    ev["discarded"] = r.discard.removed;
    ev["discarded_samples"] = r.discard.removed_samples;
    ev["final_epochs"] = r.final_fit.epochs_run;
    const auto active = st.learner.active_labels();
    ev["active_labels"] = active;
    ev["num_active"] = active.size();

    const bool last = i + 1 == sampler_->size();
    if (last || (i + 1) % static_cast<std::size_t>(cfg_.eval_every) == 0) {
      const Confusion c = test_confusion();
      const LabelMap map = build_label_map(tally_.assignments, active);
      ev["eval"] = {{"mapped_accuracy", mapped_accuracy(c, map)},
                    {"unique_classes", unique_classes_learned(map)},
                    {"confusion", confusion_to_json(c)}};
      last_confusion_ = c;
    }
    spdlog::info("exposure {}/{}: {} -> label {} ({} active){}", i + 1, sampler_->size(), decision,
                 r.assigned, active.size(),
                 ev.contains("eval") ? fmt::format(", mapped acc {:.3f}",
                                                   ev["eval"]["mapped_accuracy"].get<double>())
                                     : "");
    return ev;
  }

  Confusion test_confusion() const {
    std::vector<SampleId> ids(data_.test.size());
    std::iota(ids.begin(), ids.end(), SampleId{0});
    const auto pred = state_->learner.predict(data_.test.images, ids);
    return confusion_counts(pred, data_.test.labels);
  }

  Metrics finish(std::ofstream& log) {
    const auto active = state_->learner.active_labels();
    const Metrics m =
        finish_metrics(header(), tally_, active, last_confusion_, sampler_->size(), stream_classes_);
    json fin{{"type", "final"},
             {"metrics", m},
             {"label_map", map_to_json(build_label_map(tally_.assignments, active))},
             {"active_labels", active},
             {"confusion", confusion_to_json(last_confusion_)}};
    log << fin.dump() << '\n';
    log.flush();
    write_metrics(paths_.metrics, m);
    return m;
  }

  void save_checkpoint() const {
    const fs::path tmp = paths_.checkpoint.string() + ".tmp";
    const fs::path old = paths_.checkpoint.string() + ".old";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    state_->learner.save(tmp / "learner.bin");
    json s{{"next", next_},
           {"runlog_bytes", fs::file_size(paths_.runlog)},
           {"store", store_to_json(state_->store)},
           {"means", means_to_json(means_)},
           {"seen", seen_},
           {"assignments", json::array()},
           {"scores", tally_.scored.scores},
           {"is_novel", tally_.scored.is_novel},
           {"detection", {tally_.detection.tp, tally_.detection.fp, tally_.detection.fn, tally_.detection.tn}},
           {"has_decisions", tally_.has_decisions},
           {"confusion", confusion_to_json(last_confusion_)}};
    for (const auto& a : tally_.assignments) s["assignments"].push_back({a.label, a.hidden_class});
    json c2l = json::array();
    for (const auto& [cls, label] : class_to_label_) c2l.push_back({cls, label});
    s["class_to_label"] = c2l;
    std::ofstream(tmp / "state.json") << s.dump();
    fs::remove_all(old);
    if (fs::exists(paths_.checkpoint)) fs::rename(paths_.checkpoint, old);
    fs::rename(tmp, paths_.checkpoint);
    fs::remove_all(old);
  }

  bool load_checkpoint() {
    fs::path dir = paths_.checkpoint;
    if (!fs::exists(dir / "state.json")) dir = paths_.checkpoint.string() + ".old";
    if (!fs::exists(dir / "state.json")) return false;
    std::ifstream in(dir / "state.json");
    const json s = json::parse(in);
    state_.emplace(IncrementalState{Learner::load(dir / "learner.bin"), store_from_json(s.at("store"))});
    next_ = s.at("next").get<std::size_t>();
    means_ = means_from_json(s.at("means"));
    seen_ = s.at("seen").get<std::set<ClassId>>();
    tally_ = {};
    for (const auto& a : s.at("assignments")) tally_.assignments.push_back({a.at(0), a.at(1)});
    tally_.scored.scores = s.at("scores").get<std::vector<double>>();
    tally_.scored.is_novel = s.at("is_novel").get<std::vector<bool>>();
    const auto d = s.at("detection");
    tally_.detection = {d.at(0), d.at(1), d.at(2), d.at(3)};
    tally_.has_decisions = s.at("has_decisions").get<bool>();
    last_confusion_ = confusion_from_json(s.at("confusion"));
    class_to_label_.clear();
    for (const auto& e : s.at("class_to_label")) class_to_label_[e.at(0).get<ClassId>()] = e.at(1).get<Label>();
    // Drop log records written after the checkpoint (a crash mid-exposure).
    fs::resize_file(paths_.runlog, s.at("runlog_bytes").get<std::uintmax_t>());
    return true;
  }

  const RunConfig& cfg_;
  std::uint64_t seed_;
  const Dataset& data_;
  Mode mode_;
  RunPaths paths_;
  std::optional<double> threshold_;
  DetectorConfig detector_;
  std::optional<ExposureSampler> sampler_;
  std::size_t stream_classes_ = 0;
  std::size_t cap_train_ = 0, cap_val_ = 0;

  std::optional<IncrementalState> state_;
  std::size_t next_ = 0;
  FeatureMeans means_;
  std::set<ClassId> seen_;
  std::map<ClassId, Label> class_to_label_;
  Tally tally_;
  Confusion last_confusion_;
};

bool finished(const RunPaths& p) { return fs::exists(p.metrics); }

/// Fits the distance threshold on the scores of a supervised pass over the
/// same stream.
double fit_threshold_pass(const RunConfig& cfg, std::uint64_t seed, const Dataset& data,
                          const fs::path& dir, bool resume) {
  const auto fit_dir = dir / "threshold_fit";
  const auto paths = RunPaths::at(fit_dir);
  if (!finished(paths)) Runner(cfg, seed, data, Mode::supervised, fit_dir, std::nullopt).run(resume);
  const auto log = read_runlog(paths.runlog);
  std::vector<double> in, out;
  for (const auto& e : log.exposures) {
    if (e.at("score").is_null()) continue;
    (e.at("is_novel").get<bool>() ? out : in).push_back(e.at("score").get<double>());
  }
  const double t = fit_distance_threshold(in, out);
  spdlog::info("feature-distance threshold {:.6g} from {} repeated / {} novel exposures", t, in.size(),
               out.size());
  return t;
}

RunOutcome run_or_resume(const RunConfig& cfg, std::uint64_t seed, const Dataset& data, const fs::path& dir,
                         bool resume) {
  cfg.validate();
  RunOutcome out;
  switch (cfg.method) {
    case Method::ilap_ci:
    case Method::ilap_noci:
      out = Runner(cfg, seed, data, Mode::ilap, dir, std::nullopt).run(resume);
      break;
    case Method::msp:
    case Method::odin:
    case Method::supervised:
      out = Runner(cfg, seed, data, Mode::supervised, dir, std::nullopt).run(resume);
      break;
    case Method::feature_distance: {
      const double t = cfg.distance_threshold ? *cfg.distance_threshold
                                              : fit_threshold_pass(cfg, seed, data, dir, resume);
      out = Runner(cfg, seed, data, Mode::distance, dir, t).run(resume);
      break;
    }
  }
  try {
    emit_plots({RunPaths::at(dir).runlog}, RunPaths::at(dir).plots);
  } catch (const Error& e) {
    spdlog::warn("plots skipped: {}", e.what());
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed, const Dataset& data) {
  return run_or_resume(cfg, seed, data, run_dir(cfg, seed), false);
}

RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed) {
  const Dataset data = load_dataset(cfg.dataset_options());
  return run_experiment(cfg, seed, data);
}

RunOutcome resume_experiment(const fs::path& dir) {
  const auto paths = RunPaths::at(dir);
  const RunConfig cfg = load_run_config(paths.config);
  const auto log = read_runlog(paths.runlog);
  const auto seed = log.header.at("seed").get<std::uint64_t>();
  if (!log.final_record.is_null()) {
    spdlog::info("{} already finished", dir.string());
    return {dir, read_metrics(paths.metrics)};
  }
  const Dataset data = load_dataset(cfg.dataset_options());
  return run_or_resume(cfg, seed, data, dir, true);
}

RunLogData read_runlog(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read run log " + path.string());
  RunLogData d;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IngestionError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
    const auto type = j.value("type", "");
    if (type == "header") d.header = std::move(j);
    else if (type == "exposure") d.exposures.push_back(std::move(j));
    else if (type == "final") d.final_record = std::move(j);
    else throw IngestionError(fmt::format("{}:{}: unknown record type '{}'", path.string(), n, type));
  }
  if (d.header.is_null()) throw IngestionError("run log " + path.string() + " has no header");
  return d;
}

Metrics replay_runlog(const fs::path& path) {
  const auto log = read_runlog(path);
  if (log.exposures.empty()) throw InvariantError("run log has no exposures");
  Tally t;
  Confusion confusion;
  for (const auto& e : log.exposures) {
    t.assignments.push_back({e.at("assigned").get<Label>(), e.at("hidden_class").get<ClassId>()});
    const bool novel = e.at("is_novel").get<bool>();
    if (!e.at("score").is_null()) t.scored.add(e.at("score").get<double>(), novel);
    const auto decision = e.at("decision").get<std::string>();
    if (decision == "novel" || decision == "repeated") {
      t.has_decisions = true;
      t.detection.add(decision == "novel", novel);
    }
    if (e.contains("eval")) confusion = confusion_from_json(e.at("eval").at("confusion"));
  }
  const auto active = log.exposures.back().at("active_labels").get<std::vector<Label>>();
  return finish_metrics(log.header, t, active, confusion, log.exposures.size(),
                        log.header.at("stream_classes").get<std::size_t>());
}

std::vector<OodRow> evaluate_ood(const RunConfig& cfg, const std::vector<Method>& methods,
                                 bool reuse_existing) {
  if (methods.empty()) throw ConfigError("no methods to evaluate");
  if (cfg.seeds.size() < 2) spdlog::warn("one seed only: standard deviations are reported as 0");
  std::optional<Dataset> data;
  std::vector<OodRow> rows;
  for (Method m : methods) {
    RunConfig c = cfg;
    c.method = m;
    std::vector<double> fpr, roc, pr;
    for (auto seed : c.seeds) {
      const auto paths = RunPaths::at(run_dir(c, seed));
      Metrics metrics;
      if (reuse_existing && fs::exists(paths.metrics)) {
        metrics = read_metrics(paths.metrics);
      } else {
        if (!data) data = load_dataset(c.dataset_options());
        metrics = run_experiment(c, seed, *data).metrics;
      }
      fpr.push_back(metric_value(metrics, "fpr95"));
      roc.push_back(metric_value(metrics, "auroc"));
      pr.push_back(metric_value(metrics, "aupr"));
    }
    rows.push_back({to_string(m), c.seeds.size(), mean_of(fpr), std_of(fpr), mean_of(roc), std_of(roc),
                    mean_of(pr), std_of(pr)});
  }
  return rows;
}

std::string format_ood_table(const std::vector<OodRow>& rows) {
  std::string out = fmt::format("{:<18} {:>5} {:>15} {:>15} {:>15}\n", "method", "runs", "FPR95", "AUROC", "AUPR");
  for (const auto& r : rows) {
    out += fmt::format("{:<18} {:>5} {:>15} {:>15} {:>15}\n", r.method, r.runs,
                       fmt::format("{:.3f}±{:.3f}", r.fpr95_mean, r.fpr95_std),
                       fmt::format("{:.3f}±{:.3f}", r.auroc_mean, r.auroc_std),
                       fmt::format("{:.3f}±{:.3f}", r.aupr_mean, r.aupr_std));
  }
  return out;
}

std::vector<fs::path> emit_plots(const std::vector<fs::path>& runlogs, const fs::path& out_dir) {
  if (runlogs.empty()) throw InvariantError("no run logs to plot");
  Chart acc{"Mapped accuracy", "exposures", "accuracy", {}, {}, std::pair{0.0, 1.0}};
  Chart classes{"Classes detected", "exposures", "classes", {}, {}, std::nullopt};
  std::vector<fs::path> written;
  std::vector<std::pair<std::string, RunLogData>> distance_runs;
  for (const auto& path : runlogs) {
    auto log = read_runlog(path);
    if (log.exposures.empty()) throw InvariantError("run log " + path.string() + " has no exposures");
    const std::string name = fmt::format("{} seed {}", log.header.at("method").get<std::string>(),
                                         log.header.at("seed").get<std::uint64_t>());
    Series a{name, {}, {}, false}, k{name, {}, {}, false};
    for (const auto& e : log.exposures) {
      const double x = e.at("index").get<double>() + 1;
      k.x.push_back(x);
      k.y.push_back(e.at("num_active").get<double>());
      if (e.contains("eval")) {
        a.x.push_back(x);
        a.y.push_back(e.at("eval").at("mapped_accuracy").get<double>());
      }
    }
    if (!a.x.empty()) acc.series.push_back(std::move(a));
    classes.series.push_back(std::move(k));
    if (log.header.contains("distance_threshold")) distance_runs.emplace_back(name, std::move(log));
  }
  classes.hlines.push_back(
      {"classes in stream", read_runlog(runlogs.front()).header.at("stream_classes").get<double>()});
  std::vector<Chart> panels;
  if (!acc.series.empty()) panels.push_back(std::move(acc));
  panels.push_back(std::move(classes));
  write_svg(out_dir / "accuracy_classes.svg", panels);
  written.push_back(out_dir / "accuracy_classes.svg");

  for (const auto& [name, log] : distance_runs) {
    Chart drift{"Feature distance to nearest class mean", "exposures", "distance", {}, {}, std::nullopt};
    Series rep{"repeated class", {}, {}, true}, nov{"novel class", {}, {}, true};
    for (const auto& e : log.exposures) {
      if (e.at("score").is_null()) continue;
      auto& s = e.at("is_novel").get<bool>() ? nov : rep;
      s.x.push_back(e.at("index").get<double>() + 1);
      s.y.push_back(e.at("score").get<double>());
    }
    if (rep.x.empty() && nov.x.empty()) continue;
    drift.series = {rep, nov};
    drift.hlines.push_back({"threshold", log.header.at("distance_threshold").get<double>()});
    const auto file = out_dir / "feature_distance.svg";
    write_svg(file, {drift});
    written.push_back(file);
  }
  return written;
}

void emit_sweep_plot(const SweepResult& sweep, const fs::path& path) {
  const auto c = select_lambda_theta(sweep);
  Chart chart{"Accuracy drop vs class imbalance", "lambda", "mean accuracy drop", {}, {}, std::pair{0.0, 1.0}};
  chart.series.push_back({"repeated class", sweep.lambda_grid, sweep.drop_repeated, false});
  chart.series.push_back({"novel exposure (max over classes)", sweep.lambda_grid, sweep.drop_nonrepeated, false});
  if (sweep.drop_bystander.size() == sweep.lambda_grid.size()) {
    chart.series.push_back({"other classes, repeated exposure", sweep.lambda_grid, sweep.drop_bystander, false});
  }
  chart.hlines.push_back({fmt::format("theta* = {:.3f} at lambda* = {:g}", c.theta, c.lambda), c.theta});
  write_svg(path, {chart});
}

}  // namespace ilap
