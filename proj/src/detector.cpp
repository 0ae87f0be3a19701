#include "ilap/detector.hpp"

#include <algorithm>
#include <cmath>

#include "ilap/errors.hpp"
#include "ilap/random.hpp"

namespace ilap {

namespace {

enum SeedTag : std::uint64_t { kImbalance = 1, kDetectionFit = 2, kFinalFit = 3 };

}  // namespace

void DetectorConfig::validate() const {
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw ConfigError("theta must be finite and >= 0");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in [0, 1)");
  if (discard_floor < 0.0 || discard_floor > 1.0) throw ConfigError("discard_floor must lie in [0, 1]");
}

DetectionTraining detection_train(const Learner& learner, const ExemplarStore& store,
                                  const ImageTable& table, const Exposure& exposure,
                                  const DetectorConfig& cfg, std::uint64_t seed) {
  if (learner.num_active() == 0) {
    throw InvariantError("detection training needs at least one learned label");
  }
  if (store.empty()) {
    throw InvariantError("exemplar store is empty although the learner has labels");
  }
  DetectionTraining out{learner.clone(), -1, {}, {}, {}};
  const auto val_banks = store.val_banks();
  out.pre_acc = per_class_accuracy(learner, table, val_banks);

  out.new_label = out.trained.add_label();
  RandomEngine rng(derive_seed(seed, {kImbalance}));
  LabeledSamples train = sample_imbalanced(store, cfg.lambda, exposure.e_train.size(), rng);
  train.add_all(exposure.e_train, out.new_label);
  LabeledSamples val = store.val_samples();
  val.add_all(exposure.e_val, out.new_label);

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, {kDetectionFit});
  tc.early_stopping = cfg.detection_early_stopping;
  out.fit = out.trained.fit(table, train, val, tc);
  out.post_acc = per_class_accuracy(out.trained, table, val_banks);
  return out;
}

std::vector<double> compute_deltas(std::span<const double> pre_acc,
                                   std::span<const double> post_acc) {
  if (pre_acc.size() != post_acc.size()) {
    throw InvariantError("accuracy vectors differ in length");
  }
  constexpr double kEps = 1e-8;
  std::vector<double> d(pre_acc.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = std::clamp((pre_acc[i] - post_acc[i]) / std::max(pre_acc[i], kEps), 0.0, 1.0);
  }
  return d;
}

Decision decide(std::span<const double> deltas, double theta) {
  if (deltas.empty()) return {};
  const auto it = std::max_element(deltas.begin(), deltas.end());  // first maximum
  if (*it > theta) return {false, static_cast<std::size_t>(it - deltas.begin())};
  return {};
}

double novelty_score(const DetectionOutcome& outcome) {
  if (outcome.deltas.empty()) return 1.0;
  return 1.0 - *std::max_element(outcome.deltas.begin(), outcome.deltas.end());
}

ExposureResult apply_update(IncrementalState& state, const ImageTable& table,
                            const Exposure& exposure, std::optional<Label> repeated,
                            const DetectorConfig& cfg, std::uint64_t seed,
                            std::optional<Learner> widened) {
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, {kFinalFit});
  ExposureResult r;
  LabeledSamples train = state.store.train_samples();
  LabeledSamples val = state.store.val_samples();

  Learner next = widened ? std::move(*widened) : state.learner.clone();
  if (repeated) {
    if (!next.is_active(*repeated)) {
      throw InvariantError("update with inactive label " + std::to_string(*repeated));
    }
    r.assigned = *repeated;
    train.add_all(exposure.e_train, r.assigned);
  } else {
    r.assigned = widened ? next.num_labels() - 1 : next.add_label();
    train.add_all(exposure.e_train, r.assigned);
    val.add_all(exposure.e_val, r.assigned);
  }
  r.outcome.novel = !repeated.has_value();
  r.outcome.label = r.assigned;
  r.final_fit = next.fit(table, train, val, tc);

  ExemplarStore store = state.store;
  commit_exposure(store, r.assigned, exposure.e_train, exposure.e_val, next, table);
  r.discard = discard_weak_classes(store, next, table, cfg.discard_floor);
  state.learner = std::move(next);
  state.store = std::move(store);
  return r;
}

ExposureResult process_exposure(IncrementalState& state, const ImageTable& table,
                                const Exposure& exposure, const DetectorConfig& cfg,
                                std::uint64_t seed) {
  cfg.validate();
  if (state.learner.num_active() == 0) {
    ExposureResult r = apply_update(state, table, exposure, std::nullopt, cfg, seed);
    r.outcome.bypassed = true;
    return r;
  }

  auto det = detection_train(state.learner, state.store, table, exposure, cfg, seed);
  DetectionOutcome outcome;
  for (const auto& [label, acc] : det.pre_acc) {
    outcome.labels.push_back(label);
    outcome.pre_acc.push_back(acc);
    outcome.post_acc.push_back(det.post_acc.at(label));
  }
  outcome.deltas = compute_deltas(outcome.pre_acc, outcome.post_acc);
  const Decision d = decide(outcome.deltas, cfg.theta);

  // A novel exposure keeps the detection copy, which already knows the new
  // label; the balanced final pass removes the imbalance it was trained with.
  ExposureResult r =
      d.novel ? apply_update(state, table, exposure, std::nullopt, cfg, seed, std::move(det.trained))
              : apply_update(state, table, exposure, outcome.labels[d.index], cfg, seed);
  outcome.novel = r.outcome.novel;
  outcome.label = r.outcome.label;
  r.outcome = std::move(outcome);
  r.detection_fit = det.fit;
  return r;
}

}  // namespace ilap
