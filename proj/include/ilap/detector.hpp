#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ilap/exemplar_store.hpp"
#include "ilap/learner.hpp"
#include "ilap/stream.hpp"

namespace ilap {

struct DetectorConfig {
  /// Threshold on the largest fractional accuracy drop.
  double theta = 0.6;
  /// Class-imbalance ratio used during detection training.
  double lambda = 0.5;
  /// Labels whose val accuracy falls below this after an update are discarded.
  double discard_floor = 0.2;
  TrainConfig train;
  /// Early stopping during detection training. The detection val set pits the
  /// stored bank of a repeated class against the same class under the new
  /// label, so aggregate val accuracy is flat while the imbalance takes over.
  bool detection_early_stopping = false;

  void validate() const;
};

/// Outcome of thresholding the accuracy drops.
struct Decision {
  bool novel = true;
  /// Index into the delta vector of the matched class (valid when !novel).
  std::size_t index = 0;
};

/// Result of detection training and the resulting decision for one exposure.
struct DetectionOutcome {
  std::vector<Label> labels;  // labels the deltas refer to (active before the exposure)
  std::vector<double> pre_acc;
  std::vector<double> post_acc;
  std::vector<double> deltas;
  bool bypassed = false;  // no active label: detection skipped
  bool novel = true;
  Label label = -1;  // the new label or the matched existing label
};

struct DetectionTraining {
  Learner trained;  // copy of the input learner, widened and trained
  Label new_label = -1;
  std::map<Label, double> pre_acc;   // input learner on P_val
  std::map<Label, double> post_acc;  // trained copy on P_val (old labels only)
  FitReport fit;
};

/// Trains a widened copy of `learner` on imbalanced replay samples plus the
/// exposure under a brand-new label. Neither `learner` nor `store` is modified.
DetectionTraining detection_train(const Learner& learner, const ExemplarStore& store,
                                  const ImageTable& table, const Exposure& exposure,
                                  const DetectorConfig& cfg, std::uint64_t seed);

/// clamp((pre - post) / max(pre, 1e-8), 0, 1), elementwise.
std::vector<double> compute_deltas(std::span<const double> pre_acc, std::span<const double> post_acc);

/// Repeated (lowest-index argmax) iff max delta > theta; novel otherwise and
/// for an empty vector.
Decision decide(std::span<const double> deltas, double theta);

/// Learner, exemplar banks and the label bookkeeping the update path needs.
struct IncrementalState {
  Learner learner;
  ExemplarStore store;
};

struct ExposureResult {
  DetectionOutcome outcome;
  Label assigned = -1;
  DiscardResult discard;
  FitReport detection_fit;  // empty when detection was bypassed
  FitReport final_fit;
};

/// Final model update once the exposure's label is decided, then exemplar
/// commit and weak-class discard. With `repeated` empty the exposure gets a
/// new label: `widened` (already holding that label as its last output) is
/// trained when given, otherwise a fresh copy of the learner is widened.
/// Leaves `outcome` default apart from `novel` and `label`.
ExposureResult apply_update(IncrementalState& state, const ImageTable& table,
                            const Exposure& exposure, std::optional<Label> repeated,
                            const DetectorConfig& cfg, std::uint64_t seed,
                            std::optional<Learner> widened = std::nullopt);

/// Detection training, decision, final model update, exemplar commit and
/// weak-class discard for one exposure.
ExposureResult process_exposure(IncrementalState& state, const ImageTable& table,
                                const Exposure& exposure, const DetectorConfig& cfg,
                                std::uint64_t seed);

/// 1 - max delta; 1 when there was nothing to compare against.
double novelty_score(const DetectionOutcome& outcome);

}  // namespace ilap
