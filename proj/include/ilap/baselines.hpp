#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ilap/detector.hpp"
#include "ilap/learner.hpp"

namespace ilap {

enum class ScorerKind { msp, odin, feature_distance };

ScorerKind parse_scorer_kind(const std::string& s);
std::string to_string(ScorerKind k);

struct ScorerConfig {
  ScorerKind kind = ScorerKind::msp;
  double temperature = 2.0;
  double epsilon = 0.0012;
  /// Fitted post hoc for feature_distance; unset until then.
  std::optional<double> threshold;

  void validate() const;
};

/// 1 - mean over the exposure's images of the max softmax probability
/// (over active labels).
double msp_score(const Learner& learner, const ImageTable& table, std::span<const SampleId> ids);

/// MSP after temperature scaling and an input step of size `epsilon` along the
/// sign of the gradient of the scaled max log-probability.
double odin_score(const Learner& learner, const ImageTable& table, std::span<const SampleId> ids,
                  double temperature, double epsilon);

/// Running per-label mean of penultimate features.
class FeatureMeans {
 public:
  struct Entry {
    std::vector<double> mean;
    std::size_t count = 0;
  };

  bool empty() const { return means_.empty(); }
  bool contains(Label label) const { return means_.count(label) > 0; }
  const std::vector<double>& mean(Label label) const;
  const std::map<Label, Entry>& entries() const { return means_; }
  void set(Label label, Entry e) { means_[label] = std::move(e); }
  void erase(Label label) { means_.erase(label); }

 private:
  std::map<Label, Entry> means_;
};

/// Folds the features of `ids` into the running mean of `label`.
void feature_mean_update(FeatureMeans& means, const Learner& learner, const ImageTable& table,
                         std::span<const SampleId> ids, Label label);

struct DistanceScore {
  double score = 0.0;  // Euclidean distance to the nearest class mean
  Label nearest = -1;  // lowest label among equally near means
};

/// Distance from the exposure's mean feature to the nearest stored class mean.
DistanceScore feature_distance_score(const Learner& learner, const ImageTable& table,
                                     std::span<const SampleId> ids, const FeatureMeans& means);

/// Threshold maximizing F1 with novel (score > t) as the positive class.
/// Candidates are the midpoints between consecutive distinct scores plus one
/// value below every score; ties go to the lowest candidate.
double fit_distance_threshold(std::span<const double> in_scores, std::span<const double> out_scores);

/// F1 of `score > t` against novelty flags (novel = positive).
double novelty_f1(std::span<const double> in_scores, std::span<const double> out_scores, double t);

/// Update with the ground-truth label revealed: `known` is the learner label
/// already holding this class, or empty for a class seen for the first time.
ExposureResult supervised_oracle_step(IncrementalState& state, const ImageTable& table,
                                      const Exposure& exposure, std::optional<Label> known,
                                      const DetectorConfig& cfg, std::uint64_t seed);

}  // namespace ilap
