#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "ilap/data.hpp"
#include "ilap/learner.hpp"

namespace ilap {

/// One novelty score per exposure with the ground-truth novelty flag.
/// Novel exposures are the positive class.
struct ScoredStream {
  std::vector<double> scores;
  std::vector<bool> is_novel;

  void add(double score, bool novel) {
    scores.push_back(score);
    is_novel.push_back(novel);
  }
  std::size_t size() const { return scores.size(); }
};

/// False-positive rate at the first operating point, scanning thresholds from
/// high to low (score >= t is flagged novel), whose true-positive rate reaches 0.95.
double fpr_at_95_tpr(const ScoredStream& s);

/// P(score_pos > score_neg) + 0.5 P(tie), via midranks.
double auroc(const ScoredStream& s);

/// Step-wise area under precision-recall (average precision); tied scores
/// form a single operating point.
double aupr(const ScoredStream& s);

/// Learner label -> ground-truth class, plus the inverse.
class LabelMap {
 public:
  void set(Label label, ClassId cls);
  bool contains(Label label) const { return forward_.count(label) > 0; }
  ClassId at(Label label) const;
  const std::map<Label, ClassId>& forward() const { return forward_; }
  /// m^-1(y); empty when the class was never learned.
  std::set<Label> inverse(ClassId cls) const;
  std::size_t size() const { return forward_.size(); }
  bool injective() const;

 private:
  std::map<Label, ClassId> forward_;
};

/// An exposure's final label assignment with the class it actually showed.
struct Assignment {
  Label label;
  ClassId hidden_class;
};

/// Majority class among the exposures assigned to each active label; ties go
/// to the class of the earliest such exposure. Labels that are not active
/// (discarded) are left out.
LabelMap build_label_map(std::span<const Assignment> assignments, std::span<const Label> active);

/// Per test sample: 1/|m^-1(y)| if the prediction lies in m^-1(y), else 0.
/// `predictions[i]` is the learner output for a sample of class `truth[i]`.
double mapped_accuracy(std::span<const Label> predictions, std::span<const ClassId> truth,
                       const LabelMap& map);
double mapped_accuracy(const Learner& learner, const LabelMap& map, const LabeledImageSet& test);

/// Prediction counts per (true class, learner label); enough to recompute
/// mapped accuracy for any map.
using Confusion = std::map<ClassId, std::map<Label, std::size_t>>;
Confusion confusion_counts(std::span<const Label> predictions, std::span<const ClassId> truth);
double mapped_accuracy(const Confusion& confusion, const LabelMap& map);

std::size_t unique_classes_learned(const LabelMap& map);

}  // namespace ilap
