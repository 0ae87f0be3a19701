#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "ilap/learner.hpp"
#include "ilap/random.hpp"

namespace ilap {

/// Per-label sample banks: P_train for replay, P_val for accuracy assessment.
struct Bank {
  std::vector<SampleId> train;
  std::vector<SampleId> val;
};

/// Paired bounded per-label banks. Holds sample ids only; images are
/// resolved through the training image table.
class ExemplarStore {
 public:
  ExemplarStore(std::size_t cap_train, std::size_t cap_val);

  std::size_t cap_train() const { return cap_train_; }
  std::size_t cap_val() const { return cap_val_; }

  bool empty() const { return banks_.empty(); }
  bool contains(Label label) const { return banks_.count(label) > 0; }
  std::vector<Label> labels() const;
  const Bank& bank(Label label) const;
  const std::map<Label, Bank>& banks() const { return banks_; }

  /// Replaces the banks of a label; enforces caps and train/val disjointness.
  void set_bank(Label label, Bank bank);
  /// Removes a label; returns the number of samples dropped.
  std::size_t erase(Label label);

  LabeledSamples train_samples() const;
  LabeledSamples val_samples() const;
  std::map<Label, std::vector<SampleId>> val_banks() const;

 private:
  std::size_t cap_train_;
  std::size_t cap_val_;
  std::map<Label, Bank> banks_;
};

/// Positions (into the rows of `features`) of the `m` rows closest in
/// Euclidean distance to the mean row. Ties keep input order. Returns all
/// rows, with a warning, when m exceeds the row count.
std::vector<std::size_t> select_representatives(const Tensor& features, std::size_t m);

/// Same ranking over images, using the learner's penultimate features.
std::vector<SampleId> select_representatives(const ImageTable& table,
                                             std::span<const SampleId> ids,
                                             const Learner& learner, std::size_t m);

/// Saves an exposure's samples under `label`. For a label that already has
/// banks, the old bank and the new samples compete jointly for the cap.
void commit_exposure(ExemplarStore& store, Label label, std::span<const SampleId> e_train,
                     std::span<const SampleId> e_val, const Learner& learner,
                     const ImageTable& table);

/// Per-class sample size implied by the class-imbalance ratio:
/// round-half-up((1 - lambda) * e_train_size).
std::size_t imbalanced_count(double lambda, std::size_t e_train_size);

/// Draws min(imbalanced_count, |P_train^label|) samples from each train bank,
/// uniformly without replacement.
LabeledSamples sample_imbalanced(const ExemplarStore& store, double lambda,
                                 std::size_t e_train_size, RandomEngine& rng);

struct DiscardResult {
  std::vector<Label> removed;
  std::size_t removed_samples = 0;
  std::map<Label, double> accuracies;  // assessed before removal
};

/// Drops every label whose val-bank accuracy is below `floor` from the store
/// and masks it out of the learner.
DiscardResult discard_weak_classes(ExemplarStore& store, Learner& learner,
                                   const ImageTable& table, double floor);

}  // namespace ilap
