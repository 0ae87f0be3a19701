#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "ilap/data.hpp"
#include "ilap/detector.hpp"
#include "ilap/learner.hpp"

namespace ilap {

struct SweepConfig {
  std::vector<double> lambda_grid{0.0, 0.25, 0.5, 0.75};
  int trials = 5;
  std::uint64_t seed = 0;
  std::size_t exposure_size = 200;
  double split_ratio = 0.8;
  /// Classes learned before probing; 0 means all but one.
  int base_classes = 0;
  LearnerOptions learner;  // `input` and `seed` are filled in per trial
  TrainConfig train;
  double discard_floor = 0.2;

  void validate() const;
};

struct SweepResult {
  std::vector<double> lambda_grid;
  /// Mean drop of the repeated class when its own class comes in again.
  std::vector<double> drop_repeated;
  /// Mean of the largest drop over all learned classes when an unseen class comes in.
  std::vector<double> drop_nonrepeated;
  /// Mean of the largest drop among the other classes during the repeated probe.
  std::vector<double> drop_bystander;
  int trials = 0;
};

/// For every trial: learn the base classes with revealed labels, then per
/// lambda run detection training on a copy once with a fresh exposure of a
/// learned class and once with an exposure of the held-out class.
SweepResult run_imbalance_sweep(const LabeledImageSet& train, const SweepConfig& cfg);

struct Calibration {
  double lambda = 0.0;
  double theta = 0.0;
  std::size_t index = 0;  // position on the grid
};

/// lambda* = argmax of drop_repeated - drop_nonrepeated (ties: smaller lambda);
/// theta* = midpoint of the two curves at lambda*.
Calibration select_lambda_theta(const SweepResult& sweep);

void to_json(nlohmann::json& j, const SweepResult& r);
void from_json(const nlohmann::json& j, SweepResult& r);

}  // namespace ilap
