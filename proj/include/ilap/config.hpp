#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ilap/baselines.hpp"
#include "ilap/calibration.hpp"
#include "ilap/data.hpp"
#include "ilap/detector.hpp"
#include "ilap/learner.hpp"
#include "ilap/stream.hpp"

namespace ilap {

enum class Method { ilap_ci, ilap_noci, msp, odin, feature_distance, supervised };

Method parse_method(const std::string& s);
std::string to_string(Method m);
/// Methods that never see ground truth while deciding labels.
bool is_unsupervised(Method m);

/// Everything that determines a run. Serialized as INI with one section per
/// module; see configs/ for annotated examples.
struct RunConfig {
  Method method = Method::ilap_ci;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs";
  /// Mapped accuracy on the test set is computed every this many exposures
  /// (and always after the last one).
  int eval_every = 1;
  bool checkpoint = true;
  /// Truncates the schedule; 0 keeps all exposures.
  std::size_t max_exposures = 0;

  std::string dataset = "blobs2d";
  /// Empty: $ILAP_DATA_ROOT, else ./data.
  std::filesystem::path data_root;
  bool normalize = true;
  Blobs2dParams blobs;

  /// Empty class list means every class of the dataset. The stream seed is
  /// replaced by the run seed.
  StreamConfig stream;

  LearnerOptions learner;
  TrainConfig train;

  /// Unset lambda/theta take the method defaults (0.5/0.6 with class
  /// imbalance, 0/0.4 without).
  std::optional<double> lambda;
  std::optional<double> theta;
  double discard_floor = 0.2;
  bool detection_early_stopping = false;

  /// 0 means the exposure's train/val sizes.
  std::size_t cap_train = 0;
  std::size_t cap_val = 0;

  ScorerConfig odin{ScorerKind::odin, 2.0, 0.0012, std::nullopt};
  /// Fixed feature-distance threshold; fitted from a supervised pass when unset.
  std::optional<double> distance_threshold;

  SweepConfig sweep;

  void validate() const;
  DetectorConfig detector() const;
  std::filesystem::path resolved_data_root() const;
  DatasetOptions dataset_options() const;
  /// Sweep settings with the learner, training and exposure sizes of this run.
  SweepConfig sweep_config() const;
};

RunConfig parse_run_config(std::istream& in, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
/// Applies one "section.key=value" override.
void apply_override(RunConfig& cfg, const std::string& assignment);
/// Writes every key, so the file alone reproduces the run.
void write_run_config(std::ostream& out, const RunConfig& cfg);
std::string to_ini(const RunConfig& cfg);

}  // namespace ilap
