#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ilap/data.hpp"
#include "ilap/nn/layers.hpp"

namespace ilap {

/// Learner-side class id: an output column of the growable head.
using Label = int;

enum class Architecture { resnet18, small_cnn, mlp };

Architecture parse_architecture(const std::string& s);
std::string to_string(Architecture arch);

/// Per-exposure training hyperparameters. The feature extractor always trains
/// at a tenth of the head learning rate.
struct TrainConfig {
  int epochs = 15;
  int batch_size = 16;
  float lr_head = 2e-4f;
  int patience = 3;
  /// Validation-based early stopping with best-epoch restore; off runs all epochs.
  bool early_stopping = true;
  std::uint64_t seed = 0;

  float lr_features() const { return lr_head / 10.0f; }
};

/// Sample ids (into one image table) paired with learner labels.
struct LabeledSamples {
  std::vector<SampleId> ids;
  std::vector<Label> labels;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  void add(SampleId id, Label label) {
    ids.push_back(id);
    labels.push_back(label);
  }
  void add_all(std::span<const SampleId> more, Label label) {
    for (auto id : more) add(id, label);
  }
  void append(const LabeledSamples& other) {
    ids.insert(ids.end(), other.ids.begin(), other.ids.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }
};

struct FitReport {
  int epochs_run = 0;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_accuracy = 0.0;
  std::vector<double> val_accuracy;  // one entry per epoch run
  bool early_stopping = true;
};

struct LearnerOptions {
  Architecture arch = Architecture::mlp;
  ImageShape input;
  bool pretrained = false;
  /// Feature-extractor weights in the tensor file format; required when pretrained.
  std::filesystem::path weights;
  int num_initial_labels = 0;
  std::uint64_t seed = 0;
};

/// Classifier = feature extractor + growable linear head + registry of
/// active labels. Copying yields a fully independent deep copy.
class Learner {
 public:
  static Learner build(const LearnerOptions& options);

  Learner clone() const { return *this; }

  Architecture arch() const { return arch_; }
  const ImageShape& input_shape() const { return input_; }
  bool pretrained() const { return pretrained_; }
  int feature_dim() const { return feature_dim_; }

  /// Total labels ever created (head width).
  int num_labels() const { return static_cast<int>(active_.size()); }
  int num_active() const;
  bool is_active(Label label) const;
  std::vector<Label> active_labels() const;
  std::span<const char> active_mask() const { return active_; }

  /// Widens the head by one zero-initialized output and registers it.
  Label add_label();
  /// Masks a label out of predictions; the head column is kept so ids stay stable.
  void deactivate(Label label);

  Tensor logits(const Tensor& images) const;
  Tensor features(const Tensor& images) const;
  /// Argmax over active labels; -1 when no label is active.
  std::vector<Label> predict(const Tensor& images) const;

  // Chunked helpers over an image table.
  std::vector<Label> predict(const ImageTable& table, std::span<const SampleId> ids) const;
  Tensor features(const ImageTable& table, std::span<const SampleId> ids) const;
  Tensor logits(const ImageTable& table, std::span<const SampleId> ids) const;

  /// d(objective)/d(images), where `logit_grad` maps logits to d(objective)/d(logits).
  /// Batch norm uses running statistics.
  Tensor input_gradient(const Tensor& images,
                        const std::function<Tensor(const Tensor&)>& logit_grad) const;

  /// Mini-batch Adam training with validation-based early stopping; restores
  /// the epoch with the best aggregate val accuracy.
  FitReport fit(const ImageTable& table, const LabeledSamples& train, const LabeledSamples& val,
                const TrainConfig& cfg);

  /// All parameters and buffers, named ("features.*", "head.*").
  std::vector<nn::Param> parameters();

  void save(std::ostream& out) const;
  static Learner load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Learner load(const std::filesystem::path& path);

  /// FNV-1a over all parameter and buffer bytes.
  std::uint64_t parameter_hash() const;

 private:
  Learner() = default;

  Architecture arch_ = Architecture::mlp;
  ImageShape input_;
  bool pretrained_ = false;
  int feature_dim_ = 0;
  nn::Sequential extractor_;
  nn::Linear head_ = nn::Linear::zeros(0, 0);
  std::vector<char> active_;
};

/// Accuracy of each label on its own val bank: the fraction of bank samples
/// predicted as that label. Throws InvariantError for an empty bank.
std::map<Label, double> per_class_accuracy(const Learner& learner, const ImageTable& table,
                                           const std::map<Label, std::vector<SampleId>>& val_banks);

/// Fraction of samples predicted as their label; 0 for an empty set.
double accuracy(const Learner& learner, const ImageTable& table, const LabeledSamples& samples);

// Tensor files: named float tensors, used for checkpoints and pretrained weights.
void write_tensor_file(std::ostream& out, const std::vector<nn::Param>& params);
/// Loads tensors by name into `params`; every param must be present with a
/// matching shape unless `allow_missing`.
void read_tensor_file(std::istream& in, const std::vector<nn::Param>& params,
                      const std::string& source, bool allow_missing = false);

}  // namespace ilap
