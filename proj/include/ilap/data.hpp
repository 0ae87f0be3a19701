#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ilap/tensor.hpp"

namespace ilap {

using ClassId = int;
using SampleId = std::size_t;

struct ImageShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Contiguous storage of same-shaped images. Carries no labels, so it can be
/// handed to learner-facing code without leaking ground truth.
class ImageTable {
 public:
  ImageTable() = default;
  ImageTable(ImageShape shape, std::vector<float> pixels);

  const ImageShape& shape() const { return shape_; }
  std::size_t size() const { return count_; }
  std::span<const float> image(SampleId id) const;
  /// Copies the selected images into an N x C x H x W tensor.
  Tensor gather(std::span<const SampleId> ids) const;

 private:
  ImageShape shape_;
  std::size_t count_ = 0;
  std::vector<float> pixels_;
};

enum class Split { train, test };

/// One split of a dataset: images plus their ground-truth classes in [0, num_classes).
struct LabeledImageSet {
  ImageTable images;
  std::vector<ClassId> labels;
  Split split = Split::train;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Sample ids of each class, in storage order.
  std::vector<std::vector<SampleId>> ids_by_class() const;
};

/// Per-channel (x - mean) / std applied after scaling pixels to [0, 1].
struct Normalization {
  std::vector<float> mean;
  std::vector<float> stddev;
};

/// Gaussian clusters on a circle, stored as 2-channel 1x1 images.
struct Blobs2dParams {
  int num_classes = 5;
  int train_per_class = 1500;
  int test_per_class = 300;
  double radius = 4.0;
  double sigma = 0.25;
  std::uint64_t seed = 0;
};

struct DatasetOptions {
  std::string name;
  std::filesystem::path root;
  bool normalize = true;
  /// Overrides the built-in per-dataset constants when set.
  std::optional<Normalization> normalization;
  Blobs2dParams blobs;
};

struct Dataset {
  std::string name;
  LabeledImageSet train;
  LabeledImageSet test;
  /// Constants that were applied (empty when normalization is off).
  Normalization normalization;

  int num_classes() const { return train.num_classes; }
};

/// Names accepted by load_dataset.
const std::vector<std::string>& supported_datasets();

/// Built-in normalization constants for a named image dataset.
Normalization default_normalization(const std::string& name);

/// Loads the train and test splits of a dataset.
///
/// Layouts under `root`:
///   mnist, fashion_mnist: <root>/<name>/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]
///   cifar10:  <root>/cifar10/[cifar-10-batches-bin/]{data_batch_1..5,test_batch}.bin
///   cifar100: <root>/cifar100/[cifar-100-binary/]{train,test}.bin  (fine labels)
///   svhn:     <root>/svhn/{train,test}.bin  in the cifar10 record layout
///   blobs2d:  generated from `options.blobs`; root is ignored
///
/// Throws ConfigError for unknown names and IngestionError naming the file for
/// missing or malformed inputs.
Dataset load_dataset(const DatasetOptions& options);

/// Generates the blobs2d dataset directly.
Dataset make_blobs2d(const Blobs2dParams& params);

/// Centers of the blobs2d classes.
std::vector<std::pair<double, double>> blobs2d_centers(const Blobs2dParams& params);

/// Writes cifar10-layout binary records (label byte + 3072 bytes, RGB planes).
void write_cifar10_records(const std::filesystem::path& path,
                           std::span<const std::uint8_t> labels,
                           std::span<const std::uint8_t> pixels);

/// Writes a procedurally generated dataset in the cifar10 binary layout
/// (five train batches plus a test batch) under `dir`: ten classes, each a
/// distinct colour and stripe orientation with per-image noise. Stands in for
/// CIFAR-10 when the real files are unavailable.
void write_synthetic_cifar10(const std::filesystem::path& dir, int train_per_class,
                             int test_per_class, std::uint64_t seed);

}  // namespace ilap
