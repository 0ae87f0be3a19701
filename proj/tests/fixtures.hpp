#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "ilap/data.hpp"
#include "ilap/detector.hpp"
#include "ilap/stream.hpp"

namespace fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ilap_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ilap::Dataset blobs(int classes = 5, int train_per_class = 600, int test_per_class = 100,
                           double sigma = 0.25, std::uint64_t seed = 0) {
  ilap::Blobs2dParams p;
  p.num_classes = classes;
  p.train_per_class = train_per_class;
  p.test_per_class = test_per_class;
  p.sigma = sigma;
  p.seed = seed;
  return ilap::make_blobs2d(p);
}

inline ilap::TrainConfig blob_training() {
  ilap::TrainConfig t;
  t.lr_head = 1e-4f;
  return t;
}

inline ilap::DetectorConfig blob_detector(double lambda = 0.5, double theta = 0.6) {
  ilap::DetectorConfig c;
  c.lambda = lambda;
  c.theta = theta;
  c.train = blob_training();
  return c;
}

inline ilap::IncrementalState fresh_state(const ilap::Dataset& d, std::uint64_t seed = 0,
                                          std::size_t cap_train = 160, std::size_t cap_val = 40) {
  ilap::LearnerOptions lo;
  lo.arch = ilap::Architecture::mlp;
  lo.input = d.train.images.shape();
  lo.seed = seed;
  return {ilap::Learner::build(lo), ilap::ExemplarStore(cap_train, cap_val)};
}

/// Sampler over an explicit class order.
inline ilap::ExposureSampler sampler(const ilap::Dataset& d, std::vector<ilap::ClassId> order,
                                     std::uint64_t seed = 0, int exposure_size = 200) {
  ilap::StreamConfig sc;
  for (int k = 0; k < d.num_classes(); ++k) sc.class_ids.push_back(k);
  sc.exposure_size = exposure_size;
  sc.seed = seed;
  return ilap::ExposureSampler(d.train, std::move(order), sc);
}

}  // namespace fixture
