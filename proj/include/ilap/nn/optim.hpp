#pragma once

#include <span>
#include <vector>

#include "ilap/nn/layers.hpp"

namespace ilap::nn {

struct LossResult {
  double loss = 0.0;  // mean over the batch
  Tensor grad;        // d(mean loss)/d(logits)
};

/// Softmax cross-entropy restricted to the logits whose `active` flag is set.
/// Masked logits receive zero probability and zero gradient.
LossResult masked_cross_entropy(const Tensor& logits, std::span<const int> labels,
                                std::span<const char> active);

/// Softmax over the active logits of each row, with optional temperature.
Tensor masked_softmax(const Tensor& logits, std::span<const char> active, float temperature = 1.0f);

struct AdamOptions {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Adam with per-group learning rates. Parameter storage must outlive the optimizer
/// and must not be resized while it is alive.
class Adam {
 public:
  struct Group {
    std::vector<Param> params;
    float lr;
  };

  explicit Adam(std::vector<Group> groups, AdamOptions options = {});

  void zero_grad();
  void step();

 private:
  std::vector<Group> groups_;
  AdamOptions options_;
  std::vector<std::vector<std::vector<float>>> m_;
  std::vector<std::vector<std::vector<float>>> v_;
  long step_count_ = 0;
};

}  // namespace ilap::nn
