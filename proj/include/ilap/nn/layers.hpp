#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ilap/tensor.hpp"

namespace ilap::nn {

enum class Mode { train, eval };

/// A named view onto a layer's parameter or buffer. `grad` is null for
/// buffers (e.g. batch-norm running statistics).
struct Param {
  std::string name;
  std::vector<float>* value = nullptr;
  std::vector<float>* grad = nullptr;
  std::vector<int> shape;

  bool trainable() const { return grad != nullptr; }
};

/// Layer contract. `forward` caches what `backward` needs; `infer` is the
/// const, cache-free evaluation path and is safe to call concurrently.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor infer(const Tensor& x) const = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect(const std::string& prefix, std::vector<Param>& out);
  virtual std::unique_ptr<Layer> clone() const = 0;
};

using RandomEngine = std::mt19937_64;

class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, RandomEngine& rng, bool bias = true);
  static Linear zeros(int in_features, int out_features, bool bias = true);

  std::string kind() const override { return "linear"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  /// Appends one output unit with zero weights and zero bias.
  void add_output();

  std::vector<float>& weight() { return weight_; }
  std::vector<float>& bias() { return bias_; }

 private:
  int in_;
  int out_;
  bool has_bias_;
  std::vector<float> weight_;  // out x in
  std::vector<float> bias_;
  std::vector<float> weight_grad_;
  std::vector<float> bias_grad_;
  Tensor input_;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
         RandomEngine& rng, bool bias = true);

  std::string kind() const override { return "conv2d"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  int out_extent(int in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }
  void im2col(const float* image, int height, int width, float* cols) const;
  void col2im(const float* cols, int height, int width, float* image) const;

  int in_c_;
  int out_c_;
  int kernel_;
  int stride_;
  int padding_;
  bool has_bias_;
  std::vector<float> weight_;  // out x (in * k * k)
  std::vector<float> bias_;
  std::vector<float> weight_grad_;
  std::vector<float> bias_grad_;
  Tensor input_;
};

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  Tensor output_;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int padding = 0);

  std::string kind() const override { return "maxpool2d"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  Tensor pool(const Tensor& x, std::vector<std::int64_t>* argmax) const;

  int kernel_;
  int stride_;
  int padding_;
  std::vector<int> input_shape_;
  std::vector<std::int64_t> argmax_;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f);

  std::string kind() const override { return "batchnorm2d"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

 private:
  int channels_;
  float momentum_;
  float eps_;
  std::vector<float> gamma_, beta_;
  std::vector<float> gamma_grad_, beta_grad_;
  std::vector<float> running_mean_, running_var_;
  // backward cache
  Mode cached_mode_ = Mode::eval;
  Tensor normalized_;
  std::vector<float> inv_std_;
};

class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "global_avg_pool"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  std::vector<int> input_shape_;
};

class Flatten final : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  std::vector<int> input_shape_;
};

/// Bilinear resize (half-pixel centers) to a square target and, for
/// single-channel inputs, replication to `channels`.
class InputAdapter final : public Layer {
 public:
  InputAdapter(int size, int channels);

  std::string kind() const override { return "input_adapter"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<InputAdapter>(*this); }

 private:
  struct Tap {
    int lo, hi;
    float w_hi;
  };
  static std::vector<Tap> taps(int in, int out);

  int size_;
  int channels_;
  std::vector<int> input_shape_;
};

/// Ordered container of named child layers; copying deep-clones the children.
class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::unique_ptr<Layer> layer);
  Sequential& add(std::string name, std::unique_ptr<Layer> layer);

  std::string kind() const override { return "sequential"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer>>> layers_;
};

/// ResNet basic block: two 3x3 conv/bn pairs plus an identity or projected shortcut.
class BasicBlock final : public Layer {
 public:
  BasicBlock(int in_channels, int out_channels, int stride, RandomEngine& rng);

  std::string kind() const override { return "basic_block"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BasicBlock>(*this); }

 private:
  Sequential main_;
  Sequential downsample_;  // empty for identity shortcut
  Tensor output_;
};

}  // namespace ilap::nn
