#include "ilap/tensor.hpp"

#include <functional>
#include <numeric>
#include <sstream>

#include "ilap/errors.hpp"

namespace ilap {

std::size_t shape_numel(const std::vector<int>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw InvariantError("tensor data size " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

std::size_t Tensor::row_size() const {
  if (shape_.empty()) return 0;
  return shape_numel(std::vector<int>(shape_.begin() + 1, shape_.end()));
}

std::span<float> Tensor::row(int i) {
  const auto n = row_size();
  return {data_.data() + static_cast<std::size_t>(i) * n, n};
}

std::span<const float> Tensor::row(int i) const {
  const auto n = row_size();
  return {data_.data() + static_cast<std::size_t>(i) * n, n};
}

Tensor Tensor::reshaped(std::vector<int> shape) const& {
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::reshaped(std::vector<int> shape) && {
  return Tensor(std::move(shape), std::move(data_));
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

}  // namespace ilap
