#include "ilap/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ilap/errors.hpp"

namespace ilap::nn {

Tensor masked_softmax(const Tensor& logits, std::span<const char> active, float temperature) {
  const int n = logits.batch();
  const int k = static_cast<int>(logits.row_size());
  if (static_cast<int>(active.size()) != k) {
    throw InvariantError("softmax mask width does not match logits " + logits.shape_string());
  }
  Tensor p({n, k});
  for (int i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    auto out = p.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      if (active[j]) mx = std::max(mx, static_cast<double>(z[j]) / temperature);
    }
    if (!std::isfinite(mx)) continue;  // no active label
    double sum = 0.0;
    std::vector<double> e(k, 0.0);
    for (int j = 0; j < k; ++j) {
      if (!active[j]) continue;
      e[j] = std::exp(static_cast<double>(z[j]) / temperature - mx);
      sum += e[j];
    }
    for (int j = 0; j < k; ++j) out[j] = static_cast<float>(e[j] / sum);
  }
  return p;
}

LossResult masked_cross_entropy(const Tensor& logits, std::span<const int> labels,
                                std::span<const char> active) {
  const int n = logits.batch();
  const int k = static_cast<int>(logits.row_size());
  if (static_cast<int>(labels.size()) != n) {
    throw InvariantError("label count does not match batch size");
  }
  LossResult r;
  r.grad = masked_softmax(logits, active, 1.0f);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= k || !active[y]) {
      throw InvariantError("training label " + std::to_string(y) + " is not an active output");
    }
    auto g = r.grad.row(i);
    total -= std::log(std::max(static_cast<double>(g[y]), 1e-30));
    g[y] -= 1.0f;
    for (int j = 0; j < k; ++j) g[j] /= static_cast<float>(n);
  }
  r.loss = n > 0 ? total / n : 0.0;
  return r;
}

Adam::Adam(std::vector<Group> groups, AdamOptions options)
    : groups_(std::move(groups)), options_(options) {
  for (const auto& g : groups_) {
    auto& m = m_.emplace_back();
    auto& v = v_.emplace_back();
    for (const auto& p : g.params) {
      if (!p.trainable()) throw InvariantError("buffer '" + p.name + "' passed to optimizer");
      m.emplace_back(p.value->size(), 0.0f);
      v.emplace_back(p.value->size(), 0.0f);
    }
  }
}

void Adam::zero_grad() {
  for (auto& g : groups_) {
    for (auto& p : g.params) std::fill(p.grad->begin(), p.grad->end(), 0.0f);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(options_.beta1), step_count_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(options_.beta2), step_count_);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    auto& group = groups_[gi];
    const float step_size = static_cast<float>(group.lr / bc1);
    const float bc2_sqrt = static_cast<float>(std::sqrt(bc2));
    for (std::size_t pi = 0; pi < group.params.size(); ++pi) {
      auto& value = *group.params[pi].value;
      const auto& grad = *group.params[pi].grad;
      auto& m = m_[gi][pi];
      auto& v = v_[gi][pi];
      for (std::size_t i = 0; i < value.size(); ++i) {
        m[i] = options_.beta1 * m[i] + (1 - options_.beta1) * grad[i];
        v[i] = options_.beta2 * v[i] + (1 - options_.beta2) * grad[i] * grad[i];
        value[i] -= step_size * m[i] / (std::sqrt(v[i]) / bc2_sqrt + options_.eps);
      }
    }
  }
}

}  // namespace ilap::nn
