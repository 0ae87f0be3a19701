#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"

#include "ilap/nn/layers.hpp"
#include "ilap/nn/optim.hpp"

using namespace ilap;
using namespace ilap::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, float scale = 1.0f) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> n(0.0f, scale);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

/// Compares analytic input and parameter gradients of L = <w, layer(x)>
/// against central differences.
void check_gradients(Layer& layer, Tensor x, std::mt19937_64& rng, double h = 1e-2, double tol = 2e-2) {
  const Tensor y = layer.forward(x, Mode::train);
  const Tensor w = random_tensor(y.shape(), rng);
  std::vector<Param> params;
  layer.collect("", params);
  for (auto& p : params) {
    if (p.trainable()) std::fill(p.grad->begin(), p.grad->end(), 0.0f);
  }
  const Tensor gx = layer.backward(w);

  auto loss = [&](const Tensor& input) { return dot(w, layer.forward(input, Mode::train)); };
  auto close = [&](double analytic, double numeric) {
    return std::abs(analytic - numeric) <= tol * std::max(1.0, std::abs(numeric));
  };

  std::uniform_int_distribution<std::size_t> pick_x(0, x.size() - 1);
  for (int k = 0; k < 12; ++k) {
    const auto i = pick_x(rng);
    const float keep = x[i];
    x[i] = keep + static_cast<float>(h);
    const double up = loss(x);
    x[i] = keep - static_cast<float>(h);
    const double down = loss(x);
    x[i] = keep;
    const double numeric = (up - down) / (2 * h);
    INFO(layer.kind() << " input " << i << ": analytic " << gx[i] << " numeric " << numeric);
    CHECK(close(gx[i], numeric));
  }
  for (auto& p : params) {
    if (!p.trainable() || p.value->empty()) continue;
    const std::vector<float> analytic = *p.grad;
    std::uniform_int_distribution<std::size_t> pick(0, p.value->size() - 1);
    for (int k = 0; k < 6; ++k) {
      const auto i = pick(rng);
      float& v = (*p.value)[i];
      const float keep = v;
      v = keep + static_cast<float>(h);
      const double up = loss(x);
      v = keep - static_cast<float>(h);
      const double down = loss(x);
      v = keep;
      const double numeric = (up - down) / (2 * h);
      INFO(layer.kind() << " param " << p.name << "[" << i << "]: analytic " << analytic[i]
                        << " numeric " << numeric);
      CHECK(close(analytic[i], numeric));
    }
  }
}

}  // namespace

TEST_CASE("layer gradients match finite differences") {
  std::mt19937_64 rng(42);
  RandomEngine init(1);

  SUBCASE("linear") {
    Linear l(5, 3, init);
    check_gradients(l, random_tensor({4, 5}, rng), rng);
  }
  SUBCASE("conv2d with stride and padding") {
    Conv2d c(2, 3, 3, 2, 1, init);
    check_gradients(c, random_tensor({2, 2, 5, 5}, rng), rng);
  }
  SUBCASE("strided 1x1 conv2d") {
    Conv2d c(2, 4, 1, 2, 0, init);
    check_gradients(c, random_tensor({4, 2, 4, 4}, rng), rng);
  }
  SUBCASE("relu") {
    ReLU r;
    Tensor x = random_tensor({3, 7}, rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(x[i]) < 0.05f) x[i] = 0.5f;  // stay off the kink
    }
    check_gradients(r, x, rng, 1e-3);
  }
  SUBCASE("maxpool") {
    MaxPool2d m(2, 2);
    check_gradients(m, random_tensor({2, 2, 4, 4}, rng), rng, 1e-3);
  }
  SUBCASE("batchnorm in training mode") {
    BatchNorm2d b(3);
    check_gradients(b, random_tensor({4, 3, 2, 2}, rng), rng, 1e-2, 5e-2);
  }
  SUBCASE("global average pool") {
    GlobalAvgPool g;
    check_gradients(g, random_tensor({2, 3, 3, 3}, rng), rng);
  }
  SUBCASE("flatten") {
    Flatten f;
    check_gradients(f, random_tensor({2, 2, 2, 2}, rng), rng);
  }
  SUBCASE("input adapter") {
    InputAdapter a(6, 3);
    check_gradients(a, random_tensor({2, 1, 4, 4}, rng), rng);
  }
  SUBCASE("basic block with projection") {
    BasicBlock b(2, 4, 2, init);
    check_gradients(b, random_tensor({4, 2, 4, 4}, rng), rng, 1e-3, 6e-2);
  }
}

TEST_CASE("linear add_output appends a zero unit") {
  RandomEngine init(3);
  Linear l(4, 2, init);
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({3, 4}, rng);
  const Tensor before = l.infer(x);
  l.add_output();
  CHECK(l.out_features() == 3);
  const Tensor after = l.infer(x);
  for (int i = 0; i < 3; ++i) {
    CHECK(after.row(i)[0] == before.row(i)[0]);
    CHECK(after.row(i)[1] == before.row(i)[1]);
    CHECK(after.row(i)[2] == 0.0f);
  }
}

TEST_CASE("masked softmax ignores inactive logits") {
  const Tensor z({1, 3}, std::vector<float>{1.0f, 50.0f, 1.0f});
  const std::vector<char> mask{1, 0, 1};
  const Tensor p = masked_softmax(z, mask);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == 0.0f);
  CHECK(p[2] == doctest::Approx(0.5));
  const Tensor q = masked_softmax(Tensor({1, 2}, std::vector<float>{0.0f, std::log(3.0f)}),
                                  std::vector<char>{1, 1}, 2.0f);
  // exp(log3 / 2) = sqrt(3)
  CHECK(q[1] == doctest::Approx(std::sqrt(3.0) / (1.0 + std::sqrt(3.0))));
}

TEST_CASE("masked cross-entropy gradient matches finite differences") {
  std::mt19937_64 rng(9);
  Tensor z = random_tensor({3, 4}, rng);
  const std::vector<int> labels{0, 3, 1};
  const std::vector<char> mask{1, 1, 0, 1};
  std::vector<int> bad{2, 0, 0};
  CHECK_THROWS(masked_cross_entropy(z, bad, mask));
  auto r = masked_cross_entropy(z, labels, mask);
  const double h = 1e-3;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const float keep = z[i];
    z[i] = keep + static_cast<float>(h);
    const double up = masked_cross_entropy(z, labels, mask).loss;
    z[i] = keep - static_cast<float>(h);
    const double down = masked_cross_entropy(z, labels, mask).loss;
    z[i] = keep;
    CHECK(r.grad[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-2).scale(1.0));
  }
  // masked column gets nothing
  for (int i = 0; i < 3; ++i) CHECK(r.grad.row(i)[2] == 0.0f);
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<float> w{3.0f, -2.0f}, g(2, 0.0f);
  Param p{"w", &w, &g, {2}};
  Adam opt({{{p}, 0.1f}});
  for (int step = 0; step < 500; ++step) {
    opt.zero_grad();
    for (int i = 0; i < 2; ++i) g[i] = 2.0f * w[i];
    opt.step();
  }
  CHECK(std::abs(w[0]) < 1e-2);
  CHECK(std::abs(w[1]) < 1e-2);
}
