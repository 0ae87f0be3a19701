#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"

#include "ilap/errors.hpp"
#include "ilap/exemplar_store.hpp"

using namespace ilap;

namespace {

/// Brute force: positions sorted by distance to the mean, ties by position.
std::vector<std::size_t> nearest_to_mean(const std::vector<std::vector<double>>& rows, std::size_t m) {
  const std::size_t d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
  }
  for (auto& v : mean) v /= static_cast<double>(rows.size());
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += (rows[i][k] - mean[k]) * (rows[i][k] - mean[k]);
    keyed.emplace_back(std::sqrt(s), i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(m, rows.size()); ++i) out.push_back(keyed[i].second);
  return out;
}

Tensor to_tensor(const std::vector<std::vector<double>>& rows) {
  Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows.front().size())});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) t.row(static_cast<int>(i))[k] = static_cast<float>(rows[i][k]);
  }
  return t;
}

Learner mlp_with_labels(const Dataset& d, int labels) {
  LearnerOptions o;
  o.input = d.train.images.shape();
  o.num_initial_labels = labels;
  return Learner::build(o);
}

void set_bias(Learner& l, Label label, float value) {
  for (auto& p : l.parameters()) {
    if (p.name == "head.bias") (*p.value)[label] = value;
  }
}

}  // namespace

TEST_CASE("representatives are the rows nearest the mean") {
  const Tensor f({3, 1}, std::vector<float>{0.0f, 1.0f, 10.0f});
  CHECK(select_representatives(f, 2) == std::vector<std::size_t>{1, 0});
  CHECK(select_representatives(f, 3).size() == 3);
  CHECK(select_representatives(f, 7).size() == 3);

  const Tensor same({4, 2}, 1.5f);
  CHECK(select_representatives(same, 2) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("representative selection agrees with a brute-force ranking") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 2 + rng() % 40, dims = 1 + rng() % 6, m = 1 + rng() % rows;
    std::vector<std::vector<double>> x(rows, std::vector<double>(dims));
    for (auto& r : x) {
      for (auto& v : r) v = static_cast<float>(n(rng));
    }
    INFO("trial " << trial);
    CHECK(select_representatives(to_tensor(x), m) == nearest_to_mean(x, m));
  }
}

TEST_CASE("imbalanced count") {
  CHECK(imbalanced_count(0.5, 160) == 80);
  CHECK(imbalanced_count(0.0, 160) == 160);
  CHECK(imbalanced_count(0.9, 160) == 16);
  CHECK(imbalanced_count(0.75, 2) == 1);  // 0.5 rounds up
  CHECK(imbalanced_count(0.5, 1) == 1);
  CHECK_THROWS_AS(imbalanced_count(1.0, 160), ConfigError);
  CHECK_THROWS_AS(imbalanced_count(-0.1, 160), ConfigError);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int tenths = static_cast<int>(rng() % 10);
    const double lambda = tenths / 10.0;
    const std::size_t e = rng() % 500;
    // integer oracle: round-half-up((10 - tenths) * e / 10)
    const std::size_t want = ((10 - tenths) * e * 2 + 10) / 20;
    INFO("lambda " << lambda << " e " << e);
    CHECK(imbalanced_count(lambda, e) == want);
  }
}

TEST_CASE("banks respect caps and train/val disjointness") {
  ExemplarStore s(3, 2);
  CHECK_THROWS_AS(s.set_bank(0, {{1, 2, 3, 4}, {}}), InvariantError);
  CHECK_THROWS_AS(s.set_bank(0, {{1, 2}, {2}}), InvariantError);
  s.set_bank(0, {{1, 2, 3}, {4, 5}});
  s.set_bank(2, {{6}, {7}});
  CHECK(s.labels() == std::vector<Label>{0, 2});
  CHECK(s.train_samples().size() == 4);
  CHECK(s.val_samples().labels == std::vector<Label>{0, 0, 2});
  CHECK(s.erase(0) == 5);
  CHECK(s.erase(0) == 0);
  CHECK_THROWS_AS(s.bank(0), InvariantError);
  CHECK_THROWS_AS(ExemplarStore(0, 1), ConfigError);
}

TEST_CASE("commit keeps at most the caps and joins old and new samples") {
  const auto d = fixture::blobs(2, 600, 5);
  auto st = fixture::fresh_state(d);
  st.learner.add_label();
  const auto sampler = fixture::sampler(d, {0, 0});
  const auto first = sampler.materialize(0).exposure;
  commit_exposure(st.store, 0, first.e_train, first.e_val, st.learner, d.train.images);
  CHECK(st.store.bank(0).train == first.e_train);
  CHECK(std::set<SampleId>(st.store.bank(0).val.begin(), st.store.bank(0).val.end()) ==
        std::set<SampleId>(first.e_val.begin(), first.e_val.end()));

  const auto second = sampler.materialize(1).exposure;
  commit_exposure(st.store, 0, second.e_train, second.e_val, st.learner, d.train.images);
  const auto& bank = st.store.bank(0);
  CHECK(bank.train.size() == 160);
  CHECK(bank.val.size() == 40);
  std::set<SampleId> pool(first.e_train.begin(), first.e_train.end());
  pool.insert(second.e_train.begin(), second.e_train.end());
  for (auto id : bank.train) CHECK(pool.count(id) == 1);

  CHECK_THROWS_AS(commit_exposure(st.store, 5, first.e_train, first.e_val, st.learner, d.train.images),
                  InvariantError);
}

TEST_CASE("imbalanced sampling draws distinct samples per bank") {
  ExemplarStore s(160, 40);
  std::vector<SampleId> a(160), b(30);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 1000);
  s.set_bank(0, {a, {}});
  s.set_bank(1, {b, {}});
  RandomEngine rng(2);
  const auto drawn = sample_imbalanced(s, 0.5, 160, rng);
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < drawn.size(); ++i) (drawn.labels[i] == 0 ? n0 : n1) += 1;
  CHECK(n0 == 80);
  CHECK(n1 == 30);
  CHECK(std::set<SampleId>(drawn.ids.begin(), drawn.ids.end()).size() == drawn.size());
  for (std::size_t i = 0; i < drawn.size(); ++i) CHECK((drawn.ids[i] >= 1000) == (drawn.labels[i] == 1));
}

TEST_CASE("weak classes are discarded below the floor") {
  const auto d = fixture::blobs(2, 100, 5);
  const auto by_class = d.train.ids_by_class();
  auto make = [&] {
    ExemplarStore s(160, 40);
    s.set_bank(0, {{by_class[0][0]}, {by_class[0].begin() + 1, by_class[0].begin() + 11}});
    s.set_bank(1, {{by_class[1][0]}, {by_class[1].begin() + 1, by_class[1].begin() + 11}});
    return s;
  };

  // constant classifier: label 0 scores 1.0, label 1 scores 0.0
  auto l = mlp_with_labels(d, 2);
  set_bias(l, 0, 5.0f);
  auto store = make();
  const auto r = discard_weak_classes(store, l, d.train.images, 0.2);
  CHECK(r.removed == std::vector<Label>{1});
  CHECK(r.removed_samples == 11);
  CHECK(r.accuracies.at(0) == 1.0);
  CHECK(store.labels() == std::vector<Label>{0});
  CHECK_FALSE(l.is_active(1));

  auto keep = mlp_with_labels(d, 2);
  set_bias(keep, 0, 5.0f);
  auto full = make();
  CHECK(discard_weak_classes(full, keep, d.train.images, 0.0).removed.empty());
  CHECK(full.labels().size() == 2);
}

TEST_CASE("a higher floor never discards fewer labels") {
  const auto d = fixture::blobs(3, 200, 5);
  auto st = fixture::fresh_state(d, 1);
  for (int k = 0; k < 3; ++k) st.learner.add_label();
  auto train = fixture::blob_training();
  train.epochs = 1;
  LabeledSamples few;
  const auto by_class = d.train.ids_by_class();
  for (int k = 0; k < 3; ++k) {
    few.add(by_class[k][0], k);
    st.store.set_bank(k, {{by_class[k][0]}, {by_class[k].begin() + 1, by_class[k].begin() + 21}});
  }
  st.learner.fit(d.train.images, few, {}, train);
  std::size_t previous = 0;
  for (double floor : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 1.01}) {
    auto store = st.store;
    auto learner = st.learner.clone();
    const auto n = discard_weak_classes(store, learner, d.train.images, floor).removed.size();
    CHECK(n >= previous);
    previous = n;
  }
  CHECK(previous == 3);
}
