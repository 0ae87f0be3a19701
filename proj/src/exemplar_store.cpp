#include "ilap/exemplar_store.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ilap/errors.hpp"

namespace ilap {

ExemplarStore::ExemplarStore(std::size_t cap_train, std::size_t cap_val)
    : cap_train_(cap_train), cap_val_(cap_val) {
  if (cap_train == 0 || cap_val == 0) throw ConfigError("exemplar caps must be positive");
}

std::vector<Label> ExemplarStore::labels() const {
  std::vector<Label> out;
  for (const auto& [label, bank] : banks_) out.push_back(label);
  return out;
}

const Bank& ExemplarStore::bank(Label label) const {
  auto it = banks_.find(label);
  if (it == banks_.end()) throw InvariantError("no exemplar bank for label " + std::to_string(label));
  return it->second;
}

void ExemplarStore::set_bank(Label label, Bank bank) {
  if (bank.train.size() > cap_train_ || bank.val.size() > cap_val_) {
    throw InvariantError("exemplar bank exceeds its cap");
  }
  const std::set<SampleId> train_ids(bank.train.begin(), bank.train.end());
  for (auto id : bank.val) {
    if (train_ids.count(id)) throw InvariantError("sample in both train and val banks");
  }
  banks_[label] = std::move(bank);
}

std::size_t ExemplarStore::erase(Label label) {
  auto it = banks_.find(label);
  if (it == banks_.end()) return 0;
  const auto n = it->second.train.size() + it->second.val.size();
  banks_.erase(it);
  return n;
}

LabeledSamples ExemplarStore::train_samples() const {
  LabeledSamples s;
  for (const auto& [label, bank] : banks_) s.add_all(bank.train, label);
  return s;
}

LabeledSamples ExemplarStore::val_samples() const {
  LabeledSamples s;
  for (const auto& [label, bank] : banks_) s.add_all(bank.val, label);
  return s;
}

std::map<Label, std::vector<SampleId>> ExemplarStore::val_banks() const {
  std::map<Label, std::vector<SampleId>> out;
  for (const auto& [label, bank] : banks_) out[label] = bank.val;
  return out;
}

std::vector<std::size_t> select_representatives(const Tensor& features, std::size_t m) {
  const auto n = static_cast<std::size_t>(features.batch());
  if (m > n) {
    spdlog::warn("asked for {} representatives out of {} samples; keeping all", m, n);
    m = n;
  }
  const auto d = features.row_size();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = features.row(static_cast<int>(i));
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
  }
  for (auto& v : mean) v /= static_cast<double>(std::max<std::size_t>(n, 1));
  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = features.row(static_cast<int>(i));
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += (r[k] - mean[k]) * (r[k] - mean[k]);
    dist[i] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  order.resize(m);
  return order;
}

std::vector<SampleId> select_representatives(const ImageTable& table,
                                             std::span<const SampleId> ids,
                                             const Learner& learner, std::size_t m) {
  if (m >= ids.size()) {
    if (m > ids.size()) {
      spdlog::warn("asked for {} representatives out of {} samples; keeping all", m, ids.size());
    }
    return {ids.begin(), ids.end()};
  }
  auto picks = select_representatives(learner.features(table, ids), m);
  std::vector<SampleId> out;
  out.reserve(picks.size());
  for (auto p : picks) out.push_back(ids[p]);
  return out;
}

namespace {

std::vector<SampleId> unique_union(std::span<const SampleId> a, std::span<const SampleId> b,
                                   const std::set<SampleId>& exclude) {
  std::vector<SampleId> out;
  std::set<SampleId> seen;
  for (auto part : {a, b}) {
    for (auto id : part) {
      if (!exclude.count(id) && seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

}  // namespace

void commit_exposure(ExemplarStore& store, Label label, std::span<const SampleId> e_train,
                     std::span<const SampleId> e_val, const Learner& learner,
                     const ImageTable& table) {
  if (!learner.is_active(label)) {
    throw InvariantError("commit to label " + std::to_string(label) + " outside the registry");
  }
  Bank old;
  if (store.contains(label)) old = store.bank(label);
  Bank next;
  const auto train_pool = unique_union(old.train, e_train, {});
  next.train = select_representatives(table, train_pool, learner,
                                      std::min(store.cap_train(), train_pool.size()));
  // Reused images (small classes) must not land in both banks.
  const std::set<SampleId> in_train(next.train.begin(), next.train.end());
  const auto val_pool = unique_union(old.val, e_val, in_train);
  next.val = select_representatives(table, val_pool, learner,
                                    std::min(store.cap_val(), val_pool.size()));
  store.set_bank(label, std::move(next));
}

std::size_t imbalanced_count(double lambda, std::size_t e_train_size) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in [0, 1)");
  const long double x = (1.0L - static_cast<long double>(lambda)) * e_train_size;
  return static_cast<std::size_t>(std::floor(x + 0.5L + 1e-9L));
}

LabeledSamples sample_imbalanced(const ExemplarStore& store, double lambda,
                                 std::size_t e_train_size, RandomEngine& rng) {
  const auto want = imbalanced_count(lambda, e_train_size);
  LabeledSamples out;
  for (const auto& [label, bank] : store.banks()) {
    auto pool = bank.train;
    const auto k = std::min(want, pool.size());
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    out.add_all(std::span<const SampleId>(pool.data(), k), label);
  }
  return out;
}

DiscardResult discard_weak_classes(ExemplarStore& store, Learner& learner,
                                   const ImageTable& table, double floor) {
  DiscardResult r;
  r.accuracies = per_class_accuracy(learner, table, store.val_banks());
  for (const auto& [label, acc] : r.accuracies) {
    if (acc < floor) {
      r.removed.push_back(label);
      r.removed_samples += store.erase(label);
      learner.deactivate(label);
    }
  }
  if (!r.removed.empty()) {
    spdlog::info("discarded {} weak label(s), {} samples", r.removed.size(), r.removed_samples);
  }
  return r;
}

}  // namespace ilap
