#include "ilap/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ilap/errors.hpp"
#include "ilap/nn/optim.hpp"

namespace ilap {

namespace {

constexpr std::size_t kChunk = 128;

void require_labels(const Learner& learner) {
  if (learner.num_active() == 0) throw InvariantError("scoring needs at least one learned label");
}

double sum_max_prob(const Tensor& probs) {
  double s = 0.0;
  for (int i = 0; i < probs.batch(); ++i) {
    const auto r = probs.row(i);
    s += *std::max_element(r.begin(), r.end());
  }
  return s;
}

}  // namespace

ScorerKind parse_scorer_kind(const std::string& s) {
  if (s == "msp") return ScorerKind::msp;
  if (s == "odin") return ScorerKind::odin;
  if (s == "feature_distance") return ScorerKind::feature_distance;
  throw ConfigError("unknown scorer '" + s + "'");
}

std::string to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::msp: return "msp";
    case ScorerKind::odin: return "odin";
    case ScorerKind::feature_distance: return "feature_distance";
  }
  return "?";
}

void ScorerConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("odin temperature must be positive");
  if (!(epsilon >= 0.0)) throw ConfigError("odin epsilon must be non-negative");
}

double msp_score(const Learner& learner, const ImageTable& table, std::span<const SampleId> ids) {
  require_labels(learner);
  if (ids.empty()) throw InvariantError("cannot score an empty exposure");
  double total = 0.0;
  for (std::size_t at = 0; at < ids.size(); at += kChunk) {
    const auto part = ids.subspan(at, std::min(kChunk, ids.size() - at));
    total += sum_max_prob(nn::masked_softmax(learner.logits(table, part), learner.active_mask()));
  }
  return 1.0 - total / static_cast<double>(ids.size());
}

double odin_score(const Learner& learner, const ImageTable& table, std::span<const SampleId> ids,
                  double temperature, double epsilon) {
  require_labels(learner);
  if (!(temperature > 0.0)) throw ConfigError("odin temperature must be positive");
  if (!(epsilon >= 0.0)) throw ConfigError("odin epsilon must be non-negative");
  if (ids.empty()) throw InvariantError("cannot score an empty exposure");
  const auto active = learner.active_mask();
  const auto T = static_cast<float>(temperature);
  const auto eps = static_cast<float>(epsilon);

  double total = 0.0;
  for (std::size_t at = 0; at < ids.size(); at += kChunk) {
    const auto part = ids.subspan(at, std::min(kChunk, ids.size() - at));
    Tensor x = table.gather(part);
    if (eps > 0.0f) {
      // d/dz log softmax_T(z)[m] = (onehot(m) - softmax_T(z)) / T
      const Tensor g = learner.input_gradient(x, [&](const Tensor& z) {
        Tensor p = nn::masked_softmax(z, active, T);
        for (int i = 0; i < p.batch(); ++i) {
          auto r = p.row(i);
          const auto m = std::max_element(r.begin(), r.end()) - r.begin();
          for (auto& v : r) v = -v / T;
          r[m] += 1.0f / T;
        }
        return p;
      });
      for (std::size_t k = 0; k < x.size(); ++k) {
        const float s = g[k] > 0.0f ? 1.0f : (g[k] < 0.0f ? -1.0f : 0.0f);
        x[k] += eps * s;
      }
    }
    total += sum_max_prob(nn::masked_softmax(learner.logits(x), active, T));
  }
  return 1.0 - total / static_cast<double>(ids.size());
}

const std::vector<double>& FeatureMeans::mean(Label label) const {
  auto it = means_.find(label);
  if (it == means_.end()) throw InvariantError("no feature mean for label " + std::to_string(label));
  return it->second.mean;
}

void feature_mean_update(FeatureMeans& means, const Learner& learner, const ImageTable& table,
                         std::span<const SampleId> ids, Label label) {
  if (ids.empty()) return;
  const Tensor f = learner.features(table, ids);
  FeatureMeans::Entry e;
  if (means.contains(label)) e = means.entries().at(label);
  if (e.mean.empty()) e.mean.assign(f.row_size(), 0.0);
  if (e.mean.size() != f.row_size()) throw InvariantError("feature width changed");
  for (int i = 0; i < f.batch(); ++i) {
    const auto r = f.row(i);
    ++e.count;
    for (std::size_t k = 0; k < e.mean.size(); ++k) {
      e.mean[k] += (r[k] - e.mean[k]) / static_cast<double>(e.count);
    }
  }
  means.set(label, std::move(e));
}

DistanceScore feature_distance_score(const Learner& learner, const ImageTable& table,
                                     std::span<const SampleId> ids, const FeatureMeans& means) {
  if (means.empty()) throw InvariantError("no class means to compare against");
  if (ids.empty()) throw InvariantError("cannot score an empty exposure");
  const Tensor f = learner.features(table, ids);
  std::vector<double> centre(f.row_size(), 0.0);
  for (int i = 0; i < f.batch(); ++i) {
    const auto r = f.row(i);
    for (std::size_t k = 0; k < centre.size(); ++k) centre[k] += r[k];
  }
  for (auto& v : centre) v /= static_cast<double>(f.batch());

  DistanceScore best{std::numeric_limits<double>::infinity(), -1};
  for (const auto& [label, e] : means.entries()) {
    if (e.mean.size() != centre.size()) throw InvariantError("feature width changed");
    double s = 0.0;
    for (std::size_t k = 0; k < centre.size(); ++k) s += (centre[k] - e.mean[k]) * (centre[k] - e.mean[k]);
    const double d = std::sqrt(s);
    if (d < best.score) best = {d, label};
  }
  return best;
}

double novelty_f1(std::span<const double> in_scores, std::span<const double> out_scores, double t) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (double s : out_scores) (s > t ? tp : fn)++;
  for (double s : in_scores) fp += s > t;
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double fit_distance_threshold(std::span<const double> in_scores, std::span<const double> out_scores) {
  if (in_scores.empty() || out_scores.empty()) {
    throw InvariantError("threshold fitting needs both repeated and novel scores");
  }
  std::set<double> unique(in_scores.begin(), in_scores.end());
  unique.insert(out_scores.begin(), out_scores.end());
  std::vector<double> candidates{*unique.begin() - 1.0};
  for (auto it = unique.begin(); std::next(it) != unique.end(); ++it) {
    candidates.push_back(0.5 * (*it + *std::next(it)));
  }
  double best_t = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {  // ascending, so strict > keeps the lowest on ties
    const double f1 = novelty_f1(in_scores, out_scores, t);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

ExposureResult supervised_oracle_step(IncrementalState& state, const ImageTable& table,
                                      const Exposure& exposure, std::optional<Label> known,
                                      const DetectorConfig& cfg, std::uint64_t seed) {
  if (known && !state.learner.is_active(*known)) known.reset();
  return apply_update(state, table, exposure, known, cfg, seed);
}

}  // namespace ilap
