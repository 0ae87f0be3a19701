#include "ilap/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ilap/errors.hpp"

namespace ilap {

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts check_stream(const ScoredStream& s, bool need_negative) {
  if (s.scores.size() != s.is_novel.size()) {
    throw InvariantError("scores and novelty flags differ in length");
  }
  Counts c;
  for (bool n : s.is_novel) (n ? c.pos : c.neg)++;
  if (c.pos == 0) throw InvariantError("metric needs at least one novel exposure");
  if (need_negative && c.neg == 0) throw InvariantError("metric needs at least one repeated exposure");
  return c;
}

/// Cumulative (tp, fp) at each distinct score, highest score first.
struct OperatingPoint {
  std::size_t tp;
  std::size_t fp;
};

std::vector<OperatingPoint> sweep(const ScoredStream& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  std::vector<OperatingPoint> out;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (s.is_novel[order[k]] ? tp : fp)++;
    const bool last_of_tie =
        k + 1 == order.size() || s.scores[order[k + 1]] != s.scores[order[k]];
    if (last_of_tie) out.push_back({tp, fp});
  }
  return out;
}

}  // namespace

double fpr_at_95_tpr(const ScoredStream& s) {
  const Counts c = check_stream(s, true);
  for (const auto& p : sweep(s)) {
    if (static_cast<double>(p.tp) >= 0.95 * static_cast<double>(c.pos)) {
      return static_cast<double>(p.fp) / static_cast<double>(c.neg);
    }
  }
  return 1.0;  // unreachable: the last point has tp == pos
}

double auroc(const ScoredStream& s) {
  const Counts c = check_stream(s, true);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  // Mann-Whitney U from midranks
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (s.is_novel[order[k]]) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(c.pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(c.neg));
}

double aupr(const ScoredStream& s) {
  const Counts c = check_stream(s, false);
  double area = 0.0;
  std::size_t prev_tp = 0;
  for (const auto& p : sweep(s)) {
    const double precision = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
    area += static_cast<double>(p.tp - prev_tp) / static_cast<double>(c.pos) * precision;
    prev_tp = p.tp;
  }
  return area;
}

void LabelMap::set(Label label, ClassId cls) { forward_[label] = cls; }

ClassId LabelMap::at(Label label) const {
  auto it = forward_.find(label);
  if (it == forward_.end()) throw InvariantError("label " + std::to_string(label) + " is not mapped");
  return it->second;
}

std::set<Label> LabelMap::inverse(ClassId cls) const {
  std::set<Label> out;
  for (const auto& [label, c] : forward_) {
    if (c == cls) out.insert(label);
  }
  return out;
}

bool LabelMap::injective() const {
  std::set<ClassId> seen;
  for (const auto& [label, c] : forward_) {
    if (!seen.insert(c).second) return false;
  }
  return true;
}

LabelMap build_label_map(std::span<const Assignment> assignments, std::span<const Label> active) {
  const std::set<Label> live(active.begin(), active.end());
  struct Tally {
    std::map<ClassId, std::size_t> votes;
    std::map<ClassId, std::size_t> first_seen;
  };
  std::map<Label, Tally> tallies;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto& a = assignments[i];
    if (!live.count(a.label)) continue;
    auto& t = tallies[a.label];
    t.votes[a.hidden_class]++;
    t.first_seen.emplace(a.hidden_class, i);
  }
  LabelMap map;
  for (const auto& [label, t] : tallies) {
    ClassId best = -1;
    std::size_t best_votes = 0, best_first = 0;
    for (const auto& [cls, v] : t.votes) {
      const std::size_t first = t.first_seen.at(cls);
      if (v > best_votes || (v == best_votes && first < best_first)) {
        best = cls;
        best_votes = v;
        best_first = first;
      }
    }
    map.set(label, best);
  }
  return map;
}

Confusion confusion_counts(std::span<const Label> predictions, std::span<const ClassId> truth) {
  if (predictions.size() != truth.size()) {
    throw InvariantError("predictions and ground truth differ in length");
  }
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) c[truth[i]][predictions[i]]++;
  return c;
}

double mapped_accuracy(const Confusion& confusion, const LabelMap& map) {
  double score = 0.0;
  std::size_t total = 0;
  for (const auto& [cls, row] : confusion) {
    const auto inv = map.inverse(cls);
    for (const auto& [label, n] : row) {
      total += n;
      if (inv.count(label)) score += static_cast<double>(n) / static_cast<double>(inv.size());
    }
  }
  return total == 0 ? 0.0 : score / static_cast<double>(total);
}

double mapped_accuracy(std::span<const Label> predictions, std::span<const ClassId> truth,
                       const LabelMap& map) {
  return mapped_accuracy(confusion_counts(predictions, truth), map);
}

double mapped_accuracy(const Learner& learner, const LabelMap& map, const LabeledImageSet& test) {
  std::vector<SampleId> ids(test.size());
  std::iota(ids.begin(), ids.end(), SampleId{0});
  const auto pred = learner.predict(test.images, ids);
  return mapped_accuracy(pred, test.labels, map);
}

std::size_t unique_classes_learned(const LabelMap& map) {
  std::set<ClassId> classes;
  for (const auto& [label, cls] : map.forward()) classes.insert(cls);
  return classes.size();
}

}  // namespace ilap
