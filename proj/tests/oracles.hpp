#pragma once

// Brute-force reference implementations used to check the library.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "ilap/metrics.hpp"

namespace oracle {

/// P(pos > neg) + 0.5 P(pos == neg) over every pair.
inline double pairwise_auroc(const ilap::ScoredStream& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.is_novel[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.is_novel[j]) continue;
      pairs += 1.0;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      else if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct Point {
  double threshold;
  std::size_t tp, fp, pos, neg;
};

/// Counts at every threshold "score >= t", t over the distinct scores, from
/// the highest threshold down. Every point is recounted from scratch.
inline std::vector<Point> threshold_points(const ilap::ScoredStream& s) {
  std::set<double, std::greater<>> thresholds(s.scores.begin(), s.scores.end());
  std::vector<Point> out;
  for (double t : thresholds) {
    Point p{t, 0, 0, 0, 0};
    for (std::size_t i = 0; i < s.size(); ++i) {
      (s.is_novel[i] ? p.pos : p.neg)++;
      if (s.scores[i] >= t) (s.is_novel[i] ? p.tp : p.fp)++;
    }
    out.push_back(p);
  }
  return out;
}

/// Smallest FPR over all thresholds whose TPR is at least 0.95.
inline double exhaustive_fpr95(const ilap::ScoredStream& s) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : threshold_points(s)) {
    if (static_cast<double>(p.tp) >= 0.95 * static_cast<double>(p.pos)) {
      best = std::min(best, static_cast<double>(p.fp) / static_cast<double>(p.neg));
    }
  }
  return best;
}

/// Sum over thresholds of (recall increase) x precision.
inline double exhaustive_aupr(const ilap::ScoredStream& s) {
  double area = 0.0;
  std::size_t prev_tp = 0;
  for (const auto& p : threshold_points(s)) {
    const double precision = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
    area += static_cast<double>(p.tp - prev_tp) / static_cast<double>(p.pos) * precision;
    prev_tp = p.tp;
  }
  return area;
}

inline double f1_at(std::span<const double> in, std::span<const double> out, double t) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (double x : out) (x > t ? tp : fn)++;
  for (double x : in) fp += x > t;
  return tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

/// Best F1 over a dense grid of thresholds spanning all scores.
inline double best_f1_dense(std::span<const double> in, std::span<const double> out) {
  std::vector<double> all(in.begin(), in.end());
  all.insert(all.end(), out.begin(), out.end());
  const double lo = *std::min_element(all.begin(), all.end()) - 1.0;
  const double hi = *std::max_element(all.begin(), all.end()) + 1.0;
  double best = 0.0;
  const int steps = 20000;
  for (int k = 0; k <= steps; ++k) best = std::max(best, f1_at(in, out, lo + (hi - lo) * k / steps));
  for (double x : all) best = std::max(best, f1_at(in, out, x));
  return best;
}

/// Random stream with at least one novel and one repeated exposure; scores
/// drawn from a small grid so ties are common.
inline ilap::ScoredStream random_stream(std::mt19937_64& rng, std::size_t max_n) {
  std::uniform_int_distribution<std::size_t> size(2, max_n);
  std::uniform_int_distribution<int> level(0, 12);
  std::bernoulli_distribution coin(0.5);
  ilap::ScoredStream s;
  const std::size_t n = size(rng);
  for (std::size_t i = 0; i < n; ++i) s.add(level(rng) / 12.0, coin(rng));
  s.is_novel[0] = true;
  s.is_novel[1] = false;
  return s;
}

}  // namespace oracle
