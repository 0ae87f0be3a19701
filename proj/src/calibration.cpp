#include "ilap/calibration.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ilap/errors.hpp"
#include "ilap/random.hpp"

namespace ilap {

namespace {

enum SeedTag : std::uint64_t { kClasses = 11, kPool = 12, kLearner = 13, kBase = 14, kProbe = 15 };

Exposure make_exposure(std::span<const SampleId> ids, std::size_t n_train) {
  Exposure e;
  e.e_train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  e.e_val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return e;
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

}  // namespace

void SweepConfig::validate() const {
  if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0 && l < 1.0)) throw ConfigError("lambda grid values must lie in [0, 1)");
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (exposure_size < 2) throw ConfigError("exposure_size must be >= 2");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
  if (base_classes < 0) throw ConfigError("base_classes must be >= 0");
}

SweepResult run_imbalance_sweep(const LabeledImageSet& train, const SweepConfig& cfg) {
  cfg.validate();
  const int k = train.num_classes;
  if (k < 3) throw IngestionError("calibration needs a dataset with at least 3 classes");
  const int n_base = cfg.base_classes == 0 ? k - 1 : cfg.base_classes;
  if (n_base < 2 || n_base >= k) {
    throw ConfigError("base_classes must leave at least one held-out class and be >= 2");
  }
  const auto by_class = train.ids_by_class();
  const std::size_t n_train = static_cast<std::size_t>(
      std::lround(static_cast<double>(cfg.exposure_size) * cfg.split_ratio));
  if (n_train == 0 || n_train >= cfg.exposure_size) {
    throw ConfigError("split leaves an empty train or val part");
  }

  const std::size_t g = cfg.lambda_grid.size();
  SweepResult out;
  out.lambda_grid = cfg.lambda_grid;
  out.drop_repeated.assign(g, 0.0);
  out.drop_nonrepeated.assign(g, 0.0);
  out.drop_bystander.assign(g, 0.0);
  out.trials = cfg.trials;

  for (int t = 0; t < cfg.trials; ++t) {
    const auto tseed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(t)});
    RandomEngine rng(derive_seed(tseed, {kClasses}));
    std::vector<ClassId> classes(static_cast<std::size_t>(k));
    std::iota(classes.begin(), classes.end(), ClassId{0});
    std::shuffle(classes.begin(), classes.end(), rng);
    const std::vector<ClassId> base(classes.begin(), classes.begin() + n_base);
    const ClassId novel = classes[static_cast<std::size_t>(n_base)];
    const std::size_t repeated_pos = std::uniform_int_distribution<std::size_t>(0, base.size() - 1)(rng);
    const ClassId repeated = base[repeated_pos];

    // Disjoint draws: one exposure per base class, a second for the repeated class.
    std::map<ClassId, std::vector<SampleId>> pools;
    RandomEngine pool_rng(derive_seed(tseed, {kPool}));
    for (ClassId c : classes) {
      auto ids = by_class.at(static_cast<std::size_t>(c));
      std::shuffle(ids.begin(), ids.end(), pool_rng);
      const std::size_t need = cfg.exposure_size * (c == repeated ? 2 : 1);
      if (ids.size() < need) {
        throw IngestionError("class " + std::to_string(c) + " has " + std::to_string(ids.size()) +
                             " samples; calibration needs " + std::to_string(need));
      }
      pools[c] = std::move(ids);
    }

    LearnerOptions lo = cfg.learner;
    lo.input = train.images.shape();
    lo.num_initial_labels = 0;
    lo.seed = derive_seed(tseed, {kLearner});
    IncrementalState state{Learner::build(lo),
                           ExemplarStore(n_train, cfg.exposure_size - n_train)};
    DetectorConfig dc;
    dc.train = cfg.train;
    dc.discard_floor = cfg.discard_floor;
    Label repeated_label = -1;
    for (std::size_t b = 0; b < base.size(); ++b) {
      const auto& pool = pools.at(base[b]);
      const Exposure e = make_exposure(std::span(pool).first(cfg.exposure_size), n_train);
      const auto r = apply_update(state, train.images, e, std::nullopt, dc,
                                  derive_seed(tseed, {kBase, b}));
      if (base[b] == repeated) repeated_label = r.assigned;
    }
    if (!state.learner.is_active(repeated_label)) {
      throw InvariantError("the repeated class was discarded while learning the base classes");
    }

    const auto& rep_pool = pools.at(repeated);
    const Exposure rep_exposure =
        make_exposure(std::span(rep_pool).subspan(cfg.exposure_size, cfg.exposure_size), n_train);
    const Exposure novel_exposure =
        make_exposure(std::span(pools.at(novel)).first(cfg.exposure_size), n_train);

    for (std::size_t li = 0; li < g; ++li) {
      dc.lambda = cfg.lambda_grid[li];
      const auto probe_seed = derive_seed(tseed, {kProbe, li});
      auto deltas_of = [&](const Exposure& e) {
        const auto d = detection_train(state.learner, state.store, train.images, e, dc, probe_seed);
        std::map<Label, double> delta;
        for (const auto& [label, pre] : d.pre_acc) {
          const double post = d.post_acc.at(label);
          delta[label] = compute_deltas(std::vector{pre}, std::vector{post}).front();
        }
        return delta;
      };
      const auto rep = deltas_of(rep_exposure);
      const auto nov = deltas_of(novel_exposure);
      std::vector<double> others, all_novel;
      for (const auto& [label, d] : rep) {
        if (label != repeated_label) others.push_back(d);
      }
      for (const auto& [label, d] : nov) all_novel.push_back(d);
      out.drop_repeated[li] += rep.at(repeated_label);
      out.drop_nonrepeated[li] += max_of(all_novel);
      out.drop_bystander[li] += max_of(others);
    }
    spdlog::info("calibration trial {}/{} done", t + 1, cfg.trials);
  }

  for (std::size_t li = 0; li < g; ++li) {
    out.drop_repeated[li] /= cfg.trials;
    out.drop_nonrepeated[li] /= cfg.trials;
    out.drop_bystander[li] /= cfg.trials;
  }
  return out;
}

Calibration select_lambda_theta(const SweepResult& sweep) {
  const std::size_t g = sweep.lambda_grid.size();
  if (g == 0 || sweep.drop_repeated.size() != g || sweep.drop_nonrepeated.size() != g) {
    throw InvariantError("sweep curves do not match the grid");
  }
  Calibration c;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g; ++i) {
    if (!std::isfinite(sweep.drop_repeated[i]) || !std::isfinite(sweep.drop_nonrepeated[i])) {
      throw InvariantError("sweep curves contain non-finite values");
    }
    const double gap = sweep.drop_repeated[i] - sweep.drop_nonrepeated[i];
    const bool better = gap > best || (gap == best && sweep.lambda_grid[i] < c.lambda);
    if (better) {
      best = gap;
      c.index = i;
      c.lambda = sweep.lambda_grid[i];
    }
  }
  c.theta = 0.5 * (sweep.drop_repeated[c.index] + sweep.drop_nonrepeated[c.index]);
  return c;
}

void to_json(nlohmann::json& j, const SweepResult& r) {
  j = nlohmann::json{{"lambda_grid", r.lambda_grid},
                     {"drop_repeated", r.drop_repeated},
                     {"drop_nonrepeated", r.drop_nonrepeated},
                     {"drop_bystander", r.drop_bystander},
                     {"trials", r.trials}};
}

void from_json(const nlohmann::json& j, SweepResult& r) {
  j.at("lambda_grid").get_to(r.lambda_grid);
  j.at("drop_repeated").get_to(r.drop_repeated);
  j.at("drop_nonrepeated").get_to(r.drop_nonrepeated);
  r.drop_bystander = j.value("drop_bystander", std::vector<double>{});
  j.at("trials").get_to(r.trials);
}

}  // namespace ilap
