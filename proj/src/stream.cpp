#include "ilap/stream.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ilap/errors.hpp"
#include "ilap/random.hpp"

namespace ilap {

ScheduleOrder parse_schedule_order(const std::string& s) {
  if (s == "shuffled") return ScheduleOrder::shuffled;
  if (s == "clustered") return ScheduleOrder::clustered;
  throw ConfigError("unknown schedule order '" + s + "'");
}

std::string to_string(ScheduleOrder order) {
  return order == ScheduleOrder::shuffled ? "shuffled" : "clustered";
}

int StreamConfig::train_count() const {
  return static_cast<int>(std::lround(exposure_size * split_ratio));
}

std::vector<SampleId> Exposure::all_ids() const {
  std::vector<SampleId> ids = e_train;
  ids.insert(ids.end(), e_val.begin(), e_val.end());
  return ids;
}

std::vector<ClassId> generate_schedule(const StreamConfig& cfg) {
  if (cfg.class_ids.empty()) throw SchedulingError("stream needs at least one class");
  if (cfg.repeats_per_class < 1) throw SchedulingError("repeats_per_class must be >= 1");
  if (std::set<ClassId>(cfg.class_ids.begin(), cfg.class_ids.end()).size() != cfg.class_ids.size()) {
    throw SchedulingError("class_ids contains duplicates");
  }
  RandomEngine rng(derive_seed(cfg.seed, {0x5c4ed01e}));
  std::vector<ClassId> schedule;
  if (cfg.order == ScheduleOrder::shuffled) {
    for (ClassId c : cfg.class_ids) schedule.insert(schedule.end(), cfg.repeats_per_class, c);
    std::shuffle(schedule.begin(), schedule.end(), rng);
  } else {
    auto order = cfg.class_ids;
    std::shuffle(order.begin(), order.end(), rng);
    for (ClassId c : order) schedule.insert(schedule.end(), cfg.repeats_per_class, c);
  }
  return schedule;
}

ExposureSampler::ExposureSampler(const LabeledImageSet& train, std::vector<ClassId> schedule,
                                 StreamConfig cfg)
    : schedule_(std::move(schedule)), cfg_(std::move(cfg)) {
  if (cfg_.exposure_size < 2) throw SchedulingError("exposure_size must be >= 2");
  if (!(cfg_.split_ratio > 0.0 && cfg_.split_ratio < 1.0)) {
    throw SchedulingError("split ratio must lie in (0, 1)");
  }
  if (cfg_.train_count() < 1 || cfg_.val_count() < 1) {
    throw SchedulingError("exposure too small to split into train and val parts");
  }
  auto by_class = train.ids_by_class();
  std::map<ClassId, int> needed;
  occurrence_.reserve(schedule_.size());
  for (ClassId c : schedule_) {
    if (c < 0 || c >= train.num_classes) {
      throw SchedulingError("scheduled class " + std::to_string(c) + " not in dataset");
    }
    occurrence_.push_back(needed[c]++);
  }
  pools_.resize(train.num_classes);
  for (const auto& [c, count] : needed) {
    auto& pool = by_class[c];
    const auto have = pool.size();
    if (have < static_cast<std::size_t>(cfg_.exposure_size)) {
      throw SchedulingError("class " + std::to_string(c) + " has " + std::to_string(have) +
                            " samples, fewer than one exposure");
    }
    if (have < static_cast<std::size_t>(cfg_.exposure_size) * count) {
      if (!cfg_.allow_reuse) {
        throw SchedulingError("class " + std::to_string(c) + " has " + std::to_string(have) +
                              " samples but the schedule needs " +
                              std::to_string(cfg_.exposure_size * count));
      }
      spdlog::warn("class {} has {} samples for {} exposures of {}; repeats will reuse images", c,
                   have, count, cfg_.exposure_size);
    }
    RandomEngine rng(derive_seed(cfg_.seed, {0xc1a55, static_cast<std::uint64_t>(c)}));
    std::shuffle(pool.begin(), pool.end(), rng);
    pools_[c] = std::move(pool);
  }
}

ScheduledExposure ExposureSampler::materialize(std::size_t index) const {
  if (index >= schedule_.size()) {
    throw SchedulingError("exposure index " + std::to_string(index) + " beyond schedule");
  }
  const ClassId c = schedule_[index];
  const auto& pool = pools_[c];
  const auto size = static_cast<std::size_t>(cfg_.exposure_size);
  const auto occ = static_cast<std::size_t>(occurrence_[index]);

  std::vector<SampleId> ids;
  if ((occ + 1) * size <= pool.size()) {
    ids.assign(pool.begin() + occ * size, pool.begin() + (occ + 1) * size);
  } else {
    // Fresh draw from the whole class pool; distinct within the exposure.
    auto redraw = pool;
    RandomEngine rng(derive_seed(cfg_.seed, {0x2e05e, static_cast<std::uint64_t>(c), occ}));
    std::shuffle(redraw.begin(), redraw.end(), rng);
    ids.assign(redraw.begin(), redraw.begin() + size);
  }

  ScheduledExposure out;
  out.hidden_class = c;
  out.exposure.index = static_cast<int>(index);
  const auto n_train = static_cast<std::size_t>(cfg_.train_count());
  out.exposure.e_train.assign(ids.begin(), ids.begin() + n_train);
  out.exposure.e_val.assign(ids.begin() + n_train, ids.end());
  return out;
}

}  // namespace ilap
