#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ilap/data.hpp"

namespace ilap {

enum class ScheduleOrder {
  shuffled,   // seeded uniform permutation of the repeat multiset
  clustered,  // every class's repeats back to back, class order shuffled
};

ScheduleOrder parse_schedule_order(const std::string& s);
std::string to_string(ScheduleOrder order);

struct StreamConfig {
  std::vector<ClassId> class_ids;
  int repeats_per_class = 1;
  int exposure_size = 200;
  /// Share of each exposure routed to e_train; the rest is e_val.
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
  ScheduleOrder order = ScheduleOrder::shuffled;
  /// When a class has fewer than exposure_size * repeats samples, later
  /// exposures re-draw from the full class pool instead of failing.
  bool allow_reuse = true;

  int train_count() const;
  int val_count() const { return exposure_size - train_count(); }
};

/// The learner-facing view of an exposure. It deliberately carries no class
/// information: only sample ids into the (label-free) training image table.
struct Exposure {
  int index = 0;
  std::vector<SampleId> e_train;
  std::vector<SampleId> e_val;

  std::vector<SampleId> all_ids() const;
};

/// Harness-side bookkeeping for one exposure.
struct ScheduledExposure {
  Exposure exposure;
  ClassId hidden_class = -1;
};

/// Ordered ground-truth class ids, one per exposure. Throws SchedulingError
/// for empty or invalid configs.
std::vector<ClassId> generate_schedule(const StreamConfig& cfg);

/// Materializes exposures of a schedule. Every slot is a pure function of
/// (config, schedule, slot), so slots can be served in any order and again
/// after a resume.
class ExposureSampler {
 public:
  /// Validates that each scheduled class has enough samples; throws
  /// SchedulingError otherwise (or when reuse is needed but disallowed).
  ExposureSampler(const LabeledImageSet& train, std::vector<ClassId> schedule, StreamConfig cfg);

  std::size_t size() const { return schedule_.size(); }
  const std::vector<ClassId>& schedule() const { return schedule_; }
  const StreamConfig& config() const { return cfg_; }

  ScheduledExposure materialize(std::size_t index) const;

 private:
  std::vector<ClassId> schedule_;
  StreamConfig cfg_;
  std::vector<std::vector<SampleId>> pools_;  // per class, seeded permutation
  std::vector<int> occurrence_;               // per slot: how many earlier slots share its class
};

}  // namespace ilap
