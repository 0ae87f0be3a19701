#include <algorithm>
#include <type_traits>

#include "doctest.h"
#include "fixtures.hpp"

#include "ilap/detector.hpp"
#include "ilap/errors.hpp"

using namespace ilap;

namespace {

struct StreamRun {
  IncrementalState state;
  std::vector<ExposureResult> results;
};

StreamRun run_stream(const Dataset& d, std::vector<ClassId> order, const DetectorConfig& cfg,
                     std::uint64_t seed = 0) {
  StreamRun r{fixture::fresh_state(d, seed), {}};
  const auto s = fixture::sampler(d, std::move(order), seed);
  for (std::size_t i = 0; i < s.size(); ++i) {
    r.results.push_back(process_exposure(r.state, d.train.images, s.materialize(i).exposure, cfg,
                                         derive_seed(seed, {i})));
  }
  return r;
}

double max_delta(const DetectionOutcome& o) {
  return o.deltas.empty() ? 0.0 : *std::max_element(o.deltas.begin(), o.deltas.end());
}

}  // namespace

TEST_CASE("deltas are clamped fractional drops") {
  const std::vector<double> pre{1.0, 0.5, 0.0, 0.8, 0.4};
  const std::vector<double> post{0.5, 0.75, 0.0, 0.0, 0.1};
  const auto d = compute_deltas(pre, post);
  REQUIRE(d.size() == 5);
  CHECK(d[0] == doctest::Approx(0.5));
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 0.0);
  CHECK(d[3] == doctest::Approx(1.0));
  CHECK(d[4] == doctest::Approx(0.75));
  CHECK(compute_deltas(std::vector<double>{}, std::vector<double>{}).empty());
  CHECK_THROWS_AS(compute_deltas(std::vector<double>{1.0}, std::vector<double>{}), InvariantError);
}

TEST_CASE("decide thresholds the largest drop") {
  auto decide_v = [](std::vector<double> d, double t) { return decide(d, t); };
  CHECK(decide_v({}, 0.6).novel);
  CHECK(decide_v({0.2, 0.6}, 0.6).novel);  // strict comparison
  const auto r = decide_v({0.2, 0.7, 0.7, 0.1}, 0.6);
  CHECK_FALSE(r.novel);
  CHECK(r.index == 1);  // lowest index among ties
  CHECK(decide_v({0.9}, 1.5).novel);
  CHECK_FALSE(decide_v({1e-6}, 1e-9).novel);
}

TEST_CASE("novelty score is one minus the largest drop") {
  DetectionOutcome o;
  CHECK(novelty_score(o) == 1.0);
  o.deltas = {0.3, 0.8, 0.1};
  CHECK(novelty_score(o) == doctest::Approx(0.2));
  o.deltas = {0.0};
  CHECK(novelty_score(o) == 1.0);
}

TEST_CASE("detector config validation") {
  DetectorConfig c;
  CHECK_NOTHROW(c.validate());
  c.theta = 0.0;
  CHECK_NOTHROW(c.validate());
  c.theta = 1.5;
  CHECK_NOTHROW(c.validate());
  c.theta = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.theta = 0.5;
  c.lambda = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda = 0.5;
  c.discard_floor = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("exposures carry no class identity") {
  // binds only if Exposure has exactly these three members
  const auto [index, e_train, e_val] = fixture::sampler(fixture::blobs(2, 300, 1), {1}).materialize(0).exposure;
  static_assert(std::is_same_v<std::remove_cvref_t<decltype(index)>, int>);
  CHECK(e_train.size() == 160);
  CHECK(e_val.size() == 40);
}

TEST_CASE("detection needs banks once labels exist") {
  const auto d = fixture::blobs(2, 400, 5);
  auto st = fixture::fresh_state(d);
  st.learner.add_label();
  const auto e = fixture::sampler(d, {0}).materialize(0).exposure;
  CHECK_THROWS_AS(process_exposure(st, d.train.images, e, fixture::blob_detector(), 0), InvariantError);
}

TEST_CASE("first exposure bypasses detection") {
  const auto d = fixture::blobs(2, 400, 5);
  auto st = fixture::fresh_state(d);
  const auto e = fixture::sampler(d, {1}).materialize(0).exposure;
  const auto r = process_exposure(st, d.train.images, e, fixture::blob_detector(), 0);
  CHECK(r.outcome.bypassed);
  CHECK(r.outcome.novel);
  CHECK(r.assigned == 0);
  CHECK(st.learner.num_active() == 1);
  CHECK(st.store.bank(0).train.size() == 160);
  CHECK(st.store.bank(0).val.size() == 40);
}

TEST_CASE("detection training leaves its inputs untouched") {
  const auto d = fixture::blobs(2, 600, 5);
  auto st = fixture::fresh_state(d);
  const auto s = fixture::sampler(d, {0, 1});
  process_exposure(st, d.train.images, s.materialize(0).exposure, fixture::blob_detector(), 0);
  const auto hash = st.learner.parameter_hash();
  const auto bank = st.store.bank(0).train;
  const auto t = detection_train(st.learner, st.store, d.train.images, s.materialize(1).exposure,
                                 fixture::blob_detector(), 1);
  CHECK(st.learner.parameter_hash() == hash);
  CHECK(st.learner.num_labels() == 1);
  CHECK(st.store.bank(0).train == bank);
  CHECK(t.new_label == 1);
  CHECK(t.trained.num_labels() == 2);
  CHECK(t.pre_acc.size() == 1);
  CHECK(t.post_acc.size() == 1);
}

TEST_CASE("a repeated class is merged and a new class gets a label") {
  const auto d = fixture::blobs(3, 600, 5);
  const auto cfg = fixture::blob_detector();

  const auto same = run_stream(d, {0, 0}, cfg);
  CHECK(same.state.learner.num_active() == 1);
  CHECK_FALSE(same.results[1].outcome.novel);
  CHECK(same.results[1].assigned == 0);
  CHECK(max_delta(same.results[1].outcome) >= 0.6);

  const auto other = run_stream(d, {0, 2}, cfg);
  CHECK(other.state.learner.num_active() == 2);
  CHECK(other.results[1].outcome.novel);
  CHECK(max_delta(other.results[1].outcome) <= 0.1);
}

TEST_CASE("an unreachable threshold makes every exposure novel") {
  const auto d = fixture::blobs(2, 600, 5);
  const auto r = run_stream(d, {0, 1, 0}, fixture::blob_detector(0.5, 1.01));
  int discarded = 0;
  for (const auto& x : r.results) {
    CHECK(x.outcome.novel);
    discarded += static_cast<int>(x.discard.removed.size());
  }
  CHECK(r.state.learner.num_labels() == 3);
  CHECK(r.state.learner.num_active() == 3 - discarded);
}

TEST_CASE("a zero threshold merges every exposure with a drop") {
  const auto d = fixture::blobs(2, 600, 5);
  const auto r = run_stream(d, {1, 1, 1}, fixture::blob_detector(0.5, 0.0));
  CHECK(r.state.learner.num_active() == 1);
  for (std::size_t i = 1; i < r.results.size(); ++i) {
    CHECK_FALSE(r.results[i].outcome.novel);
    CHECK(max_delta(r.results[i].outcome) > 0.0);
  }
}

TEST_CASE("the store only holds active labels and stays within caps") {
  const auto d = fixture::blobs(3, 600, 5);
  const auto r = run_stream(d, {0, 1, 0, 2, 1}, fixture::blob_detector(), 7);
  const auto active = r.state.learner.active_labels();
  CHECK(r.state.store.labels() == active);
  for (const auto& [label, bank] : r.state.store.banks()) {
    CHECK(bank.train.size() <= 160);
    CHECK(bank.val.size() <= 40);
  }
  for (const auto& x : r.results) {
    CHECK(x.outcome.deltas.size() == x.outcome.labels.size());
    CHECK(x.outcome.pre_acc.size() == x.outcome.labels.size());
    for (double v : x.outcome.deltas) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
