#include <sstream>

#include "doctest.h"

#include "ilap/config.hpp"
#include "ilap/errors.hpp"

using namespace ilap;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

}  // namespace

TEST_CASE("config parses sections and keys") {
  const auto c = parse(R"ini(
[run]
method = ilap_noci
seeds = 3, 4,5
[blobs]
sigma = 0.125
[stream]
classes = 0,2
order = clustered
[train]
lr_head = 0.0001
[detector]
theta = 0.35
)ini");
  CHECK(c.method == Method::ilap_noci);
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4, 5});
  CHECK(c.blobs.sigma == 0.125);
  CHECK(c.stream.class_ids == std::vector<ClassId>{0, 2});
  CHECK(c.stream.order == ScheduleOrder::clustered);
  CHECK(c.train.lr_head == doctest::Approx(1e-4));
  CHECK(c.detector().theta == 0.35);
  CHECK(c.detector().lambda == 0.0);
}

TEST_CASE("method defaults for lambda and theta") {
  RunConfig c;
  c.method = Method::ilap_ci;
  CHECK(c.detector().lambda == 0.5);
  CHECK(c.detector().theta == 0.6);
  c.method = Method::ilap_noci;
  CHECK(c.detector().lambda == 0.0);
  CHECK(c.detector().theta == 0.4);
  c.lambda = 0.25;
  CHECK(c.detector().lambda == 0.25);
}

TEST_CASE("config round-trips through ini") {
  RunConfig c;
  c.method = Method::feature_distance;
  c.seeds = {7, 9};
  c.dataset = "mnist";
  c.stream.class_ids = {1, 4};
  c.stream.repeats_per_class = 4;
  c.learner.arch = Architecture::small_cnn;
  c.train.lr_head = 3e-4f;
  c.theta = 0.45;
  c.distance_threshold = 2.5;
  c.sweep.lambda_grid = {0.0, 0.2};
  const auto back = parse(to_ini(c));
  CHECK(to_ini(back) == to_ini(c));
  CHECK(back.method == c.method);
  CHECK(back.seeds == c.seeds);
  CHECK(back.stream.class_ids == c.stream.class_ids);
  CHECK(back.learner.arch == Architecture::small_cnn);
  CHECK(back.theta == c.theta);
  CHECK_FALSE(back.lambda.has_value());
  CHECK(back.distance_threshold == 2.5);
  CHECK(back.sweep.lambda_grid == c.sweep.lambda_grid);
}

TEST_CASE("overrides and errors") {
  RunConfig c;
  apply_override(c, "stream.repeats_per_class=5");
  apply_override(c, "detector.lambda = 0.3");
  apply_override(c, "run.checkpoint=off");
  CHECK(c.stream.repeats_per_class == 5);
  CHECK(c.lambda == 0.3);
  CHECK_FALSE(c.checkpoint);
  CHECK_THROWS_AS(apply_override(c, "stream.bogus=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "no equals sign"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.epochs=many"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "run.method=magic"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nseeds =\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse("[mystery]\nkey = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[stream]\nsplit_ratio = 1.5\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse("[detector]\ntheta = 0\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse("[detector]\ntheta = 1.2\n").validate(), ConfigError);
  CHECK_NOTHROW(parse("[detector]\ntheta = 0.5\n").validate());
}
