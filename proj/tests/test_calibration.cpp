#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"

#include "ilap/calibration.hpp"
#include "ilap/errors.hpp"

using namespace ilap;

TEST_CASE("lambda and theta selection") {
  SweepResult s;
  s.lambda_grid = {0.0, 0.5};
  s.drop_repeated = {0.5, 0.8};
  s.drop_nonrepeated = {0.1, 0.1};
  auto c = select_lambda_theta(s);
  CHECK(c.lambda == 0.5);
  CHECK(c.index == 1);
  CHECK(c.theta == doctest::Approx(0.45));

  s.lambda_grid = {0.0, 0.25, 0.5, 0.75};
  s.drop_repeated = {0.3, 0.6, 0.9, 0.95};
  s.drop_nonrepeated = {0.0, 0.1, 0.2, 0.6};
  c = select_lambda_theta(s);
  CHECK(c.lambda == 0.5);
  CHECK(c.theta == doctest::Approx(0.55));

  // equal gaps prefer the smaller lambda
  s.drop_repeated = {0.5, 0.5, 0.5, 0.5};
  s.drop_nonrepeated = {0.1, 0.1, 0.1, 0.1};
  CHECK(select_lambda_theta(s).lambda == 0.0);

  s.drop_repeated.pop_back();
  CHECK_THROWS_AS(select_lambda_theta(s), InvariantError);
  s.drop_repeated = {0.5, NAN, 0.5, 0.5};
  CHECK_THROWS_AS(select_lambda_theta(s), InvariantError);
}

TEST_CASE("sweep results round-trip through json") {
  SweepResult s;
  s.lambda_grid = {0.0, 0.3};
  s.drop_repeated = {0.25, 0.875};
  s.drop_nonrepeated = {0.0, 0.125};
  s.drop_bystander = {0.5, 0.0625};
  s.trials = 4;
  const nlohmann::json j = s;
  const auto back = j.get<SweepResult>();
  CHECK(back.lambda_grid == s.lambda_grid);
  CHECK(back.drop_repeated == s.drop_repeated);
  CHECK(back.drop_nonrepeated == s.drop_nonrepeated);
  CHECK(back.drop_bystander == s.drop_bystander);
  CHECK(back.trials == 4);
}

TEST_CASE("sweep config validation") {
  SweepConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda_grid = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda_grid = {1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda_grid = {0.5};
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("a small sweep yields bounded curves on the grid") {
  const auto d = fixture::blobs(3, 600, 5);
  SweepConfig c;
  c.lambda_grid = {0.0, 0.5};
  c.trials = 1;
  c.train = fixture::blob_training();
  const auto r = run_imbalance_sweep(d.train, c);
  REQUIRE(r.lambda_grid == c.lambda_grid);
  REQUIRE(r.drop_repeated.size() == 2);
  REQUIRE(r.drop_nonrepeated.size() == 2);
  REQUIRE(r.drop_bystander.size() == 2);
  CHECK(r.trials == 1);
  for (const auto* curve : {&r.drop_repeated, &r.drop_nonrepeated, &r.drop_bystander}) {
    for (double v : *curve) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(r.drop_repeated[1] > r.drop_nonrepeated[1]);

  const auto two = fixture::blobs(2, 600, 5);
  CHECK_THROWS_AS(run_imbalance_sweep(two.train, c), IngestionError);
}
