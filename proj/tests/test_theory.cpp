#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cocoa/theory_checks.hpp"
#include "test_support.hpp"

using namespace cocoa;

namespace {

GenBoundSpec small_bound_spec(std::uint64_t seed) {
  GenBoundSpec spec;
  spec.n = 600;
  spec.seed = seed;
  spec.augment.contrastive.embedding.layer_sizes = {1, 16, 8};
  spec.augment.contrastive.training.epochs = 6;
  spec.augment.contrastive.max_pairs_per_anchor = 20;
  return spec;
}

}  // namespace

TEST_CASE("rct consistency: statistic under tolerance, control above it") {
  RctCheckSpec spec;
  spec.n = 10000;
  spec.seed = 0;
  const TheoryCheckResult r = check_rct_consistency(spec);
  CHECK(r.pass);
  CHECK(r.observed["statistic"].get<double>() < r.bound);
  CHECK(r.observed["negative_control_statistic"].get<double>() > r.bound);
  CHECK(r.bound == doctest::Approx(0.05));
}

TEST_CASE("rct consistency: median statistic shrinks with n") {
  std::vector<double> small, large;
  for (std::uint64_t s = 0; s < 5; ++s) {
    RctCheckSpec lo;
    lo.n = 1000;
    lo.seed = 50 + s;
    small.push_back(
        check_rct_consistency(lo).observed["statistic"].get<double>());
    RctCheckSpec hi;
    hi.n = 10000;
    hi.seed = 50 + s;
    large.push_back(
        check_rct_consistency(hi).observed["statistic"].get<double>());
  }
  CHECK(testsup::median(large) < testsup::median(small));
}

TEST_CASE("rct consistency rejects undersized runs") {
  RctCheckSpec spec;
  spec.n = 50;
  CHECK_THROWS(check_rct_consistency(spec));
}

TEST_CASE("neighbor bound holds for the full M grid") {
  for (const std::size_t m : {1u, 10u, 50u, 200u}) {
    NeighborBoundSpec spec;
    spec.m = m;
    spec.seed = 1;
    const TheoryCheckResult r = check_neighbor_bound(spec);
    CHECK(r.pass);
    CHECK_FALSE(r.inconclusive);
    const double freq = r.observed["empty_ball_frequency"].get<double>();
    const double se = r.observed["binomial_se"].get<double>();
    CHECK(freq <= r.bound + 3.0 * se);
  }
}

TEST_CASE("neighbor bound: M = 0 is the vacuous case") {
  NeighborBoundSpec spec;
  spec.m = 0;
  spec.seed = 2;
  const TheoryCheckResult r = check_neighbor_bound(spec);
  CHECK(r.pass);
  CHECK(r.observed["empty_ball_frequency"].get<double>() == 1.0);
  CHECK(r.bound == 1.0);
}

TEST_CASE("neighbor bound: ball larger than the data support empties the miss set") {
  NeighborBoundSpec spec;
  spec.epsilon = 50.0;
  spec.m = 3;
  spec.seed = 3;
  const TheoryCheckResult r = check_neighbor_bound(spec);
  CHECK(r.pass);
  CHECK(r.observed["empty_ball_frequency"].get<double>() == 0.0);
}

TEST_CASE("neighbor bound: undetectable ball is inconclusive, not failed") {
  NeighborBoundSpec spec;
  spec.epsilon = 1e-9;
  spec.seed = 4;
  const TheoryCheckResult r = check_neighbor_bound(spec);
  CHECK(r.inconclusive);
  CHECK(r.pass);
}

TEST_CASE("generalization bound holds across seeds at test scale") {
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const TheoryCheckResult r =
        check_generalization_bound(small_bound_spec(seed));
    passed += r.pass ? 1 : 0;
    CHECK(r.observed["pehe"].get<double>() >= 0.0);
    CHECK(r.observed["alpha"].get<double>() >= 0.0);
    CHECK(r.observed["alpha"].get<double>() <= 0.5);
  }
  CHECK(passed == 3);
}

TEST_CASE("generalization bound: alpha = 0 reduces to the factual form") {
  GenBoundSpec spec = small_bound_spec(11);
  spec.skip_augmentation = true;
  const TheoryCheckResult r = check_generalization_bound(spec);
  CHECK(r.pass);
  CHECK(r.observed["alpha"].get<double>() == 0.0);
  CHECK(r.observed["b_a"].get<double>() == 0.0);
}

TEST_CASE("generalization bound: oracle imputer zeroes the bias term") {
  GenBoundSpec spec = small_bound_spec(13);
  spec.oracle_psi = true;
  const TheoryCheckResult r = check_generalization_bound(spec);
  CHECK(r.pass);
  CHECK(r.observed["b_a"].get<double>() == doctest::Approx(0.0));
}

TEST_CASE("theory check results serialize with all fields") {
  NeighborBoundSpec spec;
  spec.seed = 5;
  const TheoryCheckResult r = check_neighbor_bound(spec);
  const nlohmann::ordered_json j = r.to_json();
  CHECK(j.at("name") == "neighbor_bound");
  CHECK(j.contains("observed"));
  CHECK(j.contains("bound"));
  CHECK(j.contains("pass"));
  CHECK(j.contains("inconclusive"));
  CHECK(j.at("seed") == 5);
}
