#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cocoa/metrics.hpp"
#include "cocoa/rng.hpp"
#include "cocoa/synthetic.hpp"

using namespace cocoa;

namespace {

// Ground-truth dataset with chosen tau values: mu0 = 0, mu1 = tau.
Dataset with_taus(const std::vector<double>& taus) {
  std::vector<FactualSample> s;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    FactualSample f;
    f.x = {static_cast<double>(i)};
    f.t = static_cast<int>(i % 2);
    f.mu0 = 0.0;
    f.mu1 = taus[i];
    f.y = f.t == 1 ? taus[i] : 0.0;
    s.push_back(std::move(f));
  }
  return Dataset(1, "taus", std::move(s), true);
}

Hypothesis constant_cate(double c) {
  return [c](const std::vector<double>&, int t) {
    return t == 1 ? c : 0.0;
  };
}

}  // namespace

TEST_CASE("sqrt_pehe: exact model scores zero, constant offsets score the offset") {
  const Dataset ds = with_taus({2.0, 2.0, 2.0});
  const Hypothesis truth = [&](const std::vector<double>&, int t) {
    return t == 1 ? 2.0 : 0.0;
  };
  CHECK(sqrt_pehe(truth, ds) == doctest::Approx(0.0));
  CHECK(sqrt_pehe(constant_cate(0.0), ds) == doctest::Approx(2.0));
}

TEST_CASE("sqrt_pehe: three-point hand case") {
  // tau_hat - tau = (1, -1, 1) -> sqrt(mean of squares) = 1.
  const Dataset ds = with_taus({0.0, 2.0, 0.0});
  const Hypothesis h = [](const std::vector<double>&, int t) {
    return t == 1 ? 1.0 : 0.0;
  };
  CHECK(sqrt_pehe(h, ds) == doctest::Approx(1.0));
}

TEST_CASE("ate_error: hand cases") {
  const Dataset ds = with_taus({2.0, 2.0, 2.0});
  CHECK(ate_error(constant_cate(2.0), ds) == doctest::Approx(0.0));
  CHECK(ate_error(constant_cate(0.0), ds) == doctest::Approx(2.0));

  // tau_hat - tau = (1, -1, 1) -> |mean| = 1/3.
  const Dataset mix = with_taus({0.0, 2.0, 0.0});
  const Hypothesis h = [](const std::vector<double>&, int t) {
    return t == 1 ? 1.0 : 0.0;
  };
  CHECK(ate_error(h, mix) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ate_error never exceeds sqrt_pehe") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> taus(10);
    for (double& t : taus) t = rng.normal(0.0, 2.0);
    const Dataset ds = with_taus(taus);
    const double a = rng.normal(), b = rng.normal();
    const Hypothesis h = [a, b](const std::vector<double>& x, int t) {
      return t == 1 ? a * x[0] + b : 0.0;
    };
    CHECK(ate_error(h, ds) <= sqrt_pehe(h, ds) + 1e-12);
  }
}

TEST_CASE("factual loss: interpolating hypothesis scores zero") {
  const Dataset ds = with_taus({1.0, 2.0, 3.0, 4.0});
  const Hypothesis interp = [&](const std::vector<double>& x, int t) {
    const auto i = static_cast<std::size_t>(x[0]);
    return t == 1 ? *ds[i].mu1 : 0.0;
  };
  CHECK(empirical_factual_loss(interp, ds) == doctest::Approx(0.0));

  const Hypothesis zero = [](const std::vector<double>&, int) { return 0.0; };
  // y = tau on odd (treated) rows, zero on control rows.
  double want = 0.0;
  for (const auto& s : ds.samples()) want += s.y * s.y;
  want /= static_cast<double>(ds.size());
  CHECK(empirical_factual_loss(zero, ds) == doctest::Approx(want));
}

TEST_CASE("counterfactual loss: true means score zero, mirrors factual hand case") {
  const Dataset ds = with_taus({1.0, -2.0, 0.5});
  const Hypothesis truth = [&](const std::vector<double>& x, int t) {
    const auto i = static_cast<std::size_t>(x[0]);
    return t == 1 ? *ds[i].mu1 : *ds[i].mu0;
  };
  CHECK(empirical_counterfactual_loss(truth, ds) == doctest::Approx(0.0));

  const Hypothesis zero = [](const std::vector<double>&, int) { return 0.0; };
  // Counterfactual targets: mu1 for control rows, mu0 for treated rows.
  double want = 0.0;
  for (const auto& s : ds.samples()) {
    const double mu_cf = s.t == 1 ? *s.mu0 : *s.mu1;
    want += mu_cf * mu_cf;
  }
  want /= static_cast<double>(ds.size());
  CHECK(empirical_counterfactual_loss(zero, ds) == doctest::Approx(want));
}

TEST_CASE("metrics require ground truth and nonempty data") {
  std::vector<FactualSample> s;
  s.push_back({{0.0}, 0, 1.0, {}, {}});
  s.push_back({{1.0}, 1, 2.0, {}, {}});
  const Dataset no_gt(1, "nogt", std::move(s), false);
  const Hypothesis zero = [](const std::vector<double>&, int) { return 0.0; };
  CHECK_THROWS(sqrt_pehe(zero, no_gt));
  CHECK_THROWS(ate_error(zero, no_gt));
  CHECK_THROWS(empirical_counterfactual_loss(zero, no_gt));
  CHECK_NOTHROW(empirical_factual_loss(zero, no_gt));
  CHECK_THROWS(empirical_factual_loss(zero, Dataset(1, "empty", {}, false)));
}

TEST_CASE("mmd_imbalance: identical groups score zero") {
  std::vector<FactualSample> s;
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal()};
    s.push_back({x, 0, 0.0, {}, {}});
    s.push_back({x, 1, 0.0, {}, {}});
  }
  const Dataset ds(2, "same", std::move(s), false);
  CHECK(mmd_imbalance(ds) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("mmd_imbalance: separated point masses score large") {
  std::vector<FactualSample> s;
  for (int i = 0; i < 10; ++i) {
    s.push_back({{0.0}, 0, 0.0, {}, {}});
    s.push_back({{10.0}, 1, 0.0, {}, {}});
  }
  const Dataset ds(1, "far", std::move(s), false);
  CHECK(mmd_imbalance(ds, 1.0) > 0.9);
}

TEST_CASE("mmd_imbalance is invariant to within-group permutation and label swap") {
  Rng rng(11);
  std::vector<FactualSample> s;
  for (int i = 0; i < 30; ++i)
    s.push_back(
        {{rng.normal() + (i % 2), rng.normal()}, i % 2, 0.0, {}, {}});
  const Dataset ds(2, "perm", std::move(s), false);
  const double base = mmd_imbalance(ds);

  std::vector<FactualSample> shuffled = ds.samples();
  Rng perm_rng(13);
  perm_rng.shuffle(shuffled);
  const Dataset permuted(2, "perm2", std::move(shuffled), false);
  CHECK(mmd_imbalance(permuted) == doctest::Approx(base).epsilon(1e-12));

  std::vector<FactualSample> flipped = ds.samples();
  for (auto& f : flipped) f.t = 1 - f.t;
  const Dataset swapped(2, "swap", std::move(flipped), false);
  CHECK(mmd_imbalance(swapped) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mmd_imbalance rejects an empty group") {
  std::vector<FactualSample> s;
  for (int i = 0; i < 5; ++i) s.push_back({{1.0 * i}, 0, 0.0, {}, {}});
  const Dataset ds(1, "empty1", std::move(s), false);
  CHECK_THROWS(mmd_imbalance(ds));
}

