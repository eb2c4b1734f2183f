#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "cocoa/augment.hpp"
#include "cocoa/estimators.hpp"

namespace cocoa {

struct TheoryCheckResult {
  std::string name;
  nlohmann::ordered_json observed;  // named statistics
  double bound = 0.0;               // tolerance or bound value
  bool pass = false;
  bool inconclusive = false;  // estimate too coarse to decide; not a failure
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
};

// RCT consistency (factual and counterfactual losses agree): draws an RCT
// dataset from the linear generator with t ~ Bernoulli(1/2), evaluates
// |L_F - L_CF| in the noiseless form for several frozen random-weight MLP
// hypotheses, and compares the max against tolerance(n) = 5/sqrt(n). The
// same hypotheses are re-evaluated on the biased-propensity generator as a
// negative control, which must exceed the tolerance.
struct RctCheckSpec {
  std::size_t n = 10000;
  std::size_t d = 10;
  std::size_t n_hypotheses = 5;
  std::uint64_t seed = 0;
};
TheoryCheckResult check_rct_consistency(const RctCheckSpec& spec);
TheoryCheckResult check_rct_consistency(std::size_t n, std::uint64_t seed);

// Empty-ball probability bound: P(no sample among M lands in B_eps(x)) must
// not exceed (1 - P(X in B_eps(x)))^M. Samples are 1-D standard normal;
// p is estimated from p_samples draws and the left side from `trials`
// repetitions; passes when freq <= bound + 3 * binomial SE. p_hat == 0 is
// flagged inconclusive.
struct NeighborBoundSpec {
  double x = 0.0;
  double epsilon = 0.5;
  std::size_t m = 50;
  std::size_t trials = 2000;
  std::size_t p_samples = 200000;
  std::uint64_t seed = 0;
};
TheoryCheckResult check_neighbor_bound(const NeighborBoundSpec& spec);

// Generalization bound on a 1-D linear instance: runs the augmentation
// pipeline, fits an estimator on the augmented data, and verifies
//   pehe(h) <= 4 * (L_AF(h) + V(p_RCT, p_AF) + alpha * b_A) * (1 + slack).
// V is estimated by a fixed-grid histogram L1 distance (v_bins per arm) and
// b_A as the mean squared error of the imputations against the true
// counterfactual means. The expected-imputation function f~_n is
// approximated by the single observed dataset's imputations; the slack
// absorbs that gap.
struct GenBoundSpec {
  std::size_t n = 1000;
  MetaKind learner = MetaKind::s_learner;
  double ridge_lambda = 1e-6;
  AugmentSpec augment;  // contrastive.embedding defaults applied at d=1
  bool skip_augmentation = false;  // alpha = 0 variant
  bool oracle_psi = false;         // replace imputations by true means
  std::size_t v_bins = 64;
  double slack = 0.10;
  std::uint64_t seed = 0;
};
TheoryCheckResult check_generalization_bound(const GenBoundSpec& spec);

}  // namespace cocoa
