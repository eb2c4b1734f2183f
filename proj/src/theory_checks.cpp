#include "cocoa/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cocoa/metrics.hpp"
#include "cocoa/rng.hpp"
#include "cocoa/synthetic.hpp"

namespace cocoa {

nlohmann::ordered_json TheoryCheckResult::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["observed"] = observed;
  j["bound"] = bound;
  j["pass"] = pass;
  j["inconclusive"] = inconclusive;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  return j;
}

namespace {

// Frozen small random-weight hypothesis over (x, t). Tanh hidden layer
// keeps outputs bounded. The 0.7 weight scale balances two needs: the
// hypothesis-dependent loss terms stay small enough that the RCT statistic
// sits inside tolerance(n) = 5/sqrt(n), while the treatment-asymmetric
// components stay large enough that the biased generator lands well above
// it.
Hypothesis random_hypothesis(std::size_t d, std::uint64_t seed) {
  MlpSpec spec;
  spec.layer_sizes = {d + 1, 16, 1};
  spec.activation = Activation::tanh;
  spec.output_activation = OutputActivation::identity;
  spec.init_seed = seed;
  Mlp net(spec);
  Rng rng = Rng(seed).split("theory.hypothesis");
  std::vector<double> params = net.parameters();
  for (double& p : params) p *= 0.7;
  params.back() = rng.normal(0.0, 0.7);
  net.set_parameters(params);
  return [net = std::move(net), d](const std::vector<double>& x, int t) {
    Eigen::VectorXd in(static_cast<Eigen::Index>(d + 1));
    for (std::size_t k = 0; k < d; ++k)
      in(static_cast<Eigen::Index>(k)) = x[k];
    in(static_cast<Eigen::Index>(d)) = static_cast<double>(t);
    return net.forward(in)(0);
  };
}

double consistency_statistic(const Dataset& ds,
                             const std::vector<Hypothesis>& hypotheses) {
  double stat = 0.0;
  for (const Hypothesis& h : hypotheses) {
    const double lf = empirical_factual_loss_noiseless(h, ds);
    const double lcf = empirical_counterfactual_loss(h, ds);
    stat = std::max(stat, std::abs(lf - lcf));
  }
  return stat;
}

}  // namespace

TheoryCheckResult check_rct_consistency(const RctCheckSpec& spec) {
  if (spec.n < 100)
    throw std::invalid_argument("check_rct_consistency: n must be >= 100");
  const Rng root(spec.seed);

  std::vector<Hypothesis> hypotheses;
  hypotheses.reserve(spec.n_hypotheses);
  for (std::size_t k = 0; k < spec.n_hypotheses; ++k)
    hypotheses.push_back(
        random_hypothesis(spec.d, root.split(k).next_u64()));

  LinearGenSpec gen;
  gen.n = spec.n;
  gen.d = spec.d;
  gen.rct = true;
  gen.seed = root.split("rct_data").next_u64();
  const Dataset rct = gen_linear(gen);

  LinearGenSpec biased = gen;
  biased.rct = false;
  biased.seed = root.split("biased_data").next_u64();
  const Dataset control = gen_linear(biased);

  const double tolerance = 5.0 / std::sqrt(static_cast<double>(spec.n));
  const double stat = consistency_statistic(rct, hypotheses);
  const double negative = consistency_statistic(control, hypotheses);

  TheoryCheckResult result;
  result.name = "rct_consistency";
  result.observed["statistic"] = stat;
  result.observed["negative_control_statistic"] = negative;
  result.observed["n_hypotheses"] = spec.n_hypotheses;
  result.bound = tolerance;
  result.pass = stat < tolerance && negative > tolerance;
  result.n_samples = spec.n;
  result.seed = spec.seed;
  return result;
}

TheoryCheckResult check_rct_consistency(std::size_t n, std::uint64_t seed) {
  RctCheckSpec spec;
  spec.n = n;
  spec.seed = seed;
  return check_rct_consistency(spec);
}

TheoryCheckResult check_neighbor_bound(const NeighborBoundSpec& spec) {
  if (!(spec.epsilon > 0.0))
    throw std::invalid_argument("check_neighbor_bound: epsilon must be > 0");
  if (spec.trials == 0 || spec.p_samples == 0)
    throw std::invalid_argument("check_neighbor_bound: need positive counts");
  const Rng root(spec.seed);

  // P(X in B_eps(x)) for X ~ N(0,1); sampling keeps the check generator-
  // agnostic rather than using the Gaussian CDF.
  Rng prng = root.split("ball_probability");
  std::size_t in_ball = 0;
  for (std::size_t k = 0; k < spec.p_samples; ++k)
    if (std::abs(prng.normal() - spec.x) < spec.epsilon) ++in_ball;
  const double p_hat =
      static_cast<double>(in_ball) / static_cast<double>(spec.p_samples);

  TheoryCheckResult result;
  result.name = "neighbor_bound";
  result.n_samples = spec.trials;
  result.seed = spec.seed;
  result.observed["p_hat"] = p_hat;
  result.observed["m"] = spec.m;

  if (p_hat == 0.0) {
    result.inconclusive = true;
    result.pass = true;  // not a failure; epsilon too small for the budget
    result.bound = 1.0;
    result.observed["note"] = "p_hat = 0: ball too small for trial budget";
    return result;
  }

  Rng trng = root.split("trials");
  std::size_t all_miss = 0;
  for (std::size_t t = 0; t < spec.trials; ++t) {
    bool miss = true;
    for (std::size_t k = 0; k < spec.m && miss; ++k)
      if (std::abs(trng.normal() - spec.x) < spec.epsilon) miss = false;
    if (miss) ++all_miss;
  }
  const double freq =
      static_cast<double>(all_miss) / static_cast<double>(spec.trials);
  const double bound =
      std::pow(1.0 - p_hat, static_cast<double>(spec.m));
  const double se =
      std::sqrt(std::max(bound * (1.0 - bound), 1e-12) /
                static_cast<double>(spec.trials));

  result.observed["empty_ball_frequency"] = freq;
  result.observed["binomial_se"] = se;
  result.bound = bound;
  result.pass = freq <= bound + 3.0 * se;
  return result;
}

TheoryCheckResult check_generalization_bound(const GenBoundSpec& spec) {
  const Rng root(spec.seed);

  LinearGenSpec gen;
  gen.n = spec.n;
  gen.d = 1;
  gen.seed = root.split("bound_data").next_u64();
  const Dataset ds = gen_linear(gen);

  AugmentSpec aug = spec.augment;
  aug.seed = root.split("bound_augment").next_u64();

  Dataset augmented = ds;
  std::vector<AddedRecord> added;
  double alpha = 0.0;
  if (!spec.skip_augmentation) {
    AugmentationReport report = augment(ds, aug);
    added = report.added;
    alpha = report.alpha;
    if (spec.oracle_psi && !added.empty()) {
      // Replace each imputation by the true counterfactual mean.
      std::vector<FactualSample> samples(
          report.augmented.samples().begin(),
          report.augmented.samples().begin() +
              static_cast<std::ptrdiff_t>(report.n_original));
      for (AddedRecord& rec : added) {
        FactualSample s = ds[rec.source_index];
        s.t = rec.imputed_t;
        rec.imputed_y = rec.imputed_t == 1 ? *s.mu1 : *s.mu0;
        s.y = rec.imputed_y;
        samples.push_back(std::move(s));
      }
      augmented = Dataset(ds.dim(), report.augmented.name(),
                          std::move(samples), true);
    } else {
      augmented = std::move(report.augmented);
    }
  }

  BaseLearnerSpec base;
  base.kind = BaseKind::ridge;
  base.ridge_lambda = spec.ridge_lambda;
  const CateModel model = CateModel::fit(
      augmented, spec.learner, base, root.split("bound_fit").next_u64());

  // Left side: PEHE integrates over the factual covariate distribution,
  // which the augmented x-marginal matches only asymptotically.
  double lhs = 0.0;
  for (const auto& s : ds.samples()) {
    const double err = model.predict_cate(s.x) - s.tau();
    lhs += err * err;
  }
  lhs /= static_cast<double>(ds.size());

  const double l_af = empirical_factual_loss(model, augmented);

  // V(p_RCT(X,T), p_AF(X,T)) via histogram masses on a fixed grid. The RCT
  // reference shares the factual x-marginal with T ~ Bernoulli(1/2).
  double lo = ds[0].x[0], hi = ds[0].x[0];
  for (const auto& s : ds.samples()) {
    lo = std::min(lo, s.x[0]);
    hi = std::max(hi, s.x[0]);
  }
  const double width = hi > lo ? hi - lo : 1.0;
  auto bin_of = [&](double v) {
    auto b = static_cast<std::ptrdiff_t>((v - lo) / width *
                                         static_cast<double>(spec.v_bins));
    return std::clamp<std::ptrdiff_t>(
        b, 0, static_cast<std::ptrdiff_t>(spec.v_bins) - 1);
  };
  std::vector<double> rct_mass(2 * spec.v_bins, 0.0);
  std::vector<double> af_mass(2 * spec.v_bins, 0.0);
  const double w_f = 1.0 / static_cast<double>(ds.size());
  for (const auto& s : ds.samples()) {
    const auto b = static_cast<std::size_t>(bin_of(s.x[0]));
    rct_mass[b] += 0.5 * w_f;                  // t = 0 cell
    rct_mass[spec.v_bins + b] += 0.5 * w_f;    // t = 1 cell
  }
  const double w_af = 1.0 / static_cast<double>(augmented.size());
  for (const auto& s : augmented.samples()) {
    const auto b = static_cast<std::size_t>(bin_of(s.x[0]));
    af_mass[(s.t == 1 ? spec.v_bins : 0) + b] += w_af;
  }
  double v_hat = 0.0;
  for (std::size_t c = 0; c < rct_mass.size(); ++c)
    v_hat += std::abs(rct_mass[c] - af_mass[c]);

  // b_A: imputation bias against the true counterfactual means.
  double b_a = 0.0;
  for (const AddedRecord& rec : added) {
    const FactualSample& src = ds[rec.source_index];
    const double truth = rec.imputed_t == 1 ? *src.mu1 : *src.mu0;
    const double err = rec.imputed_y - truth;
    b_a += err * err;
  }
  if (!added.empty()) b_a /= static_cast<double>(added.size());

  const double rhs = 4.0 * (l_af + v_hat + alpha * b_a);

  TheoryCheckResult result;
  result.name = "generalization_bound";
  result.observed["pehe"] = lhs;
  result.observed["l_af"] = l_af;
  result.observed["v_hat"] = v_hat;
  result.observed["alpha"] = alpha;
  result.observed["b_a"] = b_a;
  result.observed["rhs"] = rhs;
  result.observed["note"] =
      "expected imputation f~_n approximated by the observed dataset's "
      "imputations; slack absorbs the gap";
  result.bound = rhs * (1.0 + spec.slack);
  result.pass = lhs <= result.bound;
  result.n_samples = spec.n;
  result.seed = spec.seed;
  return result;
}

}  // namespace cocoa
