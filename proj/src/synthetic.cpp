#include "cocoa/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "cocoa/rng.hpp"

namespace cocoa {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

namespace {

std::vector<double> resolve_beta(const std::vector<double>& given,
                                 std::size_t d, double fill,
                                 const char* which) {
  if (given.empty()) return std::vector<double>(d, fill);
  if (given.size() != d)
    throw std::invalid_argument(std::string("synthetic: |") + which +
                                "| must equal d");
  return given;
}

double propensity_score(const std::vector<double>& x, bool rct) {
  if (rct) return 0.5;
  return sigmoid(x.size() >= 2 ? x[0] + x[1] : x[0]);
}

template <typename MeanFn>
Dataset gen_two_arm(std::size_t n, std::size_t d, double noise_sd, bool rct,
                    Rng rng, MeanFn mean_of, std::string name) {
  if (n == 0) throw std::invalid_argument("synthetic: n must be positive");
  if (d == 0) throw std::invalid_argument("synthetic: d must be positive");
  if (noise_sd < 0.0)
    throw std::invalid_argument("synthetic: noise_sd must be >= 0");
  std::vector<FactualSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FactualSample s;
    s.x.resize(d);
    for (double& v : s.x) v = rng.normal();
    s.t = rng.bernoulli(propensity_score(s.x, rct)) ? 1 : 0;
    s.mu0 = mean_of(s.x, 0);
    s.mu1 = mean_of(s.x, 1);
    s.y = (s.t == 1 ? *s.mu1 : *s.mu0) + noise_sd * rng.normal();
    samples.push_back(std::move(s));
  }
  return Dataset(d, std::move(name), std::move(samples), true);
}

std::vector<std::vector<double>> resolve_covariates(
    const std::optional<std::vector<std::vector<double>>>& given,
    std::size_t fallback_n, std::size_t fallback_d, Rng& rng) {
  if (given.has_value()) {
    if (given->empty())
      throw std::invalid_argument("synthetic: empty covariate matrix");
    const std::size_t d = given->front().size();
    if (d == 0) throw std::invalid_argument("synthetic: zero-width covariates");
    for (const auto& row : *given) {
      if (row.size() != d)
        throw std::invalid_argument("synthetic: ragged covariate matrix");
      for (const double v : row)
        if (!std::isfinite(v))
          throw std::invalid_argument("synthetic: non-finite covariate");
    }
    return *given;
  }
  std::vector<std::vector<double>> x(fallback_n, std::vector<double>(fallback_d));
  for (auto& row : x)
    for (double& v : row) v = rng.normal();
  return x;
}

}  // namespace

Dataset gen_linear(const LinearGenSpec& spec) {
  const auto beta0 = resolve_beta(spec.beta0, spec.d, 0.5, "beta0");
  const auto beta1 = resolve_beta(spec.beta1, spec.d, 0.3, "beta1");
  return gen_two_arm(
      spec.n, spec.d, spec.noise_sd, spec.rct,
      Rng(spec.seed).split("synthetic.linear"),
      [&](const std::vector<double>& x, int t) {
        return t == 1 ? dot(beta1, x) : dot(beta0, x);
      },
      "linear");
}

Dataset gen_nonlinear(const NonLinearGenSpec& spec) {
  const auto beta0 = resolve_beta(spec.beta0, spec.d, 0.5, "beta0");
  const auto beta1 = resolve_beta(spec.beta1, spec.d, 0.3, "beta1");
  return gen_two_arm(
      spec.n, spec.d, spec.noise_sd, spec.rct,
      Rng(spec.seed).split("synthetic.nonlinear"),
      [&](const std::vector<double>& x, int t) {
        return std::exp(t == 1 ? dot(beta1, x) : dot(beta0, x));
      },
      "nonlinear");
}

Dataset gen_ihdp_style(const IhdpStyleGenSpec& spec) {
  if (spec.beta_support.size() != spec.beta_probs.size())
    throw std::invalid_argument(
        "gen_ihdp_style: support and probs must have equal length");
  double prob_sum = 0.0;
  for (const double p : spec.beta_probs) prob_sum += p;
  if (std::abs(prob_sum - 1.0) > 1e-9)
    throw std::invalid_argument("gen_ihdp_style: beta_probs must sum to 1");

  Rng rng = Rng(spec.seed).split("synthetic.ihdp");
  const auto x = resolve_covariates(spec.covariates, spec.fallback_n,
                                    spec.fallback_d, rng);
  const std::size_t d = x.front().size();

  std::vector<double> beta(d);
  for (double& b : beta) b = spec.beta_support[rng.categorical(spec.beta_probs)];

  std::vector<FactualSample> samples;
  samples.reserve(x.size());
  for (const auto& xi : x) {
    std::vector<double> shifted(d);
    for (std::size_t k = 0; k < d; ++k) shifted[k] = xi[k] + spec.w_offset;
    FactualSample s;
    s.x = xi;
    const double lin = dot(beta, shifted);
    s.mu0 = std::exp(lin);
    s.mu1 = lin - spec.omega;
    s.t = rng.bernoulli(spec.treat_prob) ? 1 : 0;
    s.y = (s.t == 1 ? *s.mu1 : *s.mu0) + rng.normal();
    samples.push_back(std::move(s));
  }
  return Dataset(d, "ihdp_style", std::move(samples), true);
}

Dataset gen_twins_style(const TwinsStyleGenSpec& spec) {
  if (spec.noise_var < 0.0)
    throw std::invalid_argument("gen_twins_style: noise_var must be >= 0");
  Rng rng = Rng(spec.seed).split("synthetic.twins");
  const auto x = resolve_covariates(spec.covariates, spec.fallback_n,
                                    spec.fallback_d, rng);
  const std::size_t d = x.front().size();

  std::vector<double> beta(d), alpha(d);
  for (double& b : beta) b = rng.normal();
  for (double& a : alpha) a = rng.normal();
  const double noise_sd = std::sqrt(spec.noise_var);

  std::vector<FactualSample> samples;
  samples.reserve(x.size());
  for (const auto& xi : x) {
    FactualSample s;
    s.x = xi;
    s.mu0 = std::exp(dot(beta, xi));
    s.mu1 = dot(alpha, xi);
    s.t = rng.bernoulli(spec.treat_prob) ? 1 : 0;
    s.y = (s.t == 1 ? *s.mu1 : *s.mu0) + noise_sd * rng.normal();
    samples.push_back(std::move(s));
  }
  return Dataset(d, "twins_style", std::move(samples), true);
}

}  // namespace cocoa
