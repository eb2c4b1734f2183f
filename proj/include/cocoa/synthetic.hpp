#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cocoa/dataset.hpp"

namespace cocoa {

// Linear benchmark: X ~ N(0, I_d), biased treatment p(t=1|x) = sigmoid(x1+x2)
// (sigmoid(x1) when d == 1), potential-outcome means mu_t(x) = beta_t . x,
// y = mu_t(x) + N(0, noise_sd^2).
struct LinearGenSpec {
  std::size_t n = 1500;
  std::size_t d = 10;
  std::vector<double> beta0;  // empty -> all 0.5
  std::vector<double> beta1;  // empty -> all 0.3
  double noise_sd = 0.1;
  bool rct = false;  // t ~ Bernoulli(1/2) independent of x
  std::uint64_t seed = 0;
};

// Same covariate/treatment mechanism with mu_t(x) = exp(beta_t . x).
struct NonLinearGenSpec {
  std::size_t n = 1500;
  std::size_t d = 10;
  std::vector<double> beta0;
  std::vector<double> beta1;
  double noise_sd = 0.1;
  bool rct = false;
  std::uint64_t seed = 0;
};

// Semi-synthetic construction: mu0(x) = exp(beta.(x+W)), mu1(x) = beta.(x+W)
// - omega, y ~ N(mu_t, 1), with per-coordinate beta drawn from a categorical
// distribution. Covariates come from a user-supplied matrix (e.g. the real
// study's covariates) or an i.i.d. standard-normal fallback of the study's
// dimensions (747 x 25).
struct IhdpStyleGenSpec {
  std::optional<std::vector<std::vector<double>>> covariates;
  std::size_t fallback_n = 747;
  std::size_t fallback_d = 25;
  double omega = 4.0;
  std::vector<double> beta_support{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> beta_probs{0.6, 0.1, 0.1, 0.1, 0.1};
  double w_offset = 0.5;
  // Treatment is independent of covariates (the source study was an RCT);
  // the default rate matches its 139/747 treated share.
  double treat_prob = 139.0 / 747.0;
  std::uint64_t seed = 0;
};

// Twins-style variant: mu0(x) = exp(beta.x), mu1(x) = alpha.x with beta and
// alpha standard normal in the covariate dimension, y ~ N(mu_t, noise_var).
struct TwinsStyleGenSpec {
  std::optional<std::vector<std::vector<double>>> covariates;
  std::size_t fallback_n = 1000;
  std::size_t fallback_d = 30;
  double noise_var = 0.2;
  double treat_prob = 0.5;
  std::uint64_t seed = 0;
};

Dataset gen_linear(const LinearGenSpec& spec);
Dataset gen_nonlinear(const NonLinearGenSpec& spec);
Dataset gen_ihdp_style(const IhdpStyleGenSpec& spec);
Dataset gen_twins_style(const TwinsStyleGenSpec& spec);

double sigmoid(double v);
// Left-to-right dot product; tests re-evaluate stored means bit-exactly.
double dot(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cocoa
