#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cocoa/dataset.hpp"
#include "cocoa/estimators.hpp"

namespace cocoa {

// Generic hypothesis h: (x, t) -> predicted outcome. CateModel overloads
// forward to the fitted model's predict_outcome.
using Hypothesis = std::function<double(const std::vector<double>&, int)>;

struct EvalResult {
  double sqrt_pehe = 0.0;
  double ate_error = 0.0;
  std::size_t n_eval = 0;
};

// sqrt(mean over ds of (tau_hat(x) - (mu1 - mu0))^2); needs ground truth.
double sqrt_pehe(const CateModel& model, const Dataset& ds);
double sqrt_pehe(const Hypothesis& h, const Dataset& ds);

// |mean tau_hat - mean (mu1 - mu0)|; needs ground truth.
double ate_error(const CateModel& model, const Dataset& ds);
double ate_error(const Hypothesis& h, const Dataset& ds);

// Mean squared error against observed factual outcomes.
double empirical_factual_loss(const Hypothesis& h, const Dataset& ds);
double empirical_factual_loss(const CateModel& model, const Dataset& ds);
// Noiseless form: targets are the ground-truth means of the received
// treatment rather than the noisy observed outcomes.
double empirical_factual_loss_noiseless(const Hypothesis& h, const Dataset& ds);
// Counterfactual loss in the noiseless form: mean over ds of
// (mu_{1-t}(x) - h(x, 1-t))^2; per-sample counterfactual noise draws are
// unobservable even in simulation, so the ground-truth means stand in.
double empirical_counterfactual_loss(const Hypothesis& h, const Dataset& ds);
double empirical_counterfactual_loss(const CateModel& model, const Dataset& ds);

EvalResult evaluate(const CateModel& model, const Dataset& ds);

// Unbiased squared-MMD estimate between the covariates of the treated and
// control groups, rbf kernel, clipped at zero. The bandwidth defaults to
// the median pairwise distance over the pooled sample.
double mmd_imbalance(const Dataset& ds,
                     std::optional<double> bandwidth = std::nullopt);

}  // namespace cocoa
