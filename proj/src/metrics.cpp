#include "cocoa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cocoa {

namespace {

void require_ground_truth(const Dataset& ds, const char* op) {
  if (!ds.has_ground_truth())
    throw std::invalid_argument(std::string(op) + ": dataset lacks mu0/mu1");
  if (ds.size() == 0)
    throw std::invalid_argument(std::string(op) + ": empty dataset");
}

Hypothesis wrap(const CateModel& model) {
  return [&model](const std::vector<double>& x, int t) {
    return model.predict_outcome(x, t);
  };
}

}  // namespace

double sqrt_pehe(const Hypothesis& h, const Dataset& ds) {
  require_ground_truth(ds, "sqrt_pehe");
  double sum = 0.0;
  for (const auto& s : ds.samples()) {
    const double err = (h(s.x, 1) - h(s.x, 0)) - s.tau();
    sum += err * err;
  }
  return std::sqrt(sum / static_cast<double>(ds.size()));
}

double sqrt_pehe(const CateModel& model, const Dataset& ds) {
  return sqrt_pehe(wrap(model), ds);
}

double ate_error(const Hypothesis& h, const Dataset& ds) {
  require_ground_truth(ds, "ate_error");
  double est = 0.0, truth = 0.0;
  for (const auto& s : ds.samples()) {
    est += h(s.x, 1) - h(s.x, 0);
    truth += s.tau();
  }
  const auto n = static_cast<double>(ds.size());
  return std::abs(est / n - truth / n);
}

double ate_error(const CateModel& model, const Dataset& ds) {
  return ate_error(wrap(model), ds);
}

double empirical_factual_loss(const Hypothesis& h, const Dataset& ds) {
  if (ds.size() == 0)
    throw std::invalid_argument("empirical_factual_loss: empty dataset");
  double sum = 0.0;
  for (const auto& s : ds.samples()) {
    const double err = s.y - h(s.x, s.t);
    sum += err * err;
  }
  return sum / static_cast<double>(ds.size());
}

double empirical_factual_loss(const CateModel& model, const Dataset& ds) {
  return empirical_factual_loss(wrap(model), ds);
}

double empirical_factual_loss_noiseless(const Hypothesis& h,
                                        const Dataset& ds) {
  require_ground_truth(ds, "empirical_factual_loss_noiseless");
  double sum = 0.0;
  for (const auto& s : ds.samples()) {
    const double mu = s.t == 1 ? *s.mu1 : *s.mu0;
    const double err = mu - h(s.x, s.t);
    sum += err * err;
  }
  return sum / static_cast<double>(ds.size());
}

double empirical_counterfactual_loss(const Hypothesis& h, const Dataset& ds) {
  require_ground_truth(ds, "empirical_counterfactual_loss");
  double sum = 0.0;
  for (const auto& s : ds.samples()) {
    const double mu_cf = s.t == 1 ? *s.mu0 : *s.mu1;
    const double err = mu_cf - h(s.x, 1 - s.t);
    sum += err * err;
  }
  return sum / static_cast<double>(ds.size());
}

double empirical_counterfactual_loss(const CateModel& model,
                                     const Dataset& ds) {
  return empirical_counterfactual_loss(wrap(model), ds);
}

EvalResult evaluate(const CateModel& model, const Dataset& ds) {
  return EvalResult{sqrt_pehe(model, ds), ate_error(model, ds), ds.size()};
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double c = a[k] - b[k];
    s += c * c;
  }
  return s;
}

double median_pairwise_distance(const Dataset& ds) {
  std::vector<double> d2;
  d2.reserve(ds.size() * (ds.size() - 1) / 2);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = i + 1; j < ds.size(); ++j)
      d2.push_back(sq_dist(ds[i].x, ds[j].x));
  if (d2.empty()) return 1.0;
  const std::size_t mid = d2.size() / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid),
                   d2.end());
  const double med = std::sqrt(d2[mid]);
  return med > 0.0 ? med : 1.0;
}

}  // namespace

double mmd_imbalance(const Dataset& ds, std::optional<double> bandwidth) {
  std::vector<const std::vector<double>*> treated, control;
  for (const auto& s : ds.samples())
    (s.t == 1 ? treated : control).push_back(&s.x);
  if (treated.empty() || control.empty())
    throw std::invalid_argument("mmd_imbalance: a treatment group is empty");

  const double sigma = bandwidth.value_or(median_pairwise_distance(ds));
  if (!(sigma > 0.0))
    throw std::invalid_argument("mmd_imbalance: bandwidth must be positive");
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  auto kern = [gamma](const std::vector<double>& a,
                      const std::vector<double>& b) {
    return std::exp(-gamma * sq_dist(a, b));
  };

  // U-statistic within-group terms (skipping the diagonal); groups with a
  // single member contribute zero pairs.
  auto within = [&](const std::vector<const std::vector<double>*>& g) {
    const std::size_t m = g.size();
    if (m < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) s += kern(*g[i], *g[j]);
    return 2.0 * s / (static_cast<double>(m) * static_cast<double>(m - 1));
  };
  double cross = 0.0;
  for (const auto* a : treated)
    for (const auto* b : control) cross += kern(*a, *b);
  cross *= 2.0 / (static_cast<double>(treated.size()) *
                  static_cast<double>(control.size()));

  return std::max(0.0, within(treated) + within(control) - cross);
}

}  // namespace cocoa
