#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace cocoa {

enum class KernelKind { dot_product, rbf, matern32 };
enum class PsiKind { gp, linear };

struct KernelSpec {
  KernelKind kind = KernelKind::dot_product;
  double sigma0_sq = 1.0;     // dot_product bias
  double length_scale = 1.0;  // rbf / matern32
  double jitter = 1e-6;       // diagonal regularizer on the Gram matrix
};

// Local regression input: opposite-group neighbors (rows of `points` with
// factual outcomes `outcomes`) plus the query covariate vector.
struct NeighborSet {
  Eigen::MatrixXd points;  // n_x rows, d columns
  Eigen::VectorXd outcomes;
  Eigen::VectorXd query;
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b);

// GP posterior mean at the query: k_x^T (K + jitter I)^{-1} y, solved via
// Cholesky factorization (never an explicit inverse). Outcomes are mean-
// centered before the solve and the mean re-added, i.e. the prior mean is
// the neighbor average. If factorization fails the jitter escalates by
// factors of 10 up to 1e-2 before giving up.
double gp_impute(const NeighborSet& neighbors, const KernelSpec& kernel);

// Intercept-augmented least squares on the neighbors, evaluated at the
// query. Ridge-regularized with lambda = 1e-8 * trace(X^T X) / cols, which
// keeps the normal equations solvable when n_x <= d or covariates repeat.
double linear_impute(const NeighborSet& neighbors);

// Dispatch on the configured local regression module.
double impute(PsiKind kind, const NeighborSet& neighbors,
              const std::optional<KernelSpec>& kernel);

// Solves (X^T X + lambda I) beta = X^T y. Shared by linear_impute and the
// ridge base learner.
Eigen::VectorXd ridge_normal_solve(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double lambda);

KernelKind kernel_kind_from_name(const std::string& name);
std::string kernel_kind_name(KernelKind kind);
PsiKind psi_kind_from_name(const std::string& name);
std::string psi_kind_name(PsiKind kind);

}  // namespace cocoa
