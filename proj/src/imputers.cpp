#include "cocoa/imputers.hpp"

#include <cmath>
#include <stdexcept>

namespace cocoa {

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::dot_product:
      return a.dot(b) + spec.sigma0_sq;
    case KernelKind::rbf: {
      const double r2 = (a - b).squaredNorm();
      return std::exp(-r2 / (2.0 * spec.length_scale * spec.length_scale));
    }
    case KernelKind::matern32: {
      const double r = (a - b).norm();
      const double u = std::sqrt(3.0) * r / spec.length_scale;
      return (1.0 + u) * std::exp(-u);
    }
  }
  throw std::invalid_argument("kernel_eval: unknown kernel");
}

namespace {

void validate_neighbors(const NeighborSet& nb) {
  if (nb.points.rows() == 0)
    throw std::invalid_argument("impute: neighbor set is empty");
  if (nb.points.rows() != nb.outcomes.size())
    throw std::invalid_argument("impute: points/outcomes size mismatch");
  if (nb.points.cols() != nb.query.size())
    throw std::invalid_argument("impute: query dimension mismatch");
}

}  // namespace

double gp_impute(const NeighborSet& neighbors, const KernelSpec& kernel) {
  validate_neighbors(neighbors);
  if (kernel.jitter < 0.0)
    throw std::invalid_argument("gp_impute: jitter must be >= 0");
  const Eigen::Index n = neighbors.points.rows();

  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = kernel_eval(kernel, neighbors.points.row(i).transpose(),
                                   neighbors.points.row(j).transpose());
      gram(i, j) = v;
      gram(j, i) = v;
    }
  Eigen::VectorXd kx(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kx(i) = kernel_eval(kernel, neighbors.query,
                        neighbors.points.row(i).transpose());

  const double mean = neighbors.outcomes.mean();
  const Eigen::VectorXd centered =
      neighbors.outcomes.array() - mean;

  // DotProduct Gram matrices have rank <= d+1 and are singular for larger
  // neighbor sets; escalate the jitter until the factorization succeeds.
  double jitter = kernel.jitter;
  constexpr double kMaxJitter = 1e-2;
  while (true) {
    Eigen::MatrixXd regularized = gram;
    regularized.diagonal().array() += jitter;
    const Eigen::LLT<Eigen::MatrixXd> llt(regularized);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd alpha = llt.solve(centered);
      if (alpha.allFinite()) return kx.dot(alpha) + mean;
    }
    if (jitter >= kMaxJitter)
      throw std::runtime_error(
          "gp_impute: Gram factorization failed at jitter " +
          std::to_string(jitter));
    jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
    if (jitter > kMaxJitter) jitter = kMaxJitter;
  }
}

double linear_impute(const NeighborSet& neighbors) {
  validate_neighbors(neighbors);
  const Eigen::Index n = neighbors.points.rows();
  const Eigen::Index d = neighbors.points.cols();

  Eigen::MatrixXd x(n, d + 1);
  x.col(0).setOnes();
  x.rightCols(d) = neighbors.points;

  const double lambda =
      1e-8 * (x.transpose() * x).trace() / static_cast<double>(d + 1);
  const Eigen::VectorXd beta = ridge_normal_solve(x, neighbors.outcomes, lambda);

  Eigen::VectorXd q(d + 1);
  q(0) = 1.0;
  q.tail(d) = neighbors.query;
  return q.dot(beta);
}

double impute(PsiKind kind, const NeighborSet& neighbors,
              const std::optional<KernelSpec>& kernel) {
  switch (kind) {
    case PsiKind::gp:
      if (!kernel.has_value())
        throw std::invalid_argument("impute: gp requires a kernel spec");
      return gp_impute(neighbors, *kernel);
    case PsiKind::linear:
      return linear_impute(neighbors);
  }
  throw std::invalid_argument("impute: unknown psi kind");
}

Eigen::VectorXd ridge_normal_solve(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double lambda) {
  if (x.rows() != y.size())
    throw std::invalid_argument("ridge_normal_solve: row count mismatch");
  if (lambda < 0.0)
    throw std::invalid_argument("ridge_normal_solve: lambda must be >= 0");
  Eigen::MatrixXd normal = x.transpose() * x;
  normal.diagonal().array() += lambda;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("ridge_normal_solve: factorization failed");
  return ldlt.solve(x.transpose() * y);
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "dot" || name == "dot_product") return KernelKind::dot_product;
  if (name == "rbf") return KernelKind::rbf;
  if (name == "matern" || name == "matern32") return KernelKind::matern32;
  throw std::invalid_argument("unknown kernel: " + name);
}

std::string kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::dot_product: return "dot";
    case KernelKind::rbf: return "rbf";
    case KernelKind::matern32: return "matern";
  }
  return "?";
}

PsiKind psi_kind_from_name(const std::string& name) {
  if (name == "gp") return PsiKind::gp;
  if (name == "linear") return PsiKind::linear;
  throw std::invalid_argument("unknown imputer: " + name);
}

std::string psi_kind_name(PsiKind kind) {
  return kind == PsiKind::gp ? "gp" : "linear";
}

}  // namespace cocoa
