#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cocoa/imputers.hpp"
#include "cocoa/rng.hpp"
#include "test_support.hpp"

using namespace cocoa;

namespace {

NeighborSet random_neighbors(std::size_t n, std::size_t d, Rng& rng) {
  NeighborSet nb;
  nb.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  nb.outcomes.resize(static_cast<Eigen::Index>(n));
  nb.query.resize(static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < nb.points.rows(); ++r) {
    for (Eigen::Index c = 0; c < nb.points.cols(); ++c)
      nb.points(r, c) = rng.normal();
    nb.outcomes(r) = rng.normal(0.0, 2.0);
  }
  for (Eigen::Index c = 0; c < nb.query.size(); ++c) nb.query(c) = rng.normal();
  return nb;
}

// Oracle: assemble the Gram system and solve it with plain Gaussian
// elimination, then evaluate k_x . alpha. Mirrors the centering convention.
double gp_oracle(const NeighborSet& nb, const KernelSpec& kernel,
                 double jitter) {
  const auto n = static_cast<std::size_t>(nb.points.rows());
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a[i][j] =
          kernel_eval(kernel, nb.points.row(static_cast<Eigen::Index>(i)),
                      nb.points.row(static_cast<Eigen::Index>(j))) +
          (i == j ? jitter : 0.0);
  double mean = 0.0;
  for (Eigen::Index i = 0; i < nb.outcomes.size(); ++i) mean += nb.outcomes(i);
  mean /= static_cast<double>(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = nb.outcomes(static_cast<Eigen::Index>(i)) - mean;
  const std::vector<double> alpha = testsup::gaussian_solve(a, y);
  double pred = mean;
  for (std::size_t i = 0; i < n; ++i)
    pred += kernel_eval(kernel, nb.query,
                        nb.points.row(static_cast<Eigen::Index>(i))) *
            alpha[i];
  return pred;
}

// Oracle: ridge normal equations through Gaussian elimination with the same
// lambda convention as linear_impute.
double linear_oracle(const NeighborSet& nb) {
  const auto n = static_cast<std::size_t>(nb.points.rows());
  const auto d = static_cast<std::size_t>(nb.points.cols());
  const std::size_t p = d + 1;
  std::vector<std::vector<double>> x(n, std::vector<double>(p, 1.0));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c)
      x[r][c + 1] = nb.points(static_cast<Eigen::Index>(r),
                              static_cast<Eigen::Index>(c));
  std::vector<std::vector<double>> xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t r = 0; r < n; ++r) xtx[i][j] += x[r][i] * x[r][j];
    for (std::size_t r = 0; r < n; ++r)
      xty[i] += x[r][i] * nb.outcomes(static_cast<Eigen::Index>(r));
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < p; ++i) trace += xtx[i][i];
  const double lambda = 1e-8 * trace / static_cast<double>(p);
  for (std::size_t i = 0; i < p; ++i) xtx[i][i] += lambda;
  const std::vector<double> beta = testsup::gaussian_solve(xtx, xty);
  double pred = beta[0];
  for (std::size_t c = 0; c < d; ++c)
    pred += beta[c + 1] * nb.query(static_cast<Eigen::Index>(c));
  return pred;
}

}  // namespace

TEST_CASE("kernel_eval: closed-form values") {
  KernelSpec rbf{KernelKind::rbf, 0.0, 1.0, 0.0};
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 2.0;
  b << 1.0, 2.0;
  CHECK(kernel_eval(rbf, a, b) == doctest::Approx(1.0));

  KernelSpec dotk{KernelKind::dot_product, 0.0, 1.0, 0.0};
  b << 3.0, 4.0;
  CHECK(kernel_eval(dotk, a, b) == doctest::Approx(11.0));

  KernelSpec dotb{KernelKind::dot_product, 2.5, 1.0, 0.0};
  CHECK(kernel_eval(dotb, a, b) == doctest::Approx(13.5));

  // matern32 at r = length_scale: (1 + sqrt(3)) * exp(-sqrt(3)).
  KernelSpec mat{KernelKind::matern32, 0.0, 1.0, 0.0};
  Eigen::VectorXd c(1), d(1);
  c << 0.0;
  d << 1.0;
  const double want = (1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0));
  CHECK(kernel_eval(mat, c, d) == doctest::Approx(want).epsilon(1e-10));
  CHECK(kernel_eval(mat, c, d) == doctest::Approx(0.4834).epsilon(1e-4));

  Eigen::VectorXd wrong(3);
  wrong.setZero();
  CHECK_THROWS(kernel_eval(rbf, a, wrong));
}

TEST_CASE("gp_impute: single matching neighbor returns its outcome") {
  NeighborSet nb;
  nb.points.resize(1, 2);
  nb.points << 0.4, -1.2;
  nb.outcomes.resize(1);
  nb.outcomes << 3.25;
  nb.query.resize(2);
  nb.query << 0.4, -1.2;
  for (const KernelKind kind :
       {KernelKind::dot_product, KernelKind::rbf, KernelKind::matern32}) {
    KernelSpec spec{kind, 1.0, 1.0, 0.0};
    CHECK(gp_impute(nb, spec) == doctest::Approx(3.25).epsilon(1e-12));
  }
}

TEST_CASE("gp_impute: zero outcomes impute zero") {
  Rng rng(13);
  NeighborSet nb = random_neighbors(6, 3, rng);
  nb.outcomes.setZero();
  KernelSpec spec{KernelKind::rbf, 0.0, 1.0, 1e-6};
  CHECK(gp_impute(nb, spec) == doctest::Approx(0.0));
}

TEST_CASE("gp_impute matches the dense elimination oracle") {
  Rng rng(29);
  NeighborSet nb = random_neighbors(5, 3, rng);
  KernelSpec spec{KernelKind::rbf, 0.0, 1.3, 1e-6};
  CHECK(gp_impute(nb, spec) ==
        doctest::Approx(gp_oracle(nb, spec, spec.jitter)).epsilon(1e-8));
}

TEST_CASE("gp interpolation: with jitter 0 the posterior mean hits the data") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    NeighborSet nb = random_neighbors(6, 2, rng);
    KernelSpec spec{KernelKind::rbf, 0.0, 1.0, 0.0};
    const Eigen::Index k = trial % nb.points.rows();
    nb.query = nb.points.row(k);
    CHECK(gp_impute(nb, spec) ==
          doctest::Approx(nb.outcomes(k)).epsilon(1e-6));
  }
}

TEST_CASE("gp_impute is linear in the outcomes") {
  Rng rng(37);
  NeighborSet nb = random_neighbors(8, 3, rng);
  KernelSpec spec{KernelKind::matern32, 0.0, 2.0, 1e-6};
  NeighborSet nb1 = nb, nb2 = nb;
  for (Eigen::Index i = 0; i < nb.outcomes.size(); ++i) {
    nb1.outcomes(i) = rng.normal();
    nb2.outcomes(i) = rng.normal();
  }
  const double a = 2.25, b = -0.75;
  NeighborSet mix = nb;
  mix.outcomes = a * nb1.outcomes + b * nb2.outcomes;
  CHECK(gp_impute(mix, spec) ==
        doctest::Approx(a * gp_impute(nb1, spec) + b * gp_impute(nb2, spec))
            .epsilon(1e-10));
}

TEST_CASE("gp_impute: jitter escalation keeps singular dot-product systems solvable") {
  // 10 neighbors in 2-D: the dot-product Gram matrix has rank <= 3.
  Rng rng(41);
  NeighborSet nb = random_neighbors(10, 2, rng);
  KernelSpec spec{KernelKind::dot_product, 1.0, 1.0, 0.0};
  CHECK(std::isfinite(gp_impute(nb, spec)));
}

TEST_CASE("linear_impute: exact linear data is reproduced") {
  // y = 2x + 1 on five 1-D points, query at x = 10 -> 21.
  NeighborSet nb;
  nb.points.resize(5, 1);
  nb.points << -2.0, -1.0, 0.0, 1.0, 2.0;
  nb.outcomes.resize(5);
  for (Eigen::Index i = 0; i < 5; ++i)
    nb.outcomes(i) = 2.0 * nb.points(i, 0) + 1.0;
  nb.query.resize(1);
  nb.query << 10.0;
  CHECK(linear_impute(nb) == doctest::Approx(21.0).epsilon(1e-6));
}

TEST_CASE("linear_impute survives rank-deficient neighbor sets") {
  NeighborSet nb;
  nb.points.resize(4, 2);
  for (Eigen::Index r = 0; r < 4; ++r) {
    nb.points(r, 0) = 1.5;
    nb.points(r, 1) = -0.5;
  }
  nb.outcomes.resize(4);
  nb.outcomes << 1.0, 2.0, 3.0, 4.0;
  nb.query.resize(2);
  nb.query << 1.5, -0.5;
  const double pred = linear_impute(nb);
  CHECK(std::isfinite(pred));
  // All mass sits at one x; the ridge solution predicts near the mean there.
  CHECK(pred == doctest::Approx(2.5).epsilon(1e-3));
}

TEST_CASE("linear_impute matches the normal-equation oracle") {
  Rng rng(43);
  NeighborSet nb = random_neighbors(8, 3, rng);
  CHECK(linear_impute(nb) == doctest::Approx(linear_oracle(nb)).epsilon(1e-8));
}

TEST_CASE("oracle equivalence over 100 random instances") {
  // Instances must be numerically well-posed for two independent solvers
  // to agree at 1e-8: the gp Gram gets a 1e-4 jitter floor and the linear
  // fits are overdetermined (n >= d + 2).
  Rng rng(47);
  int gp_count = 0, lin_count = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + static_cast<std::size_t>(rng.below(10));
    if (trial % 2 == 0) {
      const std::size_t n = 1 + static_cast<std::size_t>(rng.below(50));
      NeighborSet nb = random_neighbors(n, d, rng);
      KernelSpec spec{trial % 4 == 0 ? KernelKind::rbf : KernelKind::matern32,
                      0.0, 1.0 + rng.uniform(), 1e-4};
      const double got = gp_impute(nb, spec);
      const double want = gp_oracle(nb, spec, spec.jitter);
      CHECK(std::abs(got - want) <=
            1e-8 * std::max(1.0, std::abs(want)));
      ++gp_count;
    } else {
      const std::size_t n =
          d + 2 + static_cast<std::size_t>(rng.below(48 - d));
      NeighborSet nb = random_neighbors(n, d, rng);
      const double got = linear_impute(nb);
      const double want = linear_oracle(nb);
      CHECK(std::abs(got - want) <=
            1e-8 * std::max(1.0, std::abs(want)));
      ++lin_count;
    }
  }
  CHECK(gp_count + lin_count == 100);
}

TEST_CASE("imputations are invariant to neighbor order") {
  Rng rng(53);
  NeighborSet nb = random_neighbors(12, 3, rng);
  NeighborSet shuffled = nb;
  std::vector<Eigen::Index> perm{7, 2, 9, 0, 11, 4, 1, 10, 3, 8, 5, 6};
  for (std::size_t k = 0; k < perm.size(); ++k) {
    shuffled.points.row(static_cast<Eigen::Index>(k)) = nb.points.row(perm[k]);
    shuffled.outcomes(static_cast<Eigen::Index>(k)) = nb.outcomes(perm[k]);
  }
  KernelSpec spec{KernelKind::rbf, 0.0, 1.0, 1e-6};
  CHECK(gp_impute(nb, spec) ==
        doctest::Approx(gp_impute(shuffled, spec)).epsilon(1e-10));
  CHECK(linear_impute(nb) ==
        doctest::Approx(linear_impute(shuffled)).epsilon(1e-10));
}

TEST_CASE("impute dispatches on psi kind") {
  Rng rng(59);
  NeighborSet nb = random_neighbors(5, 2, rng);
  KernelSpec spec{KernelKind::rbf, 0.0, 1.0, 1e-6};
  CHECK(impute(PsiKind::gp, nb, spec) == gp_impute(nb, spec));
  CHECK(impute(PsiKind::linear, nb, std::nullopt) == linear_impute(nb));
  CHECK_THROWS(impute(PsiKind::gp, nb, std::nullopt));
}

TEST_CASE("impute rejects empty neighbor sets") {
  NeighborSet nb;
  nb.points.resize(0, 2);
  nb.outcomes.resize(0);
  nb.query.resize(2);
  nb.query << 0.0, 0.0;
  CHECK_THROWS(linear_impute(nb));
  CHECK_THROWS(gp_impute(nb, KernelSpec{}));
}
