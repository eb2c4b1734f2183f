#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cocoa/contrastive.hpp"
#include "cocoa/rng.hpp"
#include "test_support.hpp"

using namespace cocoa;

namespace {

Dataset three_outcomes() {
  // Outcomes {1.0, 1.05, 9.0}, all control.
  std::vector<FactualSample> s;
  s.push_back({{0.0}, 0, 1.0, {}, {}});
  s.push_back({{1.0}, 0, 1.05, {}, {}});
  s.push_back({{2.0}, 0, 9.0, {}, {}});
  return Dataset(1, "three", std::move(s), false);
}

// Two outcome clusters separated by the sign of x1; outcome similarity is
// decided entirely by that coordinate.
Dataset clustered(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FactualSample> s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool hi = i % 2 == 0;
    FactualSample f;
    f.x = {(hi ? 2.0 : -2.0) + 0.25 * rng.normal(), rng.normal()};
    f.t = rng.bernoulli(0.5) ? 1 : 0;
    f.y = (hi ? 10.0 : 0.0) + 0.05 * rng.normal();
    s.push_back(std::move(f));
  }
  return Dataset(2, "clusters", std::move(s), false);
}

SiameseClassifier identity_classifier_1d(double radius) {
  MlpSpec spec;
  spec.layer_sizes = {1, 1};
  spec.activation = Activation::relu;
  spec.output_activation = OutputActivation::identity;
  Mlp net(spec);
  net.set_parameters({1.0, 0.0});  // e(x) = x
  return SiameseClassifier(std::move(net), radius, {0.0}, {1.0}, 1.0);
}

Dataset line_1d(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FactualSample> s;
  for (int i = 0; i < 40; ++i) {
    FactualSample f;
    f.x = {rng.uniform(-5.0, 5.0)};
    f.t = i % 2;
    f.y = rng.normal();
    s.push_back(std::move(f));
  }
  return Dataset(1, "line", std::move(s), false);
}

}  // namespace

TEST_CASE("build_pairs enumerates all unordered pairs without a cap") {
  const Dataset ds = three_outcomes();
  const auto [pos, neg] = build_pairs(ds, 0.1, 1000, 1);
  REQUIRE(pos.size() == 1);
  CHECK(pos[0].i == 0);
  CHECK(pos[0].j == 1);
  CHECK(pos[0].label == 1);
  REQUIRE(neg.size() == 2);
  std::set<std::pair<std::size_t, std::size_t>> got;
  for (const auto& p : neg) {
    CHECK(p.label == 0);
    got.insert({p.i, p.j});
  }
  CHECK(got == std::set<std::pair<std::size_t, std::size_t>>{{0, 2}, {1, 2}});
}

TEST_CASE("build_pairs: huge epsilon labels every pair positive") {
  const Dataset ds = three_outcomes();
  const auto [pos, neg] = build_pairs(ds, 1e12, 1000, 1);
  CHECK(pos.size() == 3);
  CHECK(neg.empty());
}

TEST_CASE("build_pairs errors when no same-treatment pair exists") {
  std::vector<FactualSample> s;
  s.push_back({{0.0}, 0, 1.0, {}, {}});
  s.push_back({{1.0}, 1, 2.0, {}, {}});
  const Dataset ds(1, "single", std::move(s), false);
  CHECK_THROWS_WITH_AS(build_pairs(ds, 0.5, 10, 1),
                       "insufficient pairs: no same-treatment pair exists",
                       std::runtime_error);
}

TEST_CASE("build_pairs: pairs agree in treatment and labels match epsilon") {
  const Dataset ds = clustered(60, 5);
  const double eps = 1.0;
  const auto [pos, neg] = build_pairs(ds, eps, 7, 3);
  CHECK(!pos.empty());
  CHECK(!neg.empty());
  for (const auto& p : pos) {
    CHECK(p.i < p.j);
    CHECK(ds[p.i].t == ds[p.j].t);
    CHECK(std::abs(ds[p.i].y - ds[p.j].y) <= eps);
  }
  for (const auto& p : neg) {
    CHECK(p.i < p.j);
    CHECK(ds[p.i].t == ds[p.j].t);
    CHECK(std::abs(ds[p.i].y - ds[p.j].y) > eps);
  }
}

TEST_CASE("build_pairs: the anchor cap bounds the pair budget") {
  const Dataset ds = clustered(80, 9);
  const std::size_t cap = 3;
  const auto [pos, neg] = build_pairs(ds, 0.5, cap, 11);
  CHECK(pos.size() <= ds.size() * cap);
  CHECK(neg.size() <= ds.size() * cap);

  // With a generous cap the enumeration is exhaustive: every eligible
  // unordered pair appears exactly once.
  const auto [full_pos, full_neg] = build_pairs(ds, 0.5, 10000, 11);
  std::size_t want_pos = 0, want_neg = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      if (ds[i].t != ds[j].t) continue;
      (std::abs(ds[i].y - ds[j].y) <= 0.5 ? want_pos : want_neg) += 1;
    }
  CHECK(full_pos.size() == want_pos);
  CHECK(full_neg.size() == want_neg);
  CHECK(pos.size() < full_pos.size());  // the cap actually binds here
}

TEST_CASE("epsilon percentile mode picks a small same-treatment gap") {
  const Dataset ds = clustered(50, 13);
  const double eps = epsilon_from_percentile(ds, 10.0, 1);
  CHECK(eps > 0.0);
  // The 10th percentile of gaps must be below the cluster separation.
  CHECK(eps < 5.0);
}

TEST_CASE("fit_contrastive separates outcome clusters") {
  const Dataset train = clustered(120, 21);
  const Dataset held = clustered(60, 22);

  ContrastiveSpec spec;
  spec.epsilon = 1.0;
  spec.radius = 1.0;
  spec.max_pairs_per_anchor = 20;
  spec.embedding.layer_sizes = {2, 16, 8};
  spec.training.epochs = 30;
  spec.training.batch_size = 64;
  spec.seed = 3;
  const SiameseClassifier clf = fit_contrastive(train, spec);

  // Held-out pair accuracy: se same-cluster pairs are similar, cross are not.
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < held.size(); ++i)
    for (std::size_t j = i + 1; j < held.size(); ++j) {
      if (held[i].t != held[j].t) continue;
      const bool want = std::abs(held[i].y - held[j].y) <= spec.epsilon;
      const bool got = clf.predict_similar(held[i].x, held[j].x);
      correct += want == got ? 1 : 0;
      ++total;
    }
  REQUIRE(total > 100);
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.9);
}

TEST_CASE("fit_contrastive is deterministic") {
  const Dataset ds = clustered(60, 33);
  ContrastiveSpec spec;
  spec.epsilon = 1.0;
  spec.embedding.layer_sizes = {2, 8, 4};
  spec.training.epochs = 5;
  spec.seed = 77;
  const SiameseClassifier a = fit_contrastive(ds, spec);
  const SiameseClassifier b = fit_contrastive(ds, spec);
  CHECK(a.embedding().parameters() == b.embedding().parameters());
  CHECK(a.scale() == b.scale());
}

TEST_CASE("fit_contrastive accepts weight decay") {
  const Dataset ds = clustered(40, 35);
  ContrastiveSpec spec;
  spec.epsilon = 1.0;
  spec.embedding.layer_sizes = {2, 8, 4};
  spec.training.epochs = 3;
  spec.training.l2 = 0.01;
  spec.seed = 6;
  const SiameseClassifier clf = fit_contrastive(ds, spec);
  for (const double v : clf.embedding().parameters())
    CHECK(std::isfinite(v));
}

TEST_CASE("classifier decision is reflexive and symmetric") {
  const Dataset ds = clustered(40, 41);
  ContrastiveSpec spec;
  spec.epsilon = 1.0;
  spec.embedding.layer_sizes = {2, 8, 4};
  spec.training.epochs = 3;
  spec.seed = 5;
  const SiameseClassifier clf = fit_contrastive(ds, spec);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(clf.predict_similar(ds[i].x, ds[i].x));  // distance 0 <= radius
    for (std::size_t j = 0; j < 10; ++j)
      CHECK(clf.predict_similar(ds[i].x, ds[j].x) ==
            clf.predict_similar(ds[j].x, ds[i].x));
  }
}

TEST_CASE("neighbors with identity embedding equals a brute-force filter") {
  const Dataset ds = line_1d(47);
  const double radius = 1.5;
  const SiameseClassifier clf = identity_classifier_1d(radius);
  for (std::size_t i = 0; i < ds.size(); i += 7) {
    const std::vector<std::size_t> got = neighbors(clf, ds, i);
    std::vector<std::pair<double, std::size_t>> want;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (ds[j].t != 1 - ds[i].t) continue;
      const double dist = std::abs(ds[j].x[0] - ds[i].x[0]);
      if (dist <= radius) want.emplace_back(dist, j);
    }
    std::sort(want.begin(), want.end());
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k)
      CHECK(got[k] == want[k].second);
  }
}

TEST_CASE("neighbors: degenerate radii") {
  const Dataset ds = line_1d(53);
  const SiameseClassifier zero = identity_classifier_1d(0.0);
  CHECK(neighbors(zero, ds, 0).empty());

  const SiameseClassifier all = identity_classifier_1d(1e300);
  const std::vector<std::size_t> got = neighbors(all, ds, 0);
  std::size_t opposite = 0;
  for (const auto& s : ds.samples())
    if (s.t == 1 - ds[0].t) ++opposite;
  CHECK(got.size() == opposite);
  for (const std::size_t j : got) CHECK(ds[j].t == 1 - ds[0].t);
}

TEST_CASE("neighbors are monotone in the radius") {
  const Dataset ds = line_1d(59);
  const std::vector<std::size_t> small =
      neighbors(identity_classifier_1d(0.8), ds, 3);
  const std::vector<std::size_t> large =
      neighbors(identity_classifier_1d(2.0), ds, 3);
  const std::set<std::size_t> large_set(large.begin(), large.end());
  CHECK(small.size() <= large.size());
  for (const std::size_t j : small) CHECK(large_set.count(j) == 1);
}

TEST_CASE("classifier checkpoint round-trips") {
  const Dataset ds = clustered(40, 61);
  ContrastiveSpec spec;
  spec.epsilon = 1.0;
  spec.embedding.layer_sizes = {2, 8, 4};
  spec.training.epochs = 2;
  spec.seed = 19;
  const SiameseClassifier clf = fit_contrastive(ds, spec);
  const std::string path = testsup::temp_path("clf.ckpt");
  clf.save(path);
  const SiameseClassifier back = SiameseClassifier::load(path);
  CHECK(back.radius() == clf.radius());
  CHECK(back.scale() == clf.scale());
  CHECK(back.feature_mean() == clf.feature_mean());
  CHECK(back.feature_sd() == clf.feature_sd());
  CHECK(back.embedding().parameters() == clf.embedding().parameters());
  // Same decisions after reload.
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(back.distance(ds[i].x, ds[i + 1].x) ==
          doctest::Approx(clf.distance(ds[i].x, ds[i + 1].x)));
  std::remove(path.c_str());
}

TEST_CASE("pair-loss gradient matches finite differences") {
  // The Siamese objective is trained through a bespoke backward path; check
  // it against central differences on a tiny instance (tanh: smooth).
  const Dataset ds = clustered(16, 71);
  ContrastiveSpec spec;
  spec.epsilon = 1.0;
  spec.radius = 1.0;
  spec.embedding.layer_sizes = {2, 4, 2};
  spec.embedding.activation = Activation::tanh;
  spec.seed = 23;

  const double eps_fit = spec.epsilon;
  const auto [pos, neg] = build_pairs(ds, eps_fit, 50, 1);
  std::vector<PairExample> pairs = pos;
  pairs.insert(pairs.end(), neg.begin(), neg.end());
  REQUIRE(!pairs.empty());

  MlpSpec espec = spec.embedding;
  espec.init_seed = 5;
  Mlp net(espec);
  const std::size_t p = net.param_count();

  // Loss as a function of (net params, scale).
  auto loss_at = [&](const std::vector<double>& params) {
    Mlp probe(espec);
    probe.set_parameters(
        {params.begin(), params.begin() + static_cast<std::ptrdiff_t>(p)});
    const double s = params[p];
    double total = 0.0;
    for (const PairExample& pr : pairs) {
      Eigen::VectorXd xi(2), xj(2);
      xi << ds[pr.i].x[0], ds[pr.i].x[1];
      xj << ds[pr.j].x[0], ds[pr.j].x[1];
      const double dist = (probe.forward(xi) - probe.forward(xj)).norm();
      const double logit = s * (spec.radius - dist);
      const double y = pr.label;
      total += std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit))) -
               y * logit;
    }
    return total / static_cast<double>(pairs.size());
  };

  // Analytic gradient via the same code shape fit_contrastive uses.
  std::vector<double> params = net.parameters();
  params.push_back(1.3);
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> net_grad(p, 0.0);
  {
    Eigen::MatrixXd left(2, static_cast<Eigen::Index>(pairs.size()));
    Eigen::MatrixXd right(2, static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      left(0, static_cast<Eigen::Index>(k)) = ds[pairs[k].i].x[0];
      left(1, static_cast<Eigen::Index>(k)) = ds[pairs[k].i].x[1];
      right(0, static_cast<Eigen::Index>(k)) = ds[pairs[k].j].x[0];
      right(1, static_cast<Eigen::Index>(k)) = ds[pairs[k].j].x[1];
    }
    Mlp::Trace tl, tr;
    const Eigen::MatrixXd ul = net.forward_trace(left, tl);
    const Eigen::MatrixXd ur = net.forward_trace(right, tr);
    const double s = params[p];
    const double inv_b = 1.0 / static_cast<double>(pairs.size());
    Eigen::MatrixXd dul(ul.rows(), ul.cols());
    double ds_grad = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const Eigen::VectorXd diff = ul.col(col) - ur.col(col);
      const double dist = diff.norm();
      const double logit = s * (spec.radius - dist);
      const double y = pairs[k].label;
      const double dlogit = (1.0 / (1.0 + std::exp(-logit)) - y) * inv_b;
      ds_grad += dlogit * (spec.radius - dist);
      dul.col(col) = (-dlogit * s / dist) * diff;
    }
    net.backward_trace(tl, dul, net_grad);
    net.backward_trace(tr, -dul, net_grad);
    std::copy(net_grad.begin(), net_grad.end(), grad.begin());
    grad[p] = ds_grad;
  }

  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<double> up = params, down = params;
    up[k] += h;
    down[k] -= h;
    const double fd = (loss_at(up) - loss_at(down)) / (2.0 * h);
    CHECK(std::abs(fd - grad[k]) < 1e-5 * std::max(1.0, std::abs(fd)));
  }
}
