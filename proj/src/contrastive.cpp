#include "cocoa/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cocoa/rng.hpp"

namespace cocoa {

SiameseClassifier::SiameseClassifier(Mlp embedding, double radius,
                                     std::vector<double> mean,
                                     std::vector<double> sd, double scale)
    : embedding_(std::move(embedding)),
      radius_(radius),
      mean_(std::move(mean)),
      sd_(std::move(sd)),
      scale_(scale) {
  if (radius_ < 0.0)
    throw std::invalid_argument("SiameseClassifier: radius must be >= 0");
  if (mean_.size() != embedding_.input_size() || sd_.size() != mean_.size())
    throw std::invalid_argument(
        "SiameseClassifier: standardization size mismatch");
}

Eigen::VectorXd SiameseClassifier::embed(const std::vector<double>& x) const {
  if (x.size() != mean_.size())
    throw std::invalid_argument("SiameseClassifier: dimension mismatch");
  Eigen::VectorXd z(static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k)
    z(static_cast<Eigen::Index>(k)) = (x[k] - mean_[k]) / sd_[k];
  return embedding_.forward(z);
}

Eigen::MatrixXd SiameseClassifier::embed_all(const Dataset& ds) const {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(mean_.size()),
                    static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < mean_.size(); ++k)
      z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          (ds[i].x[k] - mean_[k]) / sd_[k];
  return embedding_.forward_batch(z);
}

double SiameseClassifier::distance(const std::vector<double>& a,
                                   const std::vector<double>& b) const {
  return (embed(a) - embed(b)).norm();
}

bool SiameseClassifier::predict_similar(const std::vector<double>& a,
                                        const std::vector<double>& b) const {
  return distance(a, b) <= radius_;
}

void SiameseClassifier::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("SiameseClassifier::save: cannot open " + path);
  out << "COCOACLF 1\n";
  out << "radius " << format_double(radius_) << '\n';
  out << "scale " << format_double(scale_) << '\n';
  out << "dim " << mean_.size() << '\n';
  out << "mean";
  for (const double v : mean_) out << ' ' << format_double(v);
  out << "\nsd";
  for (const double v : sd_) out << ' ' << format_double(v);
  out << '\n';
  write_mlp(embedding_, out);
  if (!out) throw std::runtime_error("SiameseClassifier::save: write failed");
}

SiameseClassifier SiameseClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("SiameseClassifier::load: cannot open " + path);
  std::string magic, key;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != "COCOACLF" || version != 1)
    throw std::runtime_error("SiameseClassifier::load: bad header");
  double radius = 0.0, scale = 0.0;
  std::size_t dim = 0;
  in >> key >> radius;
  if (key != "radius") throw std::runtime_error("classifier: expected radius");
  in >> key >> scale;
  if (key != "scale") throw std::runtime_error("classifier: expected scale");
  in >> key >> dim;
  if (key != "dim") throw std::runtime_error("classifier: expected dim");
  std::vector<double> mean(dim), sd(dim);
  in >> key;
  if (key != "mean") throw std::runtime_error("classifier: expected mean");
  for (double& v : mean) in >> v;
  in >> key;
  if (key != "sd") throw std::runtime_error("classifier: expected sd");
  for (double& v : sd) in >> v;
  if (!in) throw std::runtime_error("classifier: truncated standardization");
  Mlp net = read_mlp(in);
  return SiameseClassifier(std::move(net), radius, std::move(mean),
                           std::move(sd), scale);
}

std::pair<std::vector<PairExample>, std::vector<PairExample>> build_pairs(
    const Dataset& ds, double epsilon, std::size_t max_pairs_per_anchor,
    std::uint64_t seed) {
  if (ds.size() < 2)
    throw std::invalid_argument("build_pairs: need at least 2 samples");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("build_pairs: epsilon must be positive");

  const std::size_t n = ds.size();
  std::vector<std::size_t> group[2];
  for (std::size_t i = 0; i < n; ++i)
    group[ds[i].t].push_back(i);
  if (group[0].size() < 2 && group[1].size() < 2)
    throw std::runtime_error("insufficient pairs: no same-treatment pair exists");

  Rng rng = Rng(seed).split("contrastive.pairs");
  std::vector<PairExample> pos, neg;
  std::vector<std::size_t> eligible_pos, eligible_neg;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mates = group[ds[i].t];
    if (mates.size() < 2) continue;
    eligible_pos.clear();
    eligible_neg.clear();
    for (const std::size_t j : mates) {
      if (j == i) continue;
      (std::abs(ds[i].y - ds[j].y) <= epsilon ? eligible_pos : eligible_neg)
          .push_back(j);
    }
    auto sample_into = [&](std::vector<std::size_t>& pool, int label,
                           std::vector<PairExample>& out) {
      const std::size_t take = std::min(max_pairs_per_anchor, pool.size());
      // Partial Fisher-Yates: the first `take` entries become a uniform
      // sample without replacement.
      for (std::size_t k = 0; k < take; ++k) {
        const std::size_t r = k + static_cast<std::size_t>(
                                      rng.below(pool.size() - k));
        std::swap(pool[k], pool[r]);
        const std::size_t j = pool[k];
        out.push_back(PairExample{std::min(i, j), std::max(i, j), label});
      }
    };
    sample_into(eligible_pos, 1, pos);
    sample_into(eligible_neg, 0, neg);
  }

  auto dedupe = [](std::vector<PairExample>& v) {
    std::sort(v.begin(), v.end(), [](const PairExample& a, const PairExample& b) {
      return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });
    v.erase(std::unique(v.begin(), v.end(),
                        [](const PairExample& a, const PairExample& b) {
                          return a.i == b.i && a.j == b.j;
                        }),
            v.end());
  };
  dedupe(pos);
  dedupe(neg);
  return {std::move(pos), std::move(neg)};
}

double epsilon_from_percentile(const Dataset& ds, double percentile,
                               std::uint64_t seed) {
  if (!(percentile > 0.0 && percentile <= 100.0))
    throw std::invalid_argument("epsilon_from_percentile: percentile in (0,100]");
  std::vector<std::size_t> group[2];
  for (std::size_t i = 0; i < ds.size(); ++i) group[ds[i].t].push_back(i);

  constexpr std::size_t kMaxGaps = 500000;
  std::size_t total_pairs = 0;
  for (const auto& g : group)
    total_pairs += g.size() >= 2 ? g.size() * (g.size() - 1) / 2 : 0;
  if (total_pairs == 0)
    throw std::runtime_error("insufficient pairs: no same-treatment pair exists");

  std::vector<double> gaps;
  if (total_pairs <= kMaxGaps) {
    gaps.reserve(total_pairs);
    for (const auto& g : group)
      for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = a + 1; b < g.size(); ++b)
          gaps.push_back(std::abs(ds[g[a]].y - ds[g[b]].y));
  } else {
    Rng rng = Rng(seed).split("contrastive.epsilon");
    gaps.reserve(kMaxGaps);
    for (std::size_t k = 0; k < kMaxGaps; ++k) {
      const auto& g = group[0].size() >= 2 && group[1].size() >= 2
                          ? group[rng.below(2)]
                          : (group[0].size() >= 2 ? group[0] : group[1]);
      const std::size_t a = static_cast<std::size_t>(rng.below(g.size()));
      std::size_t b = static_cast<std::size_t>(rng.below(g.size() - 1));
      if (b >= a) ++b;
      gaps.push_back(std::abs(ds[g[a]].y - ds[g[b]].y));
    }
  }
  std::sort(gaps.begin(), gaps.end());
  const std::size_t rank = std::min(
      gaps.size() - 1,
      static_cast<std::size_t>(
          std::ceil(percentile / 100.0 * static_cast<double>(gaps.size()))) -
          std::size_t{1});
  const double eps = gaps[rank];
  if (eps > 0.0) return eps;
  // Degenerate duplicate outcomes: fall back to the smallest positive gap.
  for (const double g : gaps)
    if (g > 0.0) return g;
  return 1e-12;
}

double resolve_epsilon(const Dataset& ds, const ContrastiveSpec& spec) {
  if (spec.epsilon > 0.0) return spec.epsilon;
  return epsilon_from_percentile(ds, spec.epsilon_percentile,
                                 Rng(spec.seed).next_u64());
}

namespace {

struct Standardization {
  std::vector<double> mean, sd;
};

Standardization fit_standardization(const Dataset& ds) {
  const std::size_t d = ds.dim();
  const auto n = static_cast<double>(ds.size());
  Standardization st{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& s : ds.samples())
    for (std::size_t k = 0; k < d; ++k) st.mean[k] += s.x[k];
  for (std::size_t k = 0; k < d; ++k) st.mean[k] /= n;
  for (const auto& s : ds.samples())
    for (std::size_t k = 0; k < d; ++k) {
      const double c = s.x[k] - st.mean[k];
      st.sd[k] += c * c;
    }
  for (std::size_t k = 0; k < d; ++k) {
    st.sd[k] = std::sqrt(st.sd[k] / n);
    if (st.sd[k] == 0.0) st.sd[k] = 1.0;  // constant feature
  }
  return st;
}

double stable_softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

SiameseClassifier fit_contrastive(const Dataset& ds,
                                  const ContrastiveSpec& spec) {
  if (!(spec.radius > 0.0))
    throw std::invalid_argument("fit_contrastive: radius must be positive");
  const std::size_t d = ds.dim();

  MlpSpec embed_spec = spec.embedding;
  if (embed_spec.layer_sizes.empty())
    embed_spec.layer_sizes = {d, 64, 64, 16};
  if (embed_spec.layer_sizes.front() == 0)  // input size filled at fit time
    embed_spec.layer_sizes.front() = d;
  if (embed_spec.layer_sizes.front() != d)
    throw std::invalid_argument("fit_contrastive: embedding input != d");
  embed_spec.output_activation = OutputActivation::identity;

  const Rng root(spec.seed);
  embed_spec.init_seed = root.split("contrastive.init").next_u64();

  const double epsilon = resolve_epsilon(ds, spec);
  auto [pos, neg] = build_pairs(ds, epsilon, spec.max_pairs_per_anchor,
                                root.split("contrastive.sample").next_u64());

  const Standardization st = fit_standardization(ds);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(d),
                    static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < d; ++k)
      z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          (ds[i].x[k] - st.mean[k]) / st.sd[k];

  std::vector<PairExample> pairs = std::move(pos);
  pairs.insert(pairs.end(), neg.begin(), neg.end());

  Mlp net(embed_spec);
  const std::size_t p = net.param_count();
  // Joint parameter vector: network weights plus the sharpness scale s.
  std::vector<double> params = net.parameters();
  params.push_back(1.0);
  Optimizer opt(spec.training.optimizer, spec.training.learning_rate,
                params.size());
  Rng shuffle_rng = root.split("contrastive.batches");

  const std::size_t batch = std::max<std::size_t>(1, spec.training.batch_size);
  std::vector<double> grad(params.size());
  std::vector<double> net_grad(p);
  for (std::size_t epoch = 0; epoch < spec.training.epochs; ++epoch) {
    shuffle_rng.shuffle(pairs);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += batch) {
      const std::size_t b = std::min(batch, pairs.size() - start);
      Eigen::MatrixXd left(static_cast<Eigen::Index>(d),
                           static_cast<Eigen::Index>(b));
      Eigen::MatrixXd right(static_cast<Eigen::Index>(d),
                            static_cast<Eigen::Index>(b));
      for (std::size_t k = 0; k < b; ++k) {
        left.col(static_cast<Eigen::Index>(k)) =
            z.col(static_cast<Eigen::Index>(pairs[start + k].i));
        right.col(static_cast<Eigen::Index>(k)) =
            z.col(static_cast<Eigen::Index>(pairs[start + k].j));
      }
      Mlp::Trace trace_l, trace_r;
      const Eigen::MatrixXd ul = net.forward_trace(left, trace_l);
      const Eigen::MatrixXd ur = net.forward_trace(right, trace_r);

      const double s = params[p];
      const double inv_b = 1.0 / static_cast<double>(b);
      Eigen::MatrixXd dul(ul.rows(), ul.cols());
      double batch_loss = 0.0;
      double ds_grad = 0.0;
      for (std::size_t k = 0; k < b; ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        const Eigen::VectorXd diff = ul.col(col) - ur.col(col);
        const double dist = diff.norm();
        const double margin = spec.radius - dist;
        const double logit = s * margin;
        const double y = static_cast<double>(pairs[start + k].label);
        batch_loss += stable_softplus(logit) - y * logit;
        const double dlogit = (1.0 / (1.0 + std::exp(-logit)) - y) * inv_b;
        ds_grad += dlogit * margin;
        const double ddist = -dlogit * s;
        if (dist > 1e-300)
          dul.col(col) = (ddist / dist) * diff;
        else
          dul.col(col).setZero();
      }
      batch_loss *= inv_b;
      epoch_loss += batch_loss * static_cast<double>(b);

      std::fill(net_grad.begin(), net_grad.end(), 0.0);
      net.backward_trace(trace_l, dul, net_grad);
      net.backward_trace(trace_r, -dul, net_grad);
      if (spec.training.l2 > 0.0)
        net.add_weight_decay(spec.training.l2, net_grad);
      std::copy(net_grad.begin(), net_grad.end(), grad.begin());
      grad[p] = ds_grad;
      opt.step(params, grad);
      if (params[p] < 1e-6) params[p] = 1e-6;  // keep sharpness positive
      net.set_parameters({params.begin(), params.begin() +
                                              static_cast<std::ptrdiff_t>(p)});
    }
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("fit_contrastive: loss diverged at epoch " +
                               std::to_string(epoch));
  }

  return SiameseClassifier(std::move(net), spec.radius, st.mean, st.sd,
                           params[p]);
}

std::vector<std::size_t> neighbors_from_embeddings(
    const Eigen::MatrixXd& embeddings, const std::vector<int>& treatments,
    std::size_t i, double radius) {
  if (i >= treatments.size())
    throw std::invalid_argument("neighbors: index out of range");
  const int want = 1 - treatments[i];
  std::vector<std::pair<double, std::size_t>> hits;
  for (std::size_t j = 0; j < treatments.size(); ++j) {
    if (treatments[j] != want) continue;
    const double dist = (embeddings.col(static_cast<Eigen::Index>(j)) -
                         embeddings.col(static_cast<Eigen::Index>(i)))
                            .norm();
    if (dist <= radius) hits.emplace_back(dist, j);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::size_t> out;
  out.reserve(hits.size());
  for (const auto& hit : hits) out.push_back(hit.second);
  return out;
}

std::vector<std::size_t> neighbors(const SiameseClassifier& clf,
                                   const Dataset& ds, std::size_t i) {
  if (i >= ds.size())
    throw std::invalid_argument("neighbors: index out of range");
  const Eigen::MatrixXd emb = clf.embed_all(ds);
  std::vector<int> treatments(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) treatments[k] = ds[k].t;
  return neighbors_from_embeddings(emb, treatments, i, clf.radius());
}

}  // namespace cocoa
