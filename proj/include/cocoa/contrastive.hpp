#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cocoa/dataset.hpp"
#include "cocoa/neuralnet.hpp"

namespace cocoa {

// One training pair for the similarity classifier. Indices refer to the
// dataset's stable order; pairs are canonicalized with i < j. label 1 means
// the outcomes agree within epsilon under the same treatment.
struct PairExample {
  std::size_t i = 0;
  std::size_t j = 0;
  int label = 0;
};

struct ContrastiveSpec {
  // Outcome-similarity sensitivity. A non-positive value selects the
  // percentile mode: epsilon becomes the epsilon_percentile-th percentile
  // of observed same-treatment outcome gaps.
  double epsilon = 0.0;
  double epsilon_percentile = 10.0;
  std::size_t max_pairs_per_anchor = 50;  // per label class
  // Embedding network. Empty layer_sizes defaults to [d, 64, 64, 16].
  MlpSpec embedding;
  TrainSpec training{OptimizerKind::adam, 1e-3, 128, 10, 0.0, 0};
  double radius = 1.0;  // decision threshold in embedding space
  std::uint64_t seed = 0;
};

// Siamese similarity model: two individuals are "similar" when their
// embeddings lie within `radius` of each other. Covariates are z-scored
// with the statistics recorded at fit time before entering the network.
class SiameseClassifier {
 public:
  SiameseClassifier(Mlp embedding, double radius, std::vector<double> mean,
                    std::vector<double> sd, double scale);

  Eigen::VectorXd embed(const std::vector<double>& x) const;
  // Column k holds the embedding of sample k.
  Eigen::MatrixXd embed_all(const Dataset& ds) const;

  double distance(const std::vector<double>& a,
                  const std::vector<double>& b) const;
  // g(x, x'): symmetric by construction.
  bool predict_similar(const std::vector<double>& a,
                       const std::vector<double>& b) const;

  double radius() const { return radius_; }
  double scale() const { return scale_; }
  const Mlp& embedding() const { return embedding_; }
  const std::vector<double>& feature_mean() const { return mean_; }
  const std::vector<double>& feature_sd() const { return sd_; }

  void save(const std::string& path) const;
  static SiameseClassifier load(const std::string& path);

 private:
  Mlp embedding_;
  double radius_;
  std::vector<double> mean_, sd_;
  double scale_;  // trained decision sharpness, inference uses the threshold
};

// Positive/negative pair datasets. Every pair has t_i == t_j; label 1 iff
// |y_i - y_j| <= epsilon. Per anchor at most max_pairs_per_anchor pairs of
// each label are kept, sampled uniformly without replacement; the result is
// deduplicated over unordered pairs. Throws "insufficient pairs" when no
// same-treatment pair exists at all.
std::pair<std::vector<PairExample>, std::vector<PairExample>> build_pairs(
    const Dataset& ds, double epsilon, std::size_t max_pairs_per_anchor,
    std::uint64_t seed);

// Percentile of |y_i - y_j| over same-treatment pairs (exhaustive up to
// ~500k gaps, uniformly subsampled beyond that).
double epsilon_from_percentile(const Dataset& ds, double percentile,
                               std::uint64_t seed);

double resolve_epsilon(const Dataset& ds, const ContrastiveSpec& spec);

// Trains the embedding jointly with a sharpness scale s on
// sigmoid(s * (radius - ||e(z_i) - e(z_j)||)) under binary cross-entropy.
// All randomness (pair sampling, init, batch order) derives from spec.seed.
SiameseClassifier fit_contrastive(const Dataset& ds,
                                  const ContrastiveSpec& spec);

// Indices j with t_j == 1 - t_i whose embedding lies within the decision
// radius of sample i, sorted by ascending embedding distance (ties by
// index).
std::vector<std::size_t> neighbors(const SiameseClassifier& clf,
                                   const Dataset& ds, std::size_t i);

// Same query against precomputed embeddings (columns = samples).
std::vector<std::size_t> neighbors_from_embeddings(
    const Eigen::MatrixXd& embeddings, const std::vector<int>& treatments,
    std::size_t i, double radius);

}  // namespace cocoa
