#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cocoa {

// One observational record: covariates x, binary treatment t, factual
// outcome y. mu0/mu1 hold the noiseless potential-outcome means when ground
// truth is available (synthetic data), enabling exact PEHE evaluation.
struct FactualSample {
  std::vector<double> x;
  int t = 0;
  double y = 0.0;
  std::optional<double> mu0;
  std::optional<double> mu1;

  bool has_ground_truth() const { return mu0.has_value() && mu1.has_value(); }
  // True CATE for this record; requires ground truth.
  double tau() const;
};

// Ordered, immutable collection of samples. The index of a sample in the
// stable order identifies the individual; there is no separate ID column.
class Dataset {
 public:
  // has_ground_truth must match the samples (checked); the explicit flag
  // exists so empty datasets still know their CSV schema.
  Dataset(std::size_t d, std::string name, std::vector<FactualSample> samples,
          bool has_ground_truth);
  // Infers ground-truth presence from the first sample; samples must be
  // nonempty.
  Dataset(std::size_t d, std::string name, std::vector<FactualSample> samples);

  std::size_t size() const { return samples_.size(); }
  std::size_t dim() const { return d_; }
  const std::string& name() const { return name_; }
  bool has_ground_truth() const { return has_ground_truth_; }
  const FactualSample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<FactualSample>& samples() const { return samples_; }

  std::size_t count_treated() const;
  std::size_t count_control() const;

  Dataset with_name(std::string name) const;

 private:
  std::size_t d_;
  std::string name_;
  std::vector<FactualSample> samples_;
  bool has_ground_truth_;
};

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

// Deterministic disjoint partition with |train| = round(train_fraction * n).
// The same seed always yields the same index sets; order within each part
// preserves the original index order.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// Index sets behind split(), exposed for partition/property checks.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, const SplitSpec& spec);

// CSV schema: header `x_1,...,x_d,t,y[,mu0,mu1]`, one row per individual,
// UTF-8, comma separator. Numbers are written with 17 significant digits so
// save/load round-trips are bit-exact for 64-bit floats.
Dataset load_csv(const std::string& path, bool require_ground_truth = false);
void save_csv(const Dataset& ds, const std::string& path);

// Shortest text form that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace cocoa
