#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "cocoa/augment.hpp"
#include "cocoa/dataset.hpp"
#include "cocoa/estimators.hpp"
#include "cocoa/synthetic.hpp"

namespace cocoa {

struct LearnerSpec {
  MetaKind meta = MetaKind::t_learner;
  BaseLearnerSpec base;
  std::string label() const;
};

struct DatasetSpec {
  enum class Kind { linear, nonlinear, ihdp, twins, csv };
  Kind kind = Kind::linear;
  std::size_t n = 1500;
  std::size_t d = 10;
  double noise_sd = 0.1;
  std::string path;  // csv kind
  std::string name() const;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  double train_fraction = 0.7;
  AugmentSpec augment;
  std::vector<LearnerSpec> learners;
  std::vector<std::uint64_t> seeds{1};
  bool keep_artifacts = false;
  std::size_t jobs = 1;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  // FNV-1a over the canonical serialization; echoed into every result row.
  std::string config_hash() const;
};

struct ResultRow {
  std::string dataset;
  std::string learner;
  std::string base;
  int augmented = 0;
  std::uint64_t seed = 0;
  double sqrt_pehe = 0.0;
  double ate_error = 0.0;
  double mmd_before = 0.0;
  double mmd_after = 0.0;
  double alpha = 0.0;
  std::string config_hash;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::string log;
  // (seed, augmented training split) pairs, populated when keep_artifacts.
  std::vector<std::pair<std::uint64_t, ProvenancedDataset>> artifacts;
};

// One cell per (seed, learner, arm): fit without augmentation, augment the
// training split once per seed, fit with augmentation, evaluate everything
// on the same held-out test split. Cell failures are logged and skipped;
// the remaining cells proceed.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Runs and persists <outdir>/results.csv, summary.json, run.log (and
// augmented_seed<k>.csv when keep_artifacts).
ExperimentResult run_experiment_to_dir(const ExperimentConfig& cfg,
                                       const std::string& outdir);

std::string results_csv_header();
std::string result_row_csv(const ResultRow& row);
void write_results_csv(const std::vector<ResultRow>& rows,
                       const std::string& path);
nlohmann::ordered_json summarize(const ExperimentConfig& cfg,
                                 const std::vector<ResultRow>& rows);

// Parameter sweep: one run_experiment per grid value, rows tagged with the
// swept parameter. Supported parameters: K, radius, epsilon, kernel,
// imputer.
struct SweepSpec {
  std::string parameter;
  std::vector<std::string> values;
  ExperimentConfig base;
};

struct SweepRow {
  std::string parameter;
  std::string value;
  ResultRow row;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string log;
};

ExperimentConfig apply_sweep_value(ExperimentConfig cfg,
                                   const std::string& parameter,
                                   const std::string& value);
SweepResult run_sweep(const SweepSpec& spec);
SweepResult run_sweep_to_dir(const SweepSpec& spec, const std::string& outdir);

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace cocoa
