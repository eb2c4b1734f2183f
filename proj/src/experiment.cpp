#include "cocoa/experiment.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cocoa/metrics.hpp"
#include "cocoa/rng.hpp"

namespace cocoa {

std::string LearnerSpec::label() const {
  return meta_kind_name(meta) + "/" + base_kind_name(base.kind);
}

std::string DatasetSpec::name() const {
  switch (kind) {
    case Kind::linear: return "linear";
    case Kind::nonlinear: return "nonlinear";
    case Kind::ihdp: return "ihdp_style";
    case Kind::twins: return "twins_style";
    case Kind::csv: {
      std::string n = path;
      if (const auto pos = n.find_last_of('/'); pos != std::string::npos)
        n = n.substr(pos + 1);
      if (const auto pos = n.rfind(".csv"); pos != std::string::npos)
        n = n.substr(0, pos);
      return n;
    }
  }
  return "?";
}

namespace {

DatasetSpec::Kind dataset_kind_from_name(const std::string& s) {
  if (s == "linear") return DatasetSpec::Kind::linear;
  if (s == "nonlinear") return DatasetSpec::Kind::nonlinear;
  if (s == "ihdp") return DatasetSpec::Kind::ihdp;
  if (s == "twins") return DatasetSpec::Kind::twins;
  if (s == "csv") return DatasetSpec::Kind::csv;
  throw std::invalid_argument("unknown dataset kind: " + s);
}

std::string dataset_kind_name(DatasetSpec::Kind k) {
  switch (k) {
    case DatasetSpec::Kind::linear: return "linear";
    case DatasetSpec::Kind::nonlinear: return "nonlinear";
    case DatasetSpec::Kind::ihdp: return "ihdp";
    case DatasetSpec::Kind::twins: return "twins";
    case DatasetSpec::Kind::csv: return "csv";
  }
  return "?";
}

}  // namespace

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case DatasetSpec::Kind::linear: {
      LinearGenSpec g;
      g.n = spec.n;
      g.d = spec.d;
      g.noise_sd = spec.noise_sd;
      g.seed = seed;
      return gen_linear(g);
    }
    case DatasetSpec::Kind::nonlinear: {
      NonLinearGenSpec g;
      g.n = spec.n;
      g.d = spec.d;
      g.noise_sd = spec.noise_sd;
      g.seed = seed;
      return gen_nonlinear(g);
    }
    case DatasetSpec::Kind::ihdp: {
      IhdpStyleGenSpec g;
      g.fallback_n = spec.n;
      g.fallback_d = spec.d;
      g.seed = seed;
      return gen_ihdp_style(g);
    }
    case DatasetSpec::Kind::twins: {
      TwinsStyleGenSpec g;
      g.fallback_n = spec.n;
      g.fallback_d = spec.d;
      g.seed = seed;
      return gen_twins_style(g);
    }
    case DatasetSpec::Kind::csv:
      return load_csv(spec.path, /*require_ground_truth=*/true);
  }
  throw std::invalid_argument("make_dataset: unknown kind");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    cfg.dataset.kind = dataset_kind_from_name(d.value("kind", "linear"));
    cfg.dataset.n = d.value("n", cfg.dataset.n);
    cfg.dataset.d = d.value("d", cfg.dataset.d);
    cfg.dataset.noise_sd = d.value("noise_sd", cfg.dataset.noise_sd);
    cfg.dataset.path = d.value("path", cfg.dataset.path);
  }
  cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    AugmentSpec& spec = cfg.augment;
    spec.min_neighbors = a.value("k", spec.min_neighbors);
    spec.psi = psi_kind_from_name(a.value("imputer", psi_kind_name(spec.psi)));
    spec.kernel.kind =
        kernel_kind_from_name(a.value("kernel", kernel_kind_name(spec.kernel.kind)));
    spec.kernel.sigma0_sq = a.value("sigma0_sq", spec.kernel.sigma0_sq);
    spec.kernel.length_scale = a.value("length_scale", spec.kernel.length_scale);
    spec.kernel.jitter = a.value("jitter", spec.kernel.jitter);
    spec.neighbor_cap = a.value("neighbor_cap", spec.neighbor_cap);
    ContrastiveSpec& c = spec.contrastive;
    c.epsilon = a.value("epsilon", c.epsilon);
    c.epsilon_percentile = a.value("epsilon_percentile", c.epsilon_percentile);
    c.max_pairs_per_anchor =
        a.value("max_pairs_per_anchor", c.max_pairs_per_anchor);
    c.radius = a.value("radius", c.radius);
    if (a.contains("embedding_hidden")) {
      c.embedding.layer_sizes.clear();  // input size filled at fit time
      c.embedding.layer_sizes.push_back(0);
      for (const auto& v : a.at("embedding_hidden"))
        c.embedding.layer_sizes.push_back(v.get<std::size_t>());
    }
    c.training.epochs = a.value("epochs", c.training.epochs);
    c.training.learning_rate = a.value("learning_rate", c.training.learning_rate);
    c.training.batch_size = a.value("batch_size", c.training.batch_size);
  }
  if (j.contains("learners")) {
    cfg.learners.clear();
    for (const auto& l : j.at("learners")) {
      LearnerSpec spec;
      spec.meta = meta_kind_from_name(l.value("meta", "t_learner"));
      spec.base.kind = base_kind_from_name(l.value("base", "ridge"));
      spec.base.ridge_lambda = l.value("ridge_lambda", spec.base.ridge_lambda);
      spec.base.knn_k = l.value("knn_k", spec.base.knn_k);
      if (l.contains("mlp_hidden")) {
        spec.base.mlp.layer_sizes.clear();
        spec.base.mlp.layer_sizes.push_back(0);
        for (const auto& v : l.at("mlp_hidden"))
          spec.base.mlp.layer_sizes.push_back(v.get<std::size_t>());
        spec.base.mlp.layer_sizes.push_back(1);
      }
      spec.base.mlp_training.epochs =
          l.value("mlp_epochs", spec.base.mlp_training.epochs);
      spec.base.mlp_training.learning_rate =
          l.value("mlp_learning_rate", spec.base.mlp_training.learning_rate);
      cfg.learners.push_back(std::move(spec));
    }
  }
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& s : j.at("seeds"))
      cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  cfg.keep_artifacts = j.value("keep_artifacts", cfg.keep_artifacts);
  cfg.jobs = j.value("jobs", cfg.jobs);
  return cfg;
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = {{"kind", dataset_kind_name(dataset.kind)},
                  {"n", dataset.n},
                  {"d", dataset.d},
                  {"noise_sd", dataset.noise_sd},
                  {"path", dataset.path}};
  j["train_fraction"] = train_fraction;
  nlohmann::ordered_json a;
  a["k"] = augment.min_neighbors;
  a["imputer"] = psi_kind_name(augment.psi);
  a["kernel"] = kernel_kind_name(augment.kernel.kind);
  a["sigma0_sq"] = augment.kernel.sigma0_sq;
  a["length_scale"] = augment.kernel.length_scale;
  a["jitter"] = augment.kernel.jitter;
  a["neighbor_cap"] = augment.neighbor_cap;
  a["epsilon"] = augment.contrastive.epsilon;
  a["epsilon_percentile"] = augment.contrastive.epsilon_percentile;
  a["max_pairs_per_anchor"] = augment.contrastive.max_pairs_per_anchor;
  a["radius"] = augment.contrastive.radius;
  if (!augment.contrastive.embedding.layer_sizes.empty()) {
    std::vector<std::size_t> hidden(
        augment.contrastive.embedding.layer_sizes.begin() + 1,
        augment.contrastive.embedding.layer_sizes.end());
    a["embedding_hidden"] = hidden;
  }
  a["epochs"] = augment.contrastive.training.epochs;
  a["learning_rate"] = augment.contrastive.training.learning_rate;
  a["batch_size"] = augment.contrastive.training.batch_size;
  j["augment"] = std::move(a);
  nlohmann::ordered_json learners_json = nlohmann::ordered_json::array();
  for (const LearnerSpec& l : learners) {
    nlohmann::ordered_json lj;
    lj["meta"] = meta_kind_name(l.meta);
    lj["base"] = base_kind_name(l.base.kind);
    lj["ridge_lambda"] = l.base.ridge_lambda;
    lj["knn_k"] = l.base.knn_k;
    learners_json.push_back(std::move(lj));
  }
  j["learners"] = std::move(learners_json);
  j["seeds"] = seeds;
  j["keep_artifacts"] = keep_artifacts;
  return j;
}

std::string ExperimentConfig::config_hash() const {
  const std::string dump = to_json().dump();
  const std::uint64_t h = Rng::fnv1a(dump);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct SeedOutcome {
  std::vector<ResultRow> rows;
  std::string log;
  std::vector<std::pair<std::uint64_t, ProvenancedDataset>> artifacts;
};

ResultRow make_row(const ExperimentConfig& cfg, const LearnerSpec& learner,
                   int augmented, std::uint64_t seed, const EvalResult& eval,
                   double mmd_before, double mmd_after, double alpha,
                   const std::string& hash) {
  ResultRow row;
  row.dataset = cfg.dataset.name();
  row.learner = meta_kind_name(learner.meta);
  row.base = base_kind_name(learner.base.kind);
  row.augmented = augmented;
  row.seed = seed;
  row.sqrt_pehe = eval.sqrt_pehe;
  row.ate_error = eval.ate_error;
  row.mmd_before = mmd_before;
  row.mmd_after = mmd_after;
  row.alpha = alpha;
  row.config_hash = hash;
  return row;
}

SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                     const Dataset* preloaded, const std::string& hash) {
  SeedOutcome out;
  std::ostringstream log;
  auto cell_tag = [&](const LearnerSpec& l, const char* arm) {
    return "[seed=" + std::to_string(seed) + "][" + l.label() + "][" + arm +
           "]";
  };

  Dataset data = preloaded != nullptr ? *preloaded
                                      : make_dataset(cfg.dataset, seed);
  log << "[seed=" << seed << "] dataset=" << data.name()
      << " n=" << data.size() << " d=" << data.dim() << '\n';
  const auto [train, test] = split(data, SplitSpec{cfg.train_fraction, seed});
  log << "[seed=" << seed << "] split train=" << train.size()
      << " test=" << test.size() << '\n';

  const double mmd_before = mmd_imbalance(train);

  // Without-augmentation arm: touches only estimators and metrics.
  for (std::size_t li = 0; li < cfg.learners.size(); ++li) {
    const LearnerSpec& learner = cfg.learners[li];
    try {
      const std::uint64_t fit_seed =
          Rng(seed).split("experiment.fit").split(li).next_u64();
      const CateModel model =
          CateModel::fit(train, learner.meta, learner.base, fit_seed);
      const EvalResult eval = evaluate(model, test);
      out.rows.push_back(make_row(cfg, learner, 0, seed, eval, mmd_before,
                                  mmd_before, 0.0, hash));
      log << cell_tag(learner, "no_aug")
          << " sqrt_pehe=" << format_double(eval.sqrt_pehe)
          << " ate_error=" << format_double(eval.ate_error) << '\n';
    } catch (const std::exception& e) {
      log << "[error]" << cell_tag(learner, "no_aug") << ' ' << e.what()
          << '\n';
    }
  }

  // With-augmentation arm: one augmentation per seed, shared by learners.
  try {
    AugmentSpec aug = cfg.augment;
    aug.seed = Rng(seed).split("experiment.augment").next_u64();
    const AugmentationReport report = augment(train, aug);
    const double mmd_after = mmd_imbalance(report.augmented);
    log << "[augment][seed=" << seed << "] added=" << report.added.size()
        << " alpha=" << format_double(report.alpha)
        << " mmd_before=" << format_double(mmd_before)
        << " mmd_after=" << format_double(mmd_after) << '\n';
    if (cfg.keep_artifacts)
      out.artifacts.emplace_back(seed, mark_provenance(report));
    for (std::size_t li = 0; li < cfg.learners.size(); ++li) {
      const LearnerSpec& learner = cfg.learners[li];
      try {
        const std::uint64_t fit_seed =
            Rng(seed).split("experiment.fit_aug").split(li).next_u64();
        const CateModel model = CateModel::fit(report.augmented, learner.meta,
                                               learner.base, fit_seed);
        const EvalResult eval = evaluate(model, test);
        out.rows.push_back(make_row(cfg, learner, 1, seed, eval, mmd_before,
                                    mmd_after, report.alpha, hash));
        log << cell_tag(learner, "aug")
            << " sqrt_pehe=" << format_double(eval.sqrt_pehe)
            << " ate_error=" << format_double(eval.ate_error) << '\n';
      } catch (const std::exception& e) {
        log << "[error]" << cell_tag(learner, "aug") << ' ' << e.what()
            << '\n';
      }
    }
  } catch (const std::exception& e) {
    log << "[error][seed=" << seed << "][augment] " << e.what() << '\n';
  }

  out.log = log.str();
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty())
    throw std::invalid_argument("run_experiment: seeds must be nonempty");
  if (cfg.learners.empty())
    throw std::invalid_argument("run_experiment: learners must be nonempty");

  std::optional<Dataset> preloaded;
  if (cfg.dataset.kind == DatasetSpec::Kind::csv)
    preloaded = make_dataset(cfg.dataset, 0);

  const std::string hash = cfg.config_hash();

  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(cfg.jobs, cfg.seeds.size()));
  if (workers == 1) {
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k)
      outcomes[k] = run_seed(cfg, cfg.seeds[k],
                             preloaded ? &*preloaded : nullptr, hash);
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= cfg.seeds.size()) break;
        outcomes[k] = run_seed(cfg, cfg.seeds[k],
                               preloaded ? &*preloaded : nullptr, hash);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (std::thread& t : pool) t.join();
  }

  ExperimentResult result;
  std::ostringstream log;
  for (SeedOutcome& o : outcomes) {
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
    log << o.log;
    for (auto& art : o.artifacts) result.artifacts.push_back(std::move(art));
  }
  // Canonical order: seed position, then learner, then arm. Rows were
  // produced no-aug-first per seed; re-sort for a stable layout.
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [&](const ResultRow& a, const ResultRow& b) {
                     const auto pos = [&](std::uint64_t s) {
                       return std::find(cfg.seeds.begin(), cfg.seeds.end(), s) -
                              cfg.seeds.begin();
                     };
                     if (pos(a.seed) != pos(b.seed))
                       return pos(a.seed) < pos(b.seed);
                     if (a.learner != b.learner) return a.learner < b.learner;
                     if (a.base != b.base) return a.base < b.base;
                     return a.augmented < b.augmented;
                   });
  result.log = log.str();
  return result;
}

std::string results_csv_header() {
  return "dataset,learner,base,augmented,seed,sqrt_pehe,ate_error,"
         "mmd_before,mmd_after,alpha,config_hash";
}

std::string result_row_csv(const ResultRow& row) {
  std::ostringstream out;
  out << row.dataset << ',' << row.learner << ',' << row.base << ','
      << row.augmented << ',' << row.seed << ','
      << format_double(row.sqrt_pehe) << ',' << format_double(row.ate_error)
      << ',' << format_double(row.mmd_before) << ','
      << format_double(row.mmd_after) << ',' << format_double(row.alpha)
      << ',' << row.config_hash;
  return out.str();
}

void write_results_csv(const std::vector<ResultRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_results_csv: cannot open " + path);
  out << results_csv_header() << '\n';
  for (const ResultRow& row : rows) out << result_row_csv(row) << '\n';
  if (!out) throw std::runtime_error("write_results_csv: write failed");
}

nlohmann::ordered_json summarize(const ExperimentConfig& cfg,
                                 const std::vector<ResultRow>& rows) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const LearnerSpec& learner : cfg.learners) {
    for (int arm = 0; arm <= 1; ++arm) {
      std::vector<double> pehe, ate;
      for (const ResultRow& row : rows) {
        if (row.learner == meta_kind_name(learner.meta) &&
            row.base == base_kind_name(learner.base.kind) &&
            row.augmented == arm) {
          pehe.push_back(row.sqrt_pehe);
          ate.push_back(row.ate_error);
        }
      }
      if (pehe.empty()) continue;
      auto mean_sd = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (const double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (const double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        return std::pair<double, double>{mean, std::sqrt(var)};
      };
      const auto [pm, psd] = mean_sd(pehe);
      const auto [am, asd] = mean_sd(ate);
      nlohmann::ordered_json cell;
      cell["learner"] = learner.label();
      cell["augmented"] = arm;
      cell["n_seeds"] = pehe.size();
      cell["sqrt_pehe_mean"] = pm;
      cell["sqrt_pehe_sd"] = psd;
      cell["ate_error_mean"] = am;
      cell["ate_error_sd"] = asd;
      cells.push_back(std::move(cell));
    }
  }
  nlohmann::ordered_json j;
  j["config"] = cfg.to_json();
  j["config_hash"] = cfg.config_hash();
  j["cells"] = std::move(cells);
  return j;
}

ExperimentResult run_experiment_to_dir(const ExperimentConfig& cfg,
                                       const std::string& outdir) {
  std::filesystem::create_directories(outdir);
  ExperimentResult result = run_experiment(cfg);
  write_results_csv(result.rows, outdir + "/results.csv");
  {
    std::ofstream out(outdir + "/summary.json");
    out << summarize(cfg, result.rows).dump(2) << '\n';
  }
  {
    std::ofstream out(outdir + "/run.log");
    out << result.log;
  }
  for (const auto& [seed, artifact] : result.artifacts)
    save_provenance_csv(
        artifact, outdir + "/augmented_seed" + std::to_string(seed) + ".csv");
  return result;
}

ExperimentConfig apply_sweep_value(ExperimentConfig cfg,
                                   const std::string& parameter,
                                   const std::string& value) {
  if (parameter == "K") {
    cfg.augment.min_neighbors = std::stoul(value);
  } else if (parameter == "radius") {
    cfg.augment.contrastive.radius = std::stod(value);
  } else if (parameter == "epsilon") {
    cfg.augment.contrastive.epsilon = std::stod(value);
  } else if (parameter == "kernel") {
    cfg.augment.kernel.kind = kernel_kind_from_name(value);
  } else if (parameter == "imputer") {
    cfg.augment.psi = psi_kind_from_name(value);
  } else {
    throw std::invalid_argument("run_sweep: unknown parameter " + parameter);
  }
  return cfg;
}

SweepResult run_sweep(const SweepSpec& spec) {
  if (spec.values.empty())
    throw std::invalid_argument("run_sweep: value grid must be nonempty");
  SweepResult result;
  std::ostringstream log;
  for (const std::string& value : spec.values) {
    log << "[sweep] " << spec.parameter << '=' << value << '\n';
    try {
      const ExperimentConfig cfg =
          apply_sweep_value(spec.base, spec.parameter, value);
      ExperimentResult sub = run_experiment(cfg);
      for (ResultRow& row : sub.rows)
        result.rows.push_back(SweepRow{spec.parameter, value, std::move(row)});
      log << sub.log;
    } catch (const std::exception& e) {
      log << "[error][sweep][" << spec.parameter << '=' << value << "] "
          << e.what() << '\n';
    }
  }
  result.log = log.str();
  return result;
}

SweepResult run_sweep_to_dir(const SweepSpec& spec, const std::string& outdir) {
  std::filesystem::create_directories(outdir);
  SweepResult result = run_sweep(spec);
  std::ofstream out(outdir + "/sweep.csv");
  if (!out) throw std::runtime_error("run_sweep: cannot open sweep.csv");
  out << "parameter,value," << results_csv_header() << '\n';
  for (const SweepRow& row : result.rows)
    out << row.parameter << ',' << row.value << ',' << result_row_csv(row.row)
        << '\n';
  std::ofstream log(outdir + "/run.log");
  log << result.log;
  return result;
}

}  // namespace cocoa
