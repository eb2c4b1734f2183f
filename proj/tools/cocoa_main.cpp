// cocoa: counterfactual data augmentation toolkit for CATE estimation.
//
// Subcommands: generate, augment, train, evaluate, experiment, sweep,
// theory-check. Exit codes: 0 success, 1 usage error, 2 runtime failure,
// 3 theory-check failure.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cocoa/augment.hpp"
#include "cocoa/dataset.hpp"
#include "cocoa/estimators.hpp"
#include "cocoa/experiment.hpp"
#include "cocoa/metrics.hpp"
#include "cocoa/rng.hpp"
#include "cocoa/synthetic.hpp"
#include "cocoa/theory_checks.hpp"

namespace {

using nlohmann::ordered_json;

struct GenOpts {
  std::string dataset = "linear";
  std::string out;
  std::string covariates;
  std::size_t n = 1500;
  std::size_t d = 10;
  double noise_sd = 0.1;
  bool rct = false;
  std::uint64_t seed = 0;
};

struct AugOpts {
  std::string input, output, report, classifier;
  cocoa::AugmentSpec spec;
  std::string imputer = "gp";
  std::string kernel = "dot";
  std::uint64_t seed = 0;
};

struct TrainOpts {
  std::string input, model;
  std::string learner = "t";
  std::string base = "ridge";
  double ridge_lambda = 1e-8;
  std::size_t knn_k = 5;
  std::size_t mlp_epochs = 60;
  std::uint64_t seed = 0;
};

struct EvalOpts {
  std::string input, model, out, results_csv, train_csv, augmented_csv;
  int augmented = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

struct ExpOpts {
  std::string config, outdir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  bool keep_artifacts = false;
};

struct SweepOpts {
  std::string config, outdir, parameter;
  std::vector<std::string> values;
  std::optional<std::size_t> jobs;
};

struct TheoryOpts {
  std::string which;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::string out;
};

std::vector<std::vector<double>> covariates_from_csv(const std::string& path) {
  const cocoa::Dataset ds = cocoa::load_csv(path);
  std::vector<std::vector<double>> x;
  x.reserve(ds.size());
  for (const auto& s : ds.samples()) x.push_back(s.x);
  return x;
}

// Accepts both the plain dataset schema and the augmented (provenance
// column) schema, so `augment` outputs feed straight back in.
cocoa::Dataset load_any_csv(const std::string& path) {
  try {
    return cocoa::load_csv(path);
  } catch (const std::exception&) {
    return cocoa::load_provenance_csv(path).data;
  }
}

int run_theory_check(const std::string& which, std::uint64_t seed,
                     std::size_t n, const std::string& out_path) {
  cocoa::TheoryCheckResult result;
  if (which == "rct") {
    cocoa::RctCheckSpec spec;
    if (n > 0) spec.n = n;
    spec.seed = seed;
    result = cocoa::check_rct_consistency(spec);
  } else if (which == "neighbors") {
    cocoa::NeighborBoundSpec spec;
    spec.seed = seed;
    result = cocoa::check_neighbor_bound(spec);
  } else if (which == "bound") {
    cocoa::GenBoundSpec spec;
    if (n > 0) spec.n = n;
    spec.seed = seed;
    result = cocoa::check_generalization_bound(spec);
  } else {
    std::cerr << "error: unknown check " << which << "\n";
    return 1;
  }
  const ordered_json j = result.to_json();
  std::cout << j.dump(2) << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << '\n';
  }
  return result.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"COCOA: contrastive counterfactual augmentation for CATE "
               "estimation"};
  app.require_subcommand(1);

  std::function<int()> action;

  // ---- generate ----------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  {
    auto opts = std::make_shared<GenOpts>();
    gen->add_option("--dataset", opts->dataset,
                    "linear|nonlinear|ihdp|twins")
        ->required();
    gen->add_option("--out", opts->out, "Output CSV path")->required();
    gen->add_option("--n", opts->n, "Sample count");
    gen->add_option("--d", opts->d, "Covariate dimension");
    gen->add_option("--noise-sd", opts->noise_sd,
                    "Outcome noise sd (linear/nonlinear)");
    gen->add_flag("--rct", opts->rct,
                  "Randomize treatment independently of covariates");
    gen->add_option("--seed", opts->seed, "Generator seed");
    gen->add_option("--covariates", opts->covariates,
                    "Covariate source CSV for ihdp/twins");
    gen->callback([&action, opts] {
      action = [opts]() {
        cocoa::Dataset ds = [&] {
          if (opts->dataset == "linear") {
            cocoa::LinearGenSpec g;
            g.n = opts->n;
            g.d = opts->d;
            g.noise_sd = opts->noise_sd;
            g.rct = opts->rct;
            g.seed = opts->seed;
            return cocoa::gen_linear(g);
          }
          if (opts->dataset == "nonlinear") {
            cocoa::NonLinearGenSpec g;
            g.n = opts->n;
            g.d = opts->d;
            g.noise_sd = opts->noise_sd;
            g.rct = opts->rct;
            g.seed = opts->seed;
            return cocoa::gen_nonlinear(g);
          }
          if (opts->dataset == "ihdp") {
            cocoa::IhdpStyleGenSpec g;
            if (!opts->covariates.empty())
              g.covariates = covariates_from_csv(opts->covariates);
            g.fallback_n = opts->n;
            g.fallback_d = opts->d;
            g.seed = opts->seed;
            return cocoa::gen_ihdp_style(g);
          }
          if (opts->dataset == "twins") {
            cocoa::TwinsStyleGenSpec g;
            if (!opts->covariates.empty())
              g.covariates = covariates_from_csv(opts->covariates);
            g.fallback_n = opts->n;
            g.fallback_d = opts->d;
            g.seed = opts->seed;
            return cocoa::gen_twins_style(g);
          }
          throw CLI::ValidationError("--dataset",
                                     "unknown dataset " + opts->dataset);
        }();
        cocoa::save_csv(ds, opts->out);
        std::cout << "wrote " << ds.size() << " rows (d=" << ds.dim()
                  << ") to " << opts->out << '\n';
        return 0;
      };
    });
  }

  // ---- augment -----------------------------------------------------------
  auto* aug = app.add_subcommand("augment",
                                 "Impute counterfactuals for well-supported "
                                 "individuals and emit the augmented dataset");
  {
    auto opts = std::make_shared<AugOpts>();
    aug->add_option("--input", opts->input, "Factual dataset CSV")->required();
    aug->add_option("--output", opts->output, "Augmented CSV path")->required();
    aug->add_option("--report", opts->report, "JSON report path");
    aug->add_option("--classifier", opts->classifier,
                    "Save the trained similarity classifier here");
    aug->add_option("--k", opts->spec.min_neighbors,
                    "Minimum neighbors required for imputation");
    aug->add_option("--radius", opts->spec.contrastive.radius,
                    "Embedding decision radius R");
    aug->add_option("--epsilon", opts->spec.contrastive.epsilon,
                    "Outcome similarity threshold (<=0: percentile mode)");
    aug->add_option("--epsilon-percentile",
                    opts->spec.contrastive.epsilon_percentile,
                    "Percentile of outcome gaps used when epsilon <= 0");
    aug->add_option("--max-pairs", opts->spec.contrastive.max_pairs_per_anchor,
                    "Pair cap per anchor and label");
    aug->add_option("--epochs", opts->spec.contrastive.training.epochs,
                    "Contrastive training epochs");
    aug->add_option("--lr", opts->spec.contrastive.training.learning_rate,
                    "Contrastive learning rate");
    aug->add_option("--batch", opts->spec.contrastive.training.batch_size,
                    "Contrastive batch size");
    aug->add_option("--imputer", opts->imputer, "gp|linear");
    aug->add_option("--kernel", opts->kernel, "dot|rbf|matern");
    aug->add_option("--length-scale", opts->spec.kernel.length_scale,
                    "Kernel length scale (rbf/matern)");
    aug->add_option("--sigma0-sq", opts->spec.kernel.sigma0_sq,
                    "DotProduct kernel bias");
    aug->add_option("--jitter", opts->spec.kernel.jitter,
                    "Gram matrix diagonal regularizer");
    aug->add_option("--neighbor-cap", opts->spec.neighbor_cap,
                    "Nearest neighbors passed to the local regressor");
    aug->add_option("--seed", opts->seed, "Seed");
    aug->callback([&action, opts] {
      action = [opts]() {
        opts->spec.psi = cocoa::psi_kind_from_name(opts->imputer);
        opts->spec.kernel.kind = cocoa::kernel_kind_from_name(opts->kernel);
        opts->spec.seed = opts->seed;
        const cocoa::Dataset ds = cocoa::load_csv(opts->input);
        const cocoa::AugmentationReport report = cocoa::augment(ds, opts->spec);
        cocoa::save_provenance_csv(cocoa::mark_provenance(report),
                                   opts->output);
        if (!opts->classifier.empty()) report.classifier.save(opts->classifier);
        // Echo the similarity threshold the run actually used (the augment
        // pipeline derives the same contrastive seed internally).
        cocoa::ContrastiveSpec echo_spec = opts->spec.contrastive;
        echo_spec.seed =
            cocoa::Rng(opts->seed).split("augment.contrastive").next_u64();
        ordered_json j;
        j["input"] = opts->input;
        j["n_original"] = report.n_original;
        j["n_added"] = report.added.size();
        j["alpha"] = report.alpha;
        j["k"] = opts->spec.min_neighbors;
        j["imputer"] = cocoa::psi_kind_name(opts->spec.psi);
        j["kernel"] = cocoa::kernel_kind_name(opts->spec.kernel.kind);
        j["radius"] = opts->spec.contrastive.radius;
        j["epsilon"] = cocoa::resolve_epsilon(ds, echo_spec);
        j["seed"] = opts->seed;
        std::cout << j.dump(2) << '\n';
        if (!opts->report.empty()) {
          std::ofstream out(opts->report);
          out << j.dump(2) << '\n';
        }
        return 0;
      };
    });
  }

  // ---- train -------------------------------------------------------------
  auto* train_cmd =
      app.add_subcommand("train", "Fit a CATE estimator on a dataset");
  {
    auto opts = std::make_shared<TrainOpts>();
    train_cmd->add_option("--input", opts->input, "Training CSV")->required();
    train_cmd->add_option("--model", opts->model, "Model output path")
        ->required();
    train_cmd->add_option("--learner", opts->learner, "s|t");
    train_cmd->add_option("--base", opts->base, "ridge|knn|mlp");
    train_cmd->add_option("--ridge-lambda", opts->ridge_lambda,
                          "Ridge regularization");
    train_cmd->add_option("--knn-k", opts->knn_k, "Neighbor count for knn");
    train_cmd->add_option("--mlp-epochs", opts->mlp_epochs,
                          "Training epochs for the mlp base");
    train_cmd->add_option("--seed", opts->seed, "Seed");
    train_cmd->callback([&action, opts] {
      action = [opts]() {
        const cocoa::Dataset ds = load_any_csv(opts->input);
        cocoa::BaseLearnerSpec base;
        base.kind = cocoa::base_kind_from_name(opts->base);
        base.ridge_lambda = opts->ridge_lambda;
        base.knn_k = opts->knn_k;
        base.mlp_training.epochs = opts->mlp_epochs;
        const cocoa::CateModel model = cocoa::CateModel::fit(
            ds, cocoa::meta_kind_from_name(opts->learner), base, opts->seed);
        model.save(opts->model);
        std::cout << "trained " << cocoa::meta_kind_name(model.meta_kind())
                  << "/" << cocoa::base_kind_name(model.base_kind()) << " on "
                  << ds.size() << " rows -> " << opts->model << '\n';
        return 0;
      };
    });
  }

  // ---- evaluate ----------------------------------------------------------
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Evaluate a saved model on ground-truth data");
  {
    auto opts = std::make_shared<EvalOpts>();
    eval_cmd->add_option("--input", opts->input, "Evaluation CSV with mu0/mu1")
        ->required();
    eval_cmd->add_option("--model", opts->model, "Model path")->required();
    eval_cmd->add_option("--out", opts->out, "EvalResult JSON path");
    eval_cmd->add_option("--results-csv", opts->results_csv,
                         "Append a row to this results CSV");
    eval_cmd->add_option("--train-csv", opts->train_csv,
                         "Training CSV for the mmd_before column");
    eval_cmd->add_option("--augmented-csv", opts->augmented_csv,
                         "Augmented training CSV for the mmd_after column");
    eval_cmd->add_option("--augmented", opts->augmented,
                         "Value for the augmented column");
    eval_cmd->add_option("--alpha", opts->alpha, "Value for the alpha column");
    eval_cmd->add_option("--seed", opts->seed, "Value for the seed column");
    eval_cmd->callback([&action, opts] {
      action = [opts]() {
        const cocoa::Dataset ds = load_any_csv(opts->input);
        if (!ds.has_ground_truth())
          throw std::runtime_error(opts->input + " lacks mu0/mu1 columns");
        const cocoa::CateModel model = cocoa::CateModel::load(opts->model);
        const cocoa::EvalResult eval = cocoa::evaluate(model, ds);
        double mmd_before = std::nan("");
        double mmd_after = std::nan("");
        if (!opts->train_csv.empty())
          mmd_before = cocoa::mmd_imbalance(load_any_csv(opts->train_csv));
        if (!opts->augmented_csv.empty())
          mmd_after = cocoa::mmd_imbalance(load_any_csv(opts->augmented_csv));
        ordered_json j;
        j["sqrt_pehe"] = eval.sqrt_pehe;
        j["ate_error"] = eval.ate_error;
        j["n_eval"] = eval.n_eval;
        j["dataset"] = ds.name();
        j["learner"] = cocoa::meta_kind_name(model.meta_kind());
        j["base"] = cocoa::base_kind_name(model.base_kind());
        std::cout << j.dump(2) << '\n';
        if (!opts->out.empty()) {
          std::ofstream out(opts->out);
          out << j.dump(2) << '\n';
        }
        if (!opts->results_csv.empty()) {
          const bool fresh = !std::filesystem::exists(opts->results_csv);
          std::ofstream out(opts->results_csv, std::ios::app);
          if (fresh)
            out << "dataset,learner,base,augmented,seed,sqrt_pehe,ate_error,"
                   "mmd_before,mmd_after,alpha\n";
          out << ds.name() << ','
              << cocoa::meta_kind_name(model.meta_kind()) << ','
              << cocoa::base_kind_name(model.base_kind()) << ','
              << opts->augmented << ',' << opts->seed << ','
              << cocoa::format_double(eval.sqrt_pehe) << ','
              << cocoa::format_double(eval.ate_error) << ','
              << cocoa::format_double(mmd_before) << ','
              << cocoa::format_double(mmd_after) << ','
              << cocoa::format_double(opts->alpha) << '\n';
        }
        return 0;
      };
    });
  }

  // ---- experiment --------------------------------------------------------
  auto* exp_cmd = app.add_subcommand(
      "experiment", "Run the with/without-augmentation comparison");
  {
    auto opts = std::make_shared<ExpOpts>();
    exp_cmd->add_option("--config", opts->config, "Experiment config JSON")
        ->required();
    exp_cmd->add_option("--outdir", opts->outdir, "Output directory")
        ->required();
    exp_cmd->add_option("--seed", opts->seed,
                        "Override the config's seed list with one seed");
    exp_cmd->add_option("--jobs", opts->jobs, "Worker threads over seeds");
    exp_cmd->add_flag("--keep-artifacts", opts->keep_artifacts,
                      "Also write per-seed augmented CSVs");
    exp_cmd->callback([&action, opts] {
      action = [opts]() {
        std::ifstream in(opts->config);
        if (!in)
          throw std::runtime_error("cannot open config " + opts->config);
        cocoa::ExperimentConfig cfg =
            cocoa::ExperimentConfig::from_json(nlohmann::json::parse(in));
        if (opts->seed.has_value()) cfg.seeds = {*opts->seed};
        if (opts->jobs.has_value()) cfg.jobs = *opts->jobs;
        if (opts->keep_artifacts) cfg.keep_artifacts = true;
        const cocoa::ExperimentResult result =
            cocoa::run_experiment_to_dir(cfg, opts->outdir);
        std::cout << "wrote " << result.rows.size() << " result rows to "
                  << opts->outdir << "/results.csv\n";
        return 0;
      };
    });
  }

  // ---- sweep -------------------------------------------------------------
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Grid sweep over one augmentation parameter");
  {
    auto opts = std::make_shared<SweepOpts>();
    sweep_cmd->add_option("--config", opts->config, "Base config JSON")
        ->required();
    sweep_cmd->add_option("--outdir", opts->outdir, "Output directory")
        ->required();
    sweep_cmd
        ->add_option("--param", opts->parameter,
                     "K|radius|epsilon|kernel|imputer")
        ->required();
    sweep_cmd->add_option("--values", opts->values, "Grid values")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--jobs", opts->jobs, "Worker threads over seeds");
    sweep_cmd->callback([&action, opts] {
      action = [opts]() {
        std::ifstream in(opts->config);
        if (!in)
          throw std::runtime_error("cannot open config " + opts->config);
        cocoa::SweepSpec spec;
        spec.base =
            cocoa::ExperimentConfig::from_json(nlohmann::json::parse(in));
        if (opts->jobs.has_value()) spec.base.jobs = *opts->jobs;
        spec.parameter = opts->parameter;
        spec.values = opts->values;
        const cocoa::SweepResult result =
            cocoa::run_sweep_to_dir(spec, opts->outdir);
        std::cout << "wrote " << result.rows.size() << " sweep rows to "
                  << opts->outdir << "/sweep.csv\n";
        return 0;
      };
    });
  }

  // ---- theory-check ------------------------------------------------------
  auto* theory_cmd = app.add_subcommand(
      "theory-check", "Monte-Carlo verification of the theoretical claims");
  {
    auto opts = std::make_shared<TheoryOpts>();
    theory_cmd->add_option("--which", opts->which, "rct|neighbors|bound")
        ->required();
    theory_cmd->add_option("--seed", opts->seed, "Seed");
    theory_cmd->add_option("--n", opts->n, "Sample count override");
    theory_cmd->add_option("--out", opts->out, "Result JSON path");
    theory_cmd->callback([&action, opts] {
      action = [opts]() {
        return run_theory_check(opts->which, opts->seed, opts->n, opts->out);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    return action ? action() : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
