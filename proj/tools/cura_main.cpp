// Command-line front end: synth / train / eval / triage / grid / gradcheck.
// Every subcommand reads an optional JSON config; flags override file values.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cura/experiment.hpp"
#include "cura/io.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<double> lambda_ind;
  std::optional<double> lambda_coh;
  std::optional<std::size_t> k;
  std::optional<std::size_t> heads;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> jobs;
  std::optional<std::string> data_csv;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--seed", flags.seed, "global seed (re-derives sub-seeds)");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--method", flags.method,
                  "internal_baseline|cura|mc_dropout|deep_ensemble");
  cmd->add_option("--lambda-ind", flags.lambda_ind, "individual loss weight");
  cmd->add_option("--lambda-coh", flags.lambda_coh, "cohort loss weight");
  cmd->add_option("--k", flags.k, "neighbor count (0 = auto)");
  cmd->add_option("--heads", flags.heads, "classifier heads");
  cmd->add_option("--folds", flags.folds, "cross-validation folds");
  cmd->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)");
  cmd->add_option("--data", flags.data_csv, "embedding CSV instead of synthetic");
}

cura::RunConfig resolve_config(const CommonFlags& flags) {
  cura::RunConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = cura::load_run_config(flags.config_path);
  } else {
    cura::apply_global_seed(cfg, cfg.seed);
  }
  if (flags.seed) cura::apply_global_seed(cfg, *flags.seed);
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.method) cfg.method.kind = cura::parse_method(*flags.method);
  if (flags.lambda_ind) cfg.objective.lambda_ind = *flags.lambda_ind;
  if (flags.lambda_coh) cfg.objective.lambda_coh = *flags.lambda_coh;
  if (flags.k) cfg.neighbors.k = *flags.k;
  if (flags.heads) cfg.model.n_heads = *flags.heads;
  if (flags.folds) cfg.folds.n_folds = *flags.folds;
  if (flags.jobs) cfg.jobs = *flags.jobs;
  if (flags.data_csv) {
    cfg.dataset.synthetic = false;
    cfg.dataset.csv_path = *flags.data_csv;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uncertainty fine-tuning for binary risk prediction over "
               "frozen embeddings"};
  app.require_subcommand(1);

  CommonFlags synth_flags, train_flags, grid_flags;
  std::optional<std::size_t> synth_n, synth_dim, synth_clusters;
  std::optional<double> synth_rate, synth_ambiguity;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort CSV");
  add_common_flags(synth, synth_flags);
  synth->add_option("--n", synth_n, "sample count");
  synth->add_option("--dim", synth_dim, "embedding dimension");
  synth->add_option("--clusters", synth_clusters, "cluster count");
  synth->add_option("--rate", synth_rate, "target positive rate");
  synth->add_option("--ambiguity", synth_ambiguity, "boundary cohort share");

  CLI::App* train = app.add_subcommand("train", "train one method per fold");
  add_common_flags(train, train_flags);

  std::string eval_run, triage_run;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained run");
  eval->add_option("--run", eval_run, "run directory from train")->required();

  CLI::App* triage = app.add_subcommand("triage", "triage curves for a run");
  triage->add_option("--run", triage_run, "run directory from train")->required();

  CLI::App* grid = app.add_subcommand("grid", "ablation / sensitivity grid");
  add_common_flags(grid, grid_flags);
  bool grid_ablation = false;
  grid->add_flag("--ablation", grid_ablation,
                 "run the four-row ablation (baseline, +ind, +coh, full)");

  std::uint64_t gradcheck_seed = 7;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference and identity checks");
  gradcheck->add_option("--seed", gradcheck_seed, "seed for the check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      cura::RunConfig cfg = resolve_config(synth_flags);
      if (synth_n) cfg.dataset.synth.n_samples = *synth_n;
      if (synth_dim) cfg.dataset.synth.dim = *synth_dim;
      if (synth_clusters) cfg.dataset.synth.n_clusters = *synth_clusters;
      if (synth_rate) cfg.dataset.synth.target_positive_rate = *synth_rate;
      if (synth_ambiguity) cfg.dataset.synth.ambiguity = *synth_ambiguity;
      cura::cmd_synth(cfg);
    } else if (train->parsed()) {
      cura::cmd_train(resolve_config(train_flags));
    } else if (eval->parsed()) {
      cura::cmd_eval(eval_run);
    } else if (triage->parsed()) {
      cura::cmd_triage(triage_run);
    } else if (grid->parsed()) {
      cura::GridSpec spec;
      if (!grid_flags.config_path.empty()) {
        spec = cura::grid_spec_from_json(cura::read_file(grid_flags.config_path));
      }
      const cura::RunConfig base = resolve_config(grid_flags);
      spec.base = base;
      if (grid_ablation) spec.ablation = true;
      if (spec.methods.empty()) spec.methods = {base.method.kind};
      if (spec.lambda_ind_axis.empty()) {
        spec.lambda_ind_axis = {base.objective.lambda_ind};
      }
      if (spec.lambda_coh_axis.empty()) {
        spec.lambda_coh_axis = {base.objective.lambda_coh};
      }
      cura::cmd_grid(spec);
    } else if (gradcheck->parsed()) {
      const cura::GradCheckReport report = cura::run_gradcheck(gradcheck_seed);
      std::printf("max parameter gradient rel. error: %.3e (tol %.1e)\n",
                  report.max_param_rel_err, report.param_tol);
      std::printf("max mean-prob gradient rel. error: %.3e (tol %.1e)\n",
                  report.max_prob_rel_err, report.prob_tol);
      std::printf("max soft-label identity residual:  %.3e (tol %.1e)\n",
                  report.max_identity_residual, report.identity_tol);
      std::printf("%s\n", report.pass ? "PASS" : "FAIL");
      return report.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
