#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cura/baselines.hpp"
#include "cura/dataset.hpp"
#include "cura/metrics.hpp"
#include "cura/multihead.hpp"
#include "cura/neighbors.hpp"

namespace cura {

struct DatasetSource {
  bool synthetic = true;
  SynthConfig synth;
  std::string csv_path;
};

struct FoldConfig {
  std::size_t n_folds = 5;
  double val_fraction = 0.125;
  std::uint64_t seed = 0;
};

struct ModelConfig {
  std::size_t n_heads = 32;
  std::size_t hidden_units = 64;
  double output_bias_shift = -0.5;
};

struct NeighborConfig {
  // 0 = auto: 200 when the training set has >= 100000 samples, else 100,
  // capped at n_train - 1.
  std::size_t k = 0;
};

/// Everything one run needs, with all defaults expanded so the serialized
/// form is self-describing. Sub-seeds are derived from the global seed
/// unless a config file pins them explicitly.
struct RunConfig {
  std::uint64_t seed = 7;
  std::string out_dir = "runs/run";
  std::size_t jobs = 0;  // 0 = hardware concurrency
  DatasetSource dataset;
  FoldConfig folds;
  MethodSpec method;
  ObjectiveConfig objective;
  TrainConfig train;
  ModelConfig model;
  NeighborConfig neighbors;

  void validate() const;
};

/// Re-derives every sub-seed from a new global seed.
void apply_global_seed(RunConfig& cfg, std::uint64_t seed);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

std::size_t resolve_k(const NeighborConfig& cfg, std::size_t n_train);

/// Wall-clock per phase; written to timings.txt, which is deliberately the
/// only non-deterministic artifact a run produces.
struct Timings {
  std::vector<std::pair<std::string, double>> phases;
  void add(const std::string& name, double seconds);
  std::string to_text() const;
};

/// Trained state for one fold; exactly one of `single`/`ensemble` is live.
struct FoldArtifacts {
  std::optional<TrainResult> single;
  std::optional<EnsembleTrainResult> ensemble;
  std::optional<CohortStats> cohorts;  // cura only
};

struct MethodRun {
  RunConfig config;
  std::vector<FoldArtifacts> folds;
  std::vector<ScoredSet> fold_scored;
  std::vector<EvalReport> fold_reports;
  AggregateReport aggregate;
  ScoredSet pooled;  // all test folds combined, in fold order
};

EmbeddingDataset load_dataset(const RunConfig& cfg);
FoldSplit make_folds(const EmbeddingDataset& ds, const RunConfig& cfg);

/// Trains the configured method on every fold (folds run concurrently up to
/// `jobs` workers; results are deterministic regardless of scheduling),
/// scores the test folds, and evaluates.
MethodRun run_method(const EmbeddingDataset& ds, const FoldSplit& folds,
                     const RunConfig& cfg, Timings* timings = nullptr);

/// Scores one fold's test set with the method's own inference rule.
ScoredSet score_fold(const FoldArtifacts& artifacts, const RunConfig& cfg,
                     const EmbeddingDataset& test_set, std::size_t fold);

// ---- pipeline commands (the CLI is a thin wrapper over these) ----

/// Writes <out>/dataset.csv + <out>/config.json; returns the dataset.
EmbeddingDataset cmd_synth(const RunConfig& cfg);

/// Trains per fold; writes config.json, folds.json, models/, logs/,
/// cohorts/ (cura), timings.txt.
MethodRun cmd_train(const RunConfig& cfg);

/// Loads a run directory produced by cmd_train, re-scores the test folds,
/// writes reports/ (per fold + aggregate + summary table); returns aggregate.
AggregateReport cmd_eval(const std::filesystem::path& run_dir);

/// Writes curves/ (risk-coverage, bins, retained AUPRC, workload-safety,
/// FRR sweep) over the combined test folds of a trained run.
void cmd_triage(const std::filesystem::path& run_dir);

struct GridSpec {
  RunConfig base;
  std::vector<double> lambda_ind_axis;
  std::vector<double> lambda_coh_axis;
  std::vector<MethodKind> methods;
  bool ablation = false;  // baseline / +ind / +coh / full, Table-style rows
};

GridSpec grid_spec_from_json(const std::string& text);

struct GridRow {
  std::string method;
  double lambda_ind = 0.0;
  double lambda_coh = 0.0;
  long fold = -1;
  double auroc = 0.0, auprc = 0.0, brier = 0.0, nll = 0.0, aurc = 0.0;
  std::string status = "ok";
};

/// Runs every cell end to end; a cell failure is recorded in its status and
/// the remaining cells still run. Writes <out>/results.csv.
std::vector<GridRow> cmd_grid(const GridSpec& grid);

std::string grid_rows_to_csv(const std::vector<GridRow>& rows,
                             const std::string& config_comment);

struct GradCheckReport {
  double max_param_rel_err = 0.0;     // backprop vs central differences
  double max_prob_rel_err = 0.0;      // objective gradient in the mean prob
  double max_identity_residual = 0.0; // soft-label rewrite residual
  double param_tol = 1e-4;
  double prob_tol = 1e-6;
  double identity_tol = 1e-10;
  bool pass = false;
};

/// Finite-difference verification on a tiny batch with all loss terms
/// active (and again with both lambdas zero), plus the soft-label identity
/// over 10000 random tuples.
GradCheckReport run_gradcheck(std::uint64_t seed);

/// Recursive byte comparison of two directories; `ignore` names files
/// excluded from the comparison (the wall-clock logs). Returns a mismatch
/// description, or an empty string when identical.
std::string compare_directories(
    const std::filesystem::path& a, const std::filesystem::path& b,
    const std::vector<std::string>& ignore = {"timings.txt", "timings_eval.txt",
                                              "timings_triage.txt"});

}  // namespace cura
