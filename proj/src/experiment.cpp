#include "cura/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cura/io.hpp"
#include "cura/objective.hpp"
#include "cura/rng.hpp"

namespace cura {

namespace {

constexpr std::uint64_t kSeedTagDataset = 101;
constexpr std::uint64_t kSeedTagFolds = 102;
constexpr std::uint64_t kSeedTagTrain = 103;
constexpr std::uint64_t kSeedTagMcEval = 104;
constexpr std::uint64_t kSeedTagGradCheck = 105;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs fn(0..n-1) on up to `jobs` workers. Each item writes only its own
// output slot, so results do not depend on scheduling.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::thread::hardware_concurrency();
  if (jobs == 0) jobs = 1;
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

HeadSpec make_head_spec(const RunConfig& cfg, double dropout_rate) {
  HeadSpec spec;
  spec.hidden_units = cfg.model.hidden_units;
  spec.dropout_rate = dropout_rate;
  spec.output_bias_shift = cfg.model.output_bias_shift;
  return spec;
}

}  // namespace

void RunConfig::validate() const {
  if (dataset.synthetic) {
    dataset.synth.validate();
    if (!dataset.csv_path.empty()) {
      throw std::runtime_error("config: both synthetic and csv dataset given");
    }
  } else if (dataset.csv_path.empty()) {
    throw std::runtime_error("config: need exactly one dataset source");
  }
  if (folds.n_folds < 2) throw std::runtime_error("config: n_folds < 2");
  if (!(folds.val_fraction > 0.0 && folds.val_fraction < 1.0)) {
    throw std::runtime_error("config: val_fraction must be in (0,1)");
  }
  method.validate();
  objective.validate();
  train.validate();
  if (model.n_heads < 1) throw std::runtime_error("config: n_heads < 1");
  if (model.hidden_units < 1) throw std::runtime_error("config: hidden_units < 1");
}

void apply_global_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.dataset.synth.seed = derive_seed(seed, kSeedTagDataset);
  cfg.folds.seed = derive_seed(seed, kSeedTagFolds);
  cfg.train.seed = derive_seed(seed, kSeedTagTrain);
}

std::string run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["jobs"] = cfg.jobs;
  if (cfg.dataset.synthetic) {
    j["dataset"]["synthetic"] = {
        {"n_samples", cfg.dataset.synth.n_samples},
        {"dim", cfg.dataset.synth.dim},
        {"n_clusters", cfg.dataset.synth.n_clusters},
        {"target_positive_rate", cfg.dataset.synth.target_positive_rate},
        {"ambiguity", cfg.dataset.synth.ambiguity},
        {"seed", cfg.dataset.synth.seed}};
  } else {
    j["dataset"]["csv"] = cfg.dataset.csv_path;
  }
  j["folds"] = {{"n_folds", cfg.folds.n_folds},
                {"val_fraction", cfg.folds.val_fraction},
                {"seed", cfg.folds.seed}};
  j["method"] = {{"kind", method_name(cfg.method.kind)},
                 {"mc_passes", cfg.method.mc_passes},
                 {"mc_dropout_rate", cfg.method.mc_dropout_rate},
                 {"ensemble_size", cfg.method.ensemble_size}};
  j["objective"] = {{"lambda_ind", cfg.objective.lambda_ind},
                    {"lambda_coh", cfg.objective.lambda_coh},
                    {"epsilon", cfg.objective.epsilon},
                    {"cohort_weighted_ce", cfg.objective.cohort_weighted_ce}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"max_epochs", cfg.train.max_epochs},
                {"batch_size", cfg.train.batch_size},
                {"patience", cfg.train.patience},
                {"class_weight_mode",
                 cfg.train.class_weight_mode == ClassWeightMode::kBalanced
                     ? "balanced"
                     : "none"},
                {"seed", cfg.train.seed}};
  j["model"] = {{"n_heads", cfg.model.n_heads},
                {"hidden_units", cfg.model.hidden_units},
                {"output_bias_shift", cfg.model.output_bias_shift}};
  j["neighbors"] = {{"k", cfg.neighbors.k}};
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunConfig cfg;
  apply_global_seed(cfg, j.value("seed", std::uint64_t{7}));
  cfg.out_dir = j.value("out", cfg.out_dir);
  cfg.jobs = j.value("jobs", cfg.jobs);

  if (j.contains("dataset")) {
    const auto& dj = j.at("dataset");
    if (dj.contains("csv")) {
      cfg.dataset.synthetic = false;
      cfg.dataset.csv_path = dj.at("csv").get<std::string>();
    } else if (dj.contains("synthetic")) {
      const auto& sj = dj.at("synthetic");
      SynthConfig& s = cfg.dataset.synth;
      s.n_samples = sj.value("n_samples", s.n_samples);
      s.dim = sj.value("dim", s.dim);
      s.n_clusters = sj.value("n_clusters", s.n_clusters);
      s.target_positive_rate =
          sj.value("target_positive_rate", s.target_positive_rate);
      s.ambiguity = sj.value("ambiguity", s.ambiguity);
      s.seed = sj.value("seed", s.seed);
    } else {
      throw std::runtime_error("config: dataset needs 'synthetic' or 'csv'");
    }
  }
  if (j.contains("folds")) {
    const auto& fj = j.at("folds");
    cfg.folds.n_folds = fj.value("n_folds", cfg.folds.n_folds);
    cfg.folds.val_fraction = fj.value("val_fraction", cfg.folds.val_fraction);
    cfg.folds.seed = fj.value("seed", cfg.folds.seed);
  }
  if (j.contains("method")) {
    const auto& mj = j.at("method");
    if (mj.contains("kind")) {
      cfg.method.kind = parse_method(mj.at("kind").get<std::string>());
    }
    cfg.method.mc_passes = mj.value("mc_passes", cfg.method.mc_passes);
    cfg.method.mc_dropout_rate =
        mj.value("mc_dropout_rate", cfg.method.mc_dropout_rate);
    cfg.method.ensemble_size =
        mj.value("ensemble_size", cfg.method.ensemble_size);
  }
  if (j.contains("objective")) {
    const auto& oj = j.at("objective");
    cfg.objective.lambda_ind = oj.value("lambda_ind", cfg.objective.lambda_ind);
    cfg.objective.lambda_coh = oj.value("lambda_coh", cfg.objective.lambda_coh);
    cfg.objective.epsilon = oj.value("epsilon", cfg.objective.epsilon);
    cfg.objective.cohort_weighted_ce =
        oj.value("cohort_weighted_ce", cfg.objective.cohort_weighted_ce);
  }
  if (j.contains("train")) {
    const auto& tj = j.at("train");
    cfg.train.learning_rate = tj.value("learning_rate", cfg.train.learning_rate);
    cfg.train.max_epochs = tj.value("max_epochs", cfg.train.max_epochs);
    cfg.train.batch_size = tj.value("batch_size", cfg.train.batch_size);
    cfg.train.patience = tj.value("patience", cfg.train.patience);
    if (tj.contains("class_weight_mode")) {
      const std::string mode = tj.at("class_weight_mode").get<std::string>();
      if (mode == "balanced") {
        cfg.train.class_weight_mode = ClassWeightMode::kBalanced;
      } else if (mode == "none") {
        cfg.train.class_weight_mode = ClassWeightMode::kNone;
      } else {
        throw std::runtime_error("config: class_weight_mode must be balanced|none");
      }
    }
    cfg.train.seed = tj.value("seed", cfg.train.seed);
  }
  if (j.contains("model")) {
    const auto& mj = j.at("model");
    cfg.model.n_heads = mj.value("n_heads", cfg.model.n_heads);
    cfg.model.hidden_units = mj.value("hidden_units", cfg.model.hidden_units);
    cfg.model.output_bias_shift =
        mj.value("output_bias_shift", cfg.model.output_bias_shift);
  }
  if (j.contains("neighbors")) {
    cfg.neighbors.k = j.at("neighbors").value("k", cfg.neighbors.k);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_file(path));
}

std::size_t resolve_k(const NeighborConfig& cfg, std::size_t n_train) {
  if (n_train < 2) throw std::runtime_error("resolve_k: need >= 2 samples");
  if (cfg.k > 0) return cfg.k;
  const std::size_t preferred = n_train >= 100000 ? 200 : 100;
  return std::min(preferred, n_train - 1);
}

void Timings::add(const std::string& name, double seconds) {
  phases.emplace_back(name, seconds);
}

std::string Timings::to_text() const {
  std::string out = "phase,seconds\n";
  for (const auto& [name, secs] : phases) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", secs);
    out += name + "," + buf + "\n";
  }
  return out;
}

EmbeddingDataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.synthetic) return generate_synthetic(cfg.dataset.synth);
  return load_csv(cfg.dataset.csv_path);
}

FoldSplit make_folds(const EmbeddingDataset& ds, const RunConfig& cfg) {
  return split_folds(ds, cfg.folds.n_folds, cfg.folds.val_fraction,
                     cfg.folds.seed);
}

namespace {

FoldArtifacts train_fold(const EmbeddingDataset& train_set,
                         const EmbeddingDataset& val_set, const RunConfig& cfg,
                         std::size_t fold) {
  FoldArtifacts art;
  switch (cfg.method.kind) {
    case MethodKind::kInternalBaseline:
      art.single = train_ce_fold(train_set, val_set, cfg.model.n_heads,
                                 make_head_spec(cfg, 0.0), cfg.train,
                                 cfg.objective, fold);
      break;
    case MethodKind::kMcDropout:
      art.single = train_ce_fold(train_set, val_set, cfg.model.n_heads,
                                 make_head_spec(cfg, cfg.method.mc_dropout_rate),
                                 cfg.train, cfg.objective, fold);
      break;
    case MethodKind::kDeepEnsemble:
      art.ensemble = train_ensemble_fold(
          train_set, val_set, cfg.model.n_heads, make_head_spec(cfg, 0.0),
          cfg.train, cfg.objective, cfg.method.ensemble_size, fold);
      break;
    case MethodKind::kCura: {
      HeadSpec head = make_head_spec(cfg, 0.0);
      const FoldSeeds seeds = fold_seeds(cfg.train.seed, fold);
      head.init_seed = seeds.init_seed;
      TrainConfig tc = cfg.train;
      tc.seed = seeds.train_seed;
      MultiHeadClassifier clf =
          init_classifier(train_set.dim, cfg.model.n_heads, head);
      const CohortStats* stats = nullptr;
      if (cfg.objective.lambda_coh > 0.0) {
        const std::size_t k = resolve_k(cfg.neighbors, train_set.n());
        const NeighborIndex idx =
            build_index(train_set.embeddings, train_set.dim, train_set.labels, k);
        art.cohorts = precompute_cohorts(idx, train_set, cfg.objective.lambda_coh);
        stats = &*art.cohorts;
      }
      art.single = train(std::move(clf), train_set, val_set, cfg.objective,
                         stats, tc);
      break;
    }
  }
  return art;
}

}  // namespace

ScoredSet score_fold(const FoldArtifacts& artifacts, const RunConfig& cfg,
                     const EmbeddingDataset& test_set, std::size_t fold) {
  Prediction pred;
  switch (cfg.method.kind) {
    case MethodKind::kInternalBaseline:
    case MethodKind::kCura:
      pred = predict(artifacts.single->model, test_set.embeddings, test_set.n());
      break;
    case MethodKind::kMcDropout:
      pred = predict_mc_dropout(artifacts.single->model, test_set.embeddings,
                                test_set.n(), cfg.method.mc_passes,
                                derive_seed(cfg.seed, kSeedTagMcEval, fold));
      break;
    case MethodKind::kDeepEnsemble:
      pred = predict_ensemble(artifacts.ensemble->model, test_set.embeddings,
                              test_set.n());
      break;
  }
  return make_scored(std::move(pred.mean_prob), test_set.labels,
                     method_name(cfg.method.kind), "fold" + std::to_string(fold));
}

MethodRun run_method(const EmbeddingDataset& ds, const FoldSplit& folds,
                     const RunConfig& cfg, Timings* timings) {
  cfg.validate();
  const auto t0 = Clock::now();
  MethodRun run;
  run.config = cfg;
  const std::size_t k = folds.n_folds;
  run.folds.resize(k);
  run.fold_scored.resize(k);
  run.fold_reports.resize(k);
  parallel_for(k, cfg.jobs, [&](std::size_t f) {
    const EmbeddingDataset train_set = subset(ds, folds.train_indices[f]);
    const EmbeddingDataset val_set = subset(ds, folds.val_indices[f]);
    const EmbeddingDataset test_set = subset(ds, folds.test_indices[f]);
    FoldArtifacts art = train_fold(train_set, val_set, cfg, f);
    run.fold_scored[f] = score_fold(art, cfg, test_set, f);
    run.fold_reports[f] = evaluate(run.fold_scored[f]);
    run.folds[f] = std::move(art);
  });
  run.aggregate = aggregate_reports(run.fold_reports);

  run.pooled.method = method_name(cfg.method.kind);
  run.pooled.fold = "all";
  for (const ScoredSet& s : run.fold_scored) {
    run.pooled.prob.insert(run.pooled.prob.end(), s.prob.begin(), s.prob.end());
    run.pooled.uncertainty.insert(run.pooled.uncertainty.end(),
                                  s.uncertainty.begin(), s.uncertainty.end());
    run.pooled.label.insert(run.pooled.label.end(), s.label.begin(),
                            s.label.end());
  }
  if (timings != nullptr) {
    timings->add("train_and_score_" + method_name(cfg.method.kind),
                 seconds_since(t0));
  }
  return run;
}

namespace {

std::string with_config_comment(const std::string& body, const RunConfig& cfg) {
  const auto j = nlohmann::json::parse(run_config_to_json(cfg));
  return "# config " + j.dump() + "\n" + body;
}

std::string json_with_config(const std::string& body, const RunConfig& cfg,
                             int indent) {
  auto j = nlohmann::json::parse(body);
  j["config"] = nlohmann::json::parse(run_config_to_json(cfg));
  return indent > 0 ? j.dump(indent) : j.dump();
}

std::filesystem::path out_path(const RunConfig& cfg, const std::string& rel) {
  return std::filesystem::path(cfg.out_dir) / rel;
}

}  // namespace

EmbeddingDataset cmd_synth(const RunConfig& cfg) {
  if (!cfg.dataset.synthetic) {
    throw std::runtime_error("synth: config must use a synthetic dataset");
  }
  cfg.dataset.synth.validate();
  const EmbeddingDataset ds = generate_synthetic(cfg.dataset.synth);
  atomic_write_file(out_path(cfg, "dataset.csv"), dataset_to_csv(ds));
  atomic_write_file(out_path(cfg, "config.json"), run_config_to_json(cfg));
  std::cout << "wrote " << out_path(cfg, "dataset.csv").string() << ": n="
            << ds.n() << " dim=" << ds.dim
            << " positive_rate=" << fmt_double(ds.positive_rate()) << "\n";
  return ds;
}

MethodRun cmd_train(const RunConfig& cfg) {
  cfg.validate();
  Timings timings;
  auto t0 = Clock::now();
  const EmbeddingDataset ds = load_dataset(cfg);
  timings.add("dataset", seconds_since(t0));

  t0 = Clock::now();
  const FoldSplit folds = make_folds(ds, cfg);
  timings.add("folds", seconds_since(t0));

  MethodRun run = run_method(ds, folds, cfg, &timings);

  t0 = Clock::now();
  atomic_write_file(out_path(cfg, "config.json"), run_config_to_json(cfg));
  atomic_write_file(out_path(cfg, "folds.json"), fold_split_to_json(folds));
  for (std::size_t f = 0; f < folds.n_folds; ++f) {
    const std::string tag = "fold" + std::to_string(f);
    const FoldArtifacts& art = run.folds[f];
    if (art.ensemble.has_value()) {
      atomic_write_file(out_path(cfg, "models/" + tag + ".json"),
                        json_with_config(ensemble_to_json(art.ensemble->model),
                                         cfg, 0));
      for (std::size_t j = 0; j < art.ensemble->member_logs.size(); ++j) {
        atomic_write_file(
            out_path(cfg, "logs/" + tag + "_member" + std::to_string(j) +
                              "_training.csv"),
            with_config_comment(
                training_log_to_csv(art.ensemble->member_logs[j]), cfg));
      }
    } else {
      atomic_write_file(out_path(cfg, "models/" + tag + ".json"),
                        json_with_config(model_to_json(art.single->model), cfg,
                                         0));
      atomic_write_file(
          out_path(cfg, "logs/" + tag + "_training.csv"),
          with_config_comment(training_log_to_csv(art.single->log), cfg));
    }
    if (art.cohorts.has_value()) {
      const EmbeddingDataset train_set = subset(ds, folds.train_indices[f]);
      atomic_write_file(
          out_path(cfg, "cohorts/" + tag + ".csv"),
          with_config_comment(cohort_stats_to_csv(*art.cohorts, train_set.ids),
                              cfg));
    }
  }
  timings.add("write_artifacts", seconds_since(t0));
  atomic_write_file(out_path(cfg, "timings.txt"), timings.to_text());
  std::cout << "trained " << method_name(cfg.method.kind) << " on "
            << folds.n_folds << " folds into " << cfg.out_dir << "\n";
  return run;
}

namespace {

struct LoadedRun {
  RunConfig config;
  EmbeddingDataset ds;
  FoldSplit folds;
  std::vector<FoldArtifacts> artifacts;
};

LoadedRun load_run(const std::filesystem::path& run_dir) {
  LoadedRun out;
  out.config = load_run_config(run_dir / "config.json");
  out.ds = load_dataset(out.config);
  out.folds = fold_split_from_json(read_file(run_dir / "folds.json"), out.ds,
                                   out.config.folds.val_fraction,
                                   out.config.folds.seed);
  out.artifacts.resize(out.folds.n_folds);
  for (std::size_t f = 0; f < out.folds.n_folds; ++f) {
    const std::string text =
        read_file(run_dir / ("models/fold" + std::to_string(f) + ".json"));
    if (out.config.method.kind == MethodKind::kDeepEnsemble) {
      EnsembleTrainResult r;
      r.model = ensemble_from_json(text);
      out.artifacts[f].ensemble = std::move(r);
    } else {
      TrainResult r;
      r.model = model_from_json(text);
      out.artifacts[f].single = std::move(r);
    }
  }
  return out;
}

std::string summary_table(std::span<const EvalReport> reports,
                          const AggregateReport& agg) {
  char buf[256];
  std::string out =
      "fold        AUROC    AUPRC    Brier      NLL     AURC\n";
  for (const EvalReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-9s %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                  r.fold.c_str(), r.auroc, r.auprc, r.brier, r.nll, r.aurc);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "mean (sd) %.4f (%.4f) | %.4f (%.4f) | %.4f (%.4f) | %.4f "
                "(%.4f) | %.4f (%.4f)\n",
                agg.auroc_mean, agg.auroc_sd, agg.auprc_mean, agg.auprc_sd,
                agg.brier_mean, agg.brier_sd, agg.nll_mean, agg.nll_sd,
                agg.aurc_mean, agg.aurc_sd);
  out += buf;
  return out;
}

}  // namespace

AggregateReport cmd_eval(const std::filesystem::path& run_dir) {
  Timings timings;
  const auto t0 = Clock::now();
  LoadedRun run = load_run(run_dir);
  std::vector<EvalReport> reports(run.folds.n_folds);
  parallel_for(run.folds.n_folds, run.config.jobs, [&](std::size_t f) {
    const EmbeddingDataset test_set = subset(run.ds, run.folds.test_indices[f]);
    const ScoredSet scored = score_fold(run.artifacts[f], run.config, test_set, f);
    reports[f] = evaluate(scored);
  });
  const AggregateReport agg = aggregate_reports(reports);
  for (std::size_t f = 0; f < reports.size(); ++f) {
    atomic_write_file(
        run_dir / ("reports/fold" + std::to_string(f) + ".json"),
        json_with_config(report_to_json(reports[f]), run.config, 2));
  }
  atomic_write_file(run_dir / "reports/aggregate.json",
                    json_with_config(aggregate_to_json(agg), run.config, 2));
  const std::string table =
      "method: " + method_name(run.config.method.kind) + "\n" +
      summary_table(reports, agg);
  atomic_write_file(run_dir / "reports/summary.txt", table);
  timings.add("eval", seconds_since(t0));
  atomic_write_file(run_dir / "timings_eval.txt", timings.to_text());
  std::cout << table;
  return agg;
}

void cmd_triage(const std::filesystem::path& run_dir) {
  Timings timings;
  const auto t0 = Clock::now();
  LoadedRun run = load_run(run_dir);
  ScoredSet pooled;
  pooled.method = method_name(run.config.method.kind);
  pooled.fold = "all";
  for (std::size_t f = 0; f < run.folds.n_folds; ++f) {
    const EmbeddingDataset test_set = subset(run.ds, run.folds.test_indices[f]);
    const ScoredSet s = score_fold(run.artifacts[f], run.config, test_set, f);
    pooled.prob.insert(pooled.prob.end(), s.prob.begin(), s.prob.end());
    pooled.uncertainty.insert(pooled.uncertainty.end(), s.uncertainty.begin(),
                              s.uncertainty.end());
    pooled.label.insert(pooled.label.end(), s.label.begin(), s.label.end());
  }
  const EvalOptions opts;
  const EvalReport report = evaluate(pooled, opts);
  const auto frr = frr_sweep(pooled);
  atomic_write_file(run_dir / "curves/risk_coverage.csv",
                    with_config_comment(risk_coverage_to_csv(report.risk_coverage),
                                        run.config));
  atomic_write_file(run_dir / "curves/bins.csv",
                    with_config_comment(bins_to_csv(report.bins), run.config));
  atomic_write_file(
      run_dir / "curves/retained_auprc.csv",
      with_config_comment(retained_auprc_to_csv(report.retained_auprc),
                          run.config));
  atomic_write_file(
      run_dir / "curves/workload_safety.csv",
      with_config_comment(workload_safety_to_csv(report.workload_safety),
                          run.config));
  atomic_write_file(run_dir / "curves/frr.csv",
                    with_config_comment(frr_to_csv(frr), run.config));
  timings.add("triage", seconds_since(t0));
  atomic_write_file(run_dir / "timings_triage.txt", timings.to_text());
  std::cout << "wrote triage curves for " << pooled.method << " into "
            << (run_dir / "curves").string() << "\n";
}

GridSpec grid_spec_from_json(const std::string& text) {
  GridSpec spec;
  spec.base = run_config_from_json(text);
  const auto j = nlohmann::json::parse(text);
  if (j.contains("grid")) {
    const auto& gj = j.at("grid");
    spec.lambda_ind_axis =
        gj.value("lambda_ind", std::vector<double>{spec.base.objective.lambda_ind});
    spec.lambda_coh_axis =
        gj.value("lambda_coh", std::vector<double>{spec.base.objective.lambda_coh});
    if (gj.contains("methods")) {
      for (const auto& name : gj.at("methods")) {
        spec.methods.push_back(parse_method(name.get<std::string>()));
      }
    }
    spec.ablation = gj.value("ablation", false);
  }
  if (spec.lambda_ind_axis.empty()) {
    spec.lambda_ind_axis = {spec.base.objective.lambda_ind};
  }
  if (spec.lambda_coh_axis.empty()) {
    spec.lambda_coh_axis = {spec.base.objective.lambda_coh};
  }
  if (spec.methods.empty()) spec.methods = {spec.base.method.kind};
  return spec;
}

std::vector<GridRow> cmd_grid(const GridSpec& grid) {
  grid.base.validate();
  struct Cell {
    MethodKind method;
    double lambda_ind;
    double lambda_coh;
  };
  std::vector<Cell> cells;
  if (grid.ablation) {
    const double li = grid.base.objective.lambda_ind;
    const double lc = grid.base.objective.lambda_coh;
    cells.push_back({MethodKind::kInternalBaseline, 0.0, 0.0});
    cells.push_back({MethodKind::kCura, li, 0.0});
    cells.push_back({MethodKind::kCura, 0.0, lc});
    cells.push_back({MethodKind::kCura, li, lc});
  } else {
    for (const MethodKind m : grid.methods) {
      if (m == MethodKind::kCura) {
        for (const double li : grid.lambda_ind_axis) {
          for (const double lc : grid.lambda_coh_axis) {
            cells.push_back({m, li, lc});
          }
        }
      } else {
        cells.push_back({m, 0.0, 0.0});
      }
    }
  }

  // Dataset and folds are seed-determined and method-independent: build once.
  const EmbeddingDataset ds = load_dataset(grid.base);
  const FoldSplit folds = make_folds(ds, grid.base);

  std::vector<GridRow> rows;
  for (const Cell& cell : cells) {
    RunConfig cfg = grid.base;
    cfg.method.kind = cell.method;
    cfg.objective.lambda_ind = cell.lambda_ind;
    cfg.objective.lambda_coh = cell.lambda_coh;
    try {
      const MethodRun run = run_method(ds, folds, cfg);
      for (std::size_t f = 0; f < run.fold_reports.size(); ++f) {
        const EvalReport& r = run.fold_reports[f];
        rows.push_back({method_name(cell.method), cell.lambda_ind,
                        cell.lambda_coh, static_cast<long>(f), r.auroc, r.auprc,
                        r.brier, r.nll, r.aurc, "ok"});
      }
    } catch (const std::exception& e) {
      std::string reason = e.what();
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      const double nan = std::nan("");
      rows.push_back({method_name(cell.method), cell.lambda_ind,
                      cell.lambda_coh, -1, nan, nan, nan, nan, nan,
                      "error: " + reason});
    }
  }

  const auto j = nlohmann::json::parse(run_config_to_json(grid.base));
  atomic_write_file(out_path(grid.base, "results.csv"),
                    grid_rows_to_csv(rows, j.dump()));
  std::cout << "grid finished: " << cells.size() << " cells, "
            << rows.size() << " rows -> "
            << out_path(grid.base, "results.csv").string() << "\n";
  return rows;
}

std::string grid_rows_to_csv(const std::vector<GridRow>& rows,
                             const std::string& config_comment) {
  std::string out;
  if (!config_comment.empty()) {
    out += "# config " + config_comment + "\n";
  }
  out += "method,lambda_ind,lambda_coh,fold,auroc,auprc,brier,nll,aurc,status\n";
  for (const GridRow& r : rows) {
    out += r.method;
    out += ',';
    out += fmt_double(r.lambda_ind);
    out += ',';
    out += fmt_double(r.lambda_coh);
    out += ',';
    out += std::to_string(r.fold);
    out += ',';
    out += fmt_double(r.auroc);
    out += ',';
    out += fmt_double(r.auprc);
    out += ',';
    out += fmt_double(r.brier);
    out += ',';
    out += fmt_double(r.nll);
    out += ',';
    out += fmt_double(r.aurc);
    out += ',';
    out += r.status;
    out += '\n';
  }
  return out;
}

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-2});
}

double loss_at(const MultiHeadClassifier& clf, std::span<const double> x,
               std::size_t n, std::span<const int> y, std::span<const double> q,
               std::span<const double> w, const ObjectiveConfig& obj) {
  const ForwardResult fw = forward(clf, x, n, false, nullptr);
  return loss_total(fw.mean, y, q, w, obj).l_total;
}

double max_param_fd_error(MultiHeadClassifier& clf, std::span<const double> x,
                          std::size_t n, std::span<const int> y,
                          std::span<const double> q, std::span<const double> w,
                          const ObjectiveConfig& obj) {
  const BatchGradients grads = parameter_gradients(clf, x, n, y, q, w, obj);
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + kStep;
    const double up = loss_at(clf, x, n, y, q, w, obj);
    param = saved - kStep;
    const double down = loss_at(clf, x, n, y, q, w, obj);
    param = saved;
    const double fd = (up - down) / (2.0 * kStep);
    worst = std::max(worst, rel_err(analytic, fd));
  };
  for (std::size_t m = 0; m < clf.n_heads; ++m) {
    HeadParams& h = clf.heads[m];
    const HeadGradients& g = grads.heads[m];
    for (std::size_t i = 0; i < h.w1.size(); ++i) check(h.w1[i], g.w1[i]);
    for (std::size_t i = 0; i < h.b1.size(); ++i) check(h.b1[i], g.b1[i]);
    for (std::size_t i = 0; i < h.w2.size(); ++i) check(h.w2[i], g.w2[i]);
    check(h.b2, g.b2);
  }
  return worst;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed) {
  GradCheckReport report;
  Rng rng(derive_seed(seed, kSeedTagGradCheck));

  constexpr std::size_t kDim = 4, kHeads = 3, kHidden = 8, kBatch = 5;
  HeadSpec spec;
  spec.hidden_units = kHidden;
  spec.init_seed = derive_seed(seed, kSeedTagGradCheck, 1);
  MultiHeadClassifier clf = init_classifier(kDim, kHeads, spec);

  std::vector<double> x(kBatch * kDim);
  for (double& v : x) v = rng.normal() * 1.5;
  const std::vector<int> y = {1, 0, 1, 0, 0};
  std::vector<double> q(kBatch), w(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) {
    q[i] = rng.uniform(0.1, 0.9);
    w[i] = 0.01 * normalized_entropy(q[i]);  // nonzero cohort weights
  }

  ObjectiveConfig full;
  full.lambda_ind = 0.5;
  full.lambda_coh = 0.01;
  full.w_pos = 2.0;
  full.w_neg = 0.8;
  report.max_param_rel_err =
      max_param_fd_error(clf, x, kBatch, y, q, w, full);

  ObjectiveConfig ce_only = full;
  ce_only.lambda_ind = 0.0;
  ce_only.lambda_coh = 0.0;
  report.max_param_rel_err =
      std::max(report.max_param_rel_err,
               max_param_fd_error(clf, x, kBatch, y, {}, {}, ce_only));

  // Objective-level derivative in the mean probability, checked directly.
  {
    constexpr double kStep = 1e-6;
    std::vector<double> p(kBatch);
    for (double& v : p) {
      v = rng.uniform(0.05, 0.45) + (rng.bernoulli(0.5) ? 0.5 : 0.0);
    }
    const LossBreakdown base = loss_total(p, y, q, w, full);
    for (std::size_t i = 0; i < kBatch; ++i) {
      std::vector<double> up = p, down = p;
      up[i] += kStep;
      down[i] -= kStep;
      const double fd = (loss_total(up, y, q, w, full).l_total -
                         loss_total(down, y, q, w, full).l_total) /
                        (2.0 * kStep);
      report.max_prob_rel_err =
          std::max(report.max_prob_rel_err,
                   rel_err(base.grad_wrt_mean_prob[i], fd));
    }
  }

  for (std::size_t t = 0; t < 10000; ++t) {
    const double eps = 1e-7;
    const double p = eps + (1.0 - 2.0 * eps) * rng.uniform();
    const int label = rng.bernoulli(0.5) ? 1 : 0;
    const double qv = rng.uniform();
    const double wv = rng.uniform(0.0, 10.0);
    report.max_identity_residual =
        std::max(report.max_identity_residual,
                 verify_soft_label_identity(p, label, qv, wv));
  }

  report.pass = report.max_param_rel_err < report.param_tol &&
                report.max_prob_rel_err < report.prob_tol &&
                report.max_identity_residual < report.identity_tol;
  return report;
}

std::string compare_directories(const std::filesystem::path& a,
                                const std::filesystem::path& b,
                                const std::vector<std::string>& ignore) {
  namespace fs = std::filesystem;
  auto listing = [&](const fs::path& root) {
    std::vector<std::string> rel;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (std::find(ignore.begin(), ignore.end(), name) != ignore.end()) {
        continue;
      }
      rel.push_back(fs::relative(entry.path(), root).string());
    }
    std::sort(rel.begin(), rel.end());
    return rel;
  };
  const auto files_a = listing(a);
  const auto files_b = listing(b);
  if (files_a != files_b) {
    return "file sets differ between " + a.string() + " and " + b.string();
  }
  for (const std::string& rel : files_a) {
    if (read_file(a / rel) != read_file(b / rel)) {
      return "content differs: " + rel;
    }
  }
  return "";
}

}  // namespace cura
