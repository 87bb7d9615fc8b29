#include "cura/baselines.hpp"

#include <stdexcept>

#include <json.hpp>

#include "cura/objective.hpp"
#include "cura/rng.hpp"

namespace cura {

namespace {

constexpr std::uint64_t kSeedTagFoldInit = 41;
constexpr std::uint64_t kSeedTagFoldTrain = 42;
constexpr std::uint64_t kSeedTagMcPasses = 43;

}  // namespace

MethodKind parse_method(const std::string& name) {
  if (name == "internal_baseline") return MethodKind::kInternalBaseline;
  if (name == "cura") return MethodKind::kCura;
  if (name == "mc_dropout") return MethodKind::kMcDropout;
  if (name == "deep_ensemble") return MethodKind::kDeepEnsemble;
  throw std::runtime_error(
      "unknown method '" + name +
      "' (expected internal_baseline, cura, mc_dropout, deep_ensemble)");
}

std::string method_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::kInternalBaseline: return "internal_baseline";
    case MethodKind::kCura: return "cura";
    case MethodKind::kMcDropout: return "mc_dropout";
    case MethodKind::kDeepEnsemble: return "deep_ensemble";
  }
  throw std::runtime_error("unknown method kind");
}

void MethodSpec::validate() const {
  if (mc_passes < 1) throw std::runtime_error("method: mc_passes must be >= 1");
  if (!(mc_dropout_rate >= 0.0 && mc_dropout_rate < 1.0)) {
    throw std::runtime_error("method: mc_dropout_rate must be in [0,1)");
  }
  if (ensemble_size < 1) {
    throw std::runtime_error("method: ensemble_size must be >= 1");
  }
}

FoldSeeds fold_seeds(std::uint64_t base_seed, std::size_t fold) {
  return {derive_seed(base_seed, kSeedTagFoldInit, fold),
          derive_seed(base_seed, kSeedTagFoldTrain, fold)};
}

TrainResult train_ce_fold(const EmbeddingDataset& train_set,
                          const EmbeddingDataset& val_set, std::size_t n_heads,
                          HeadSpec head, TrainConfig cfg,
                          ObjectiveConfig objective, std::size_t fold) {
  objective.lambda_ind = 0.0;
  objective.lambda_coh = 0.0;
  const FoldSeeds seeds = fold_seeds(cfg.seed, fold);
  head.init_seed = seeds.init_seed;
  cfg.seed = seeds.train_seed;
  MultiHeadClassifier clf = init_classifier(train_set.dim, n_heads, head);
  return train(std::move(clf), train_set, val_set, objective, nullptr, cfg);
}

EnsembleTrainResult train_ensemble_fold(const EmbeddingDataset& train_set,
                                        const EmbeddingDataset& val_set,
                                        std::size_t n_heads, HeadSpec head,
                                        TrainConfig cfg,
                                        ObjectiveConfig objective,
                                        std::size_t ensemble_size,
                                        std::size_t fold) {
  if (ensemble_size < 1) {
    throw std::runtime_error("train_ensemble_fold: ensemble_size must be >= 1");
  }
  EnsembleTrainResult result;
  for (std::size_t j = 0; j < ensemble_size; ++j) {
    TrainConfig member_cfg = cfg;
    member_cfg.seed =
        cfg.seed + static_cast<std::uint64_t>(j) * kMemberSeedStride;
    TrainResult tr = train_ce_fold(train_set, val_set, n_heads, head,
                                   member_cfg, objective, fold);
    result.model.members.push_back(std::move(tr.model));
    result.member_logs.push_back(std::move(tr.log));
  }
  return result;
}

std::vector<TrainResult> run_internal_baseline(const EmbeddingDataset& ds,
                                               const FoldSplit& folds,
                                               std::size_t n_heads,
                                               HeadSpec head, TrainConfig cfg,
                                               ObjectiveConfig objective) {
  std::vector<TrainResult> out;
  out.reserve(folds.n_folds);
  for (std::size_t f = 0; f < folds.n_folds; ++f) {
    const EmbeddingDataset train_set = subset(ds, folds.train_indices[f]);
    const EmbeddingDataset val_set = subset(ds, folds.val_indices[f]);
    out.push_back(train_ce_fold(train_set, val_set, n_heads, head, cfg,
                                objective, f));
  }
  return out;
}

Prediction predict_mc_dropout(const MultiHeadClassifier& model,
                              std::span<const double> batch,
                              std::size_t batch_size, std::size_t passes,
                              std::uint64_t seed) {
  if (passes < 1) {
    throw std::runtime_error("predict_mc_dropout: passes must be >= 1");
  }
  Rng rng(derive_seed(seed, kSeedTagMcPasses));
  std::vector<double> sum(batch_size, 0.0);
  for (std::size_t t = 0; t < passes; ++t) {
    const ForwardResult fw = forward(model, batch, batch_size, true, &rng);
    for (std::size_t b = 0; b < batch_size; ++b) sum[b] += fw.mean[b];
  }
  Prediction pred;
  pred.mean_prob.resize(batch_size);
  pred.uncertainty.resize(batch_size);
  const double inv_t = 1.0 / static_cast<double>(passes);
  for (std::size_t b = 0; b < batch_size; ++b) {
    pred.mean_prob[b] = sum[b] * inv_t;
    pred.uncertainty[b] = normalized_entropy(pred.mean_prob[b]);
  }
  return pred;
}

std::vector<EnsembleTrainResult> run_deep_ensemble(
    const EmbeddingDataset& ds, const FoldSplit& folds, std::size_t n_heads,
    HeadSpec head, TrainConfig cfg, ObjectiveConfig objective,
    std::size_t ensemble_size) {
  std::vector<EnsembleTrainResult> out;
  out.reserve(folds.n_folds);
  for (std::size_t f = 0; f < folds.n_folds; ++f) {
    const EmbeddingDataset train_set = subset(ds, folds.train_indices[f]);
    const EmbeddingDataset val_set = subset(ds, folds.val_indices[f]);
    out.push_back(train_ensemble_fold(train_set, val_set, n_heads, head, cfg,
                                      objective, ensemble_size, f));
  }
  return out;
}

Prediction predict_ensemble(const EnsembleModel& model,
                            std::span<const double> batch,
                            std::size_t batch_size) {
  if (model.members.empty()) {
    throw std::runtime_error("predict_ensemble: empty ensemble");
  }
  std::vector<double> sum(batch_size, 0.0);
  for (const MultiHeadClassifier& member : model.members) {
    const ForwardResult fw = forward(member, batch, batch_size, false, nullptr);
    for (std::size_t b = 0; b < batch_size; ++b) sum[b] += fw.mean[b];
  }
  Prediction pred;
  pred.mean_prob.resize(batch_size);
  pred.uncertainty.resize(batch_size);
  const double inv_m = 1.0 / static_cast<double>(model.members.size());
  for (std::size_t b = 0; b < batch_size; ++b) {
    pred.mean_prob[b] = sum[b] * inv_m;
    pred.uncertainty[b] = normalized_entropy(pred.mean_prob[b]);
  }
  return pred;
}

std::string ensemble_to_json(const EnsembleModel& model) {
  nlohmann::json j;
  j["format"] = "cura-ensemble-v1";
  nlohmann::json members = nlohmann::json::array();
  for (const MultiHeadClassifier& m : model.members) {
    members.push_back(nlohmann::json::parse(model_to_json(m)));
  }
  j["members"] = std::move(members);
  return j.dump();
}

EnsembleModel ensemble_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format").get<std::string>() != "cura-ensemble-v1") {
    throw std::runtime_error("ensemble: unknown format tag");
  }
  EnsembleModel model;
  for (const auto& mj : j.at("members")) {
    model.members.push_back(model_from_json(mj.dump()));
  }
  if (model.members.empty()) {
    throw std::runtime_error("ensemble: no members");
  }
  return model;
}

}  // namespace cura
