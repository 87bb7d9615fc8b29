#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cura/dataset.hpp"
#include "cura/multihead.hpp"

namespace cura {

enum class MethodKind { kInternalBaseline, kCura, kMcDropout, kDeepEnsemble };

MethodKind parse_method(const std::string& name);
std::string method_name(MethodKind kind);

/// How a method derives its predictions; all methods share the multi-head
/// architecture and training loop, so a diff between two methods touches
/// only these fields (plus the objective lambdas for the full method).
struct MethodSpec {
  MethodKind kind = MethodKind::kCura;
  std::size_t mc_passes = 10;      // stochastic forward passes at inference
  double mc_dropout_rate = 0.5;    // hidden dropout for the MC Dropout method
  std::size_t ensemble_size = 5;   // independently initialized members

  void validate() const;
};

/// Per-fold seed derivation shared by every method, so two methods under the
/// same global seed start from identical parameters.
struct FoldSeeds {
  std::uint64_t init_seed = 0;
  std::uint64_t train_seed = 0;
};

FoldSeeds fold_seeds(std::uint64_t base_seed, std::size_t fold);

/// Ensemble member j trains from base_seed + j * kMemberSeedStride; member 0
/// uses the base seed itself, so a size-1 ensemble reproduces the internal
/// baseline exactly.
constexpr std::uint64_t kMemberSeedStride = 1000003;

struct EnsembleModel {
  std::vector<MultiHeadClassifier> members;
};

struct EnsembleTrainResult {
  EnsembleModel model;
  std::vector<TrainingLog> member_logs;
};

/// CE-only training of one fold (both uncertainty lambdas forced to zero);
/// init/train seeds are derived from cfg.seed and the fold number.
TrainResult train_ce_fold(const EmbeddingDataset& train_set,
                          const EmbeddingDataset& val_set, std::size_t n_heads,
                          HeadSpec head, TrainConfig cfg,
                          ObjectiveConfig objective, std::size_t fold);

EnsembleTrainResult train_ensemble_fold(const EmbeddingDataset& train_set,
                                        const EmbeddingDataset& val_set,
                                        std::size_t n_heads, HeadSpec head,
                                        TrainConfig cfg,
                                        ObjectiveConfig objective,
                                        std::size_t ensemble_size,
                                        std::size_t fold);

/// One classifier per fold trained with class-weighted CE only (both
/// uncertainty lambdas forced to zero).
std::vector<TrainResult> run_internal_baseline(const EmbeddingDataset& ds,
                                               const FoldSplit& folds,
                                               std::size_t n_heads,
                                               HeadSpec head, TrainConfig cfg,
                                               ObjectiveConfig objective);

/// T stochastic forward passes with dropout kept active; the final
/// probability is the mean across passes and the uncertainty is the
/// normalized entropy of that mean. Deterministic under a fixed seed.
Prediction predict_mc_dropout(const MultiHeadClassifier& model,
                              std::span<const double> batch,
                              std::size_t batch_size, std::size_t passes,
                              std::uint64_t seed);

/// Trains ensemble_size independent CE-only classifiers per fold (each the
/// full multi-head architecture); members share the fold's data split.
std::vector<EnsembleTrainResult> run_deep_ensemble(
    const EmbeddingDataset& ds, const FoldSplit& folds, std::size_t n_heads,
    HeadSpec head, TrainConfig cfg, ObjectiveConfig objective,
    std::size_t ensemble_size);

/// Mean of the member mean-probabilities; uncertainty from that mean.
Prediction predict_ensemble(const EnsembleModel& model,
                            std::span<const double> batch,
                            std::size_t batch_size);

std::string ensemble_to_json(const EnsembleModel& model);
EnsembleModel ensemble_from_json(const std::string& text);

}  // namespace cura
