#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cura/dataset.hpp"
#include "cura/neighbors.hpp"
#include "cura/objective.hpp"
#include "cura/rng.hpp"

namespace cura {

/// One hidden rectifier layer per head; the only supported activation.
struct HeadSpec {
  std::size_t hidden_units = 64;
  std::string activation = "relu";
  double dropout_rate = 0.0;  // hidden-layer dropout; 0 disables entirely
  std::uint64_t init_seed = 0;
  // Constant added to the output bias at init so the ensemble mean starts in
  // the negative-class region. A symmetric start (mean probability 0.5) is an
  // unstable point of the combined objective: the calibration term's loss
  // barrier at p = 0.5 can trap whole feature regions on the wrong side.
  double output_bias_shift = -0.5;

  void validate() const;
};

struct HeadParams {
  std::vector<double> w1;  // input_dim x hidden_units, input-major
  std::vector<double> b1;  // hidden_units
  std::vector<double> w2;  // hidden_units
  double b2 = 0.0;
};

/// M independently parameterized MLP heads over a shared input. No parameter
/// is shared between heads; the ensemble prediction is the plain arithmetic
/// mean of the per-head sigmoid outputs.
struct MultiHeadClassifier {
  std::size_t input_dim = 0;
  std::size_t n_heads = 0;
  std::size_t hidden_units = 0;
  double dropout_rate = 0.0;
  std::vector<HeadParams> heads;

  void check_finite() const;  // throws if any parameter is non-finite
};

/// Fan-in-scaled uniform init; head m draws from seed init_seed + m.
MultiHeadClassifier init_classifier(std::size_t input_dim, std::size_t n_heads,
                                    const HeadSpec& spec);

/// Same, with an explicit seed per head (used to check that permuting head
/// seeds permutes head outputs without changing the mean).
MultiHeadClassifier init_classifier_with_seeds(
    std::size_t input_dim, const HeadSpec& spec,
    std::span<const std::uint64_t> head_seeds);

constexpr double kProbClamp = 1e-7;

struct ForwardResult {
  std::vector<double> per_head;  // n_heads x batch, row-major
  std::vector<double> mean;      // batch
};

/// Per-head probabilities (sigmoid outputs clamped to [1e-7, 1-1e-7]) and
/// their mean. With dropout_active=false the pass is deterministic and `rng`
/// may be null; dropout draws nothing when the rate is zero.
ForwardResult forward(const MultiHeadClassifier& clf,
                      std::span<const double> batch, std::size_t batch_size,
                      bool dropout_active, Rng* rng);

enum class ClassWeightMode { kBalanced, kNone };

struct ClassWeights {
  double w_pos = 1.0;
  double w_neg = 1.0;
};

/// Balanced mode: w_pos = n/(2*n_pos), w_neg = n/(2*n_neg) over the given
/// training labels.
ClassWeights resolve_class_weights(std::span<const int> labels,
                                   ClassWeightMode mode);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t max_epochs = 50;
  std::size_t batch_size = 256;
  std::size_t patience = 15;
  ClassWeightMode class_weight_mode = ClassWeightMode::kBalanced;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double l_base = 0.0;
  double l_ind = 0.0;
  double l_coh = 0.0;
  double l_total = 0.0;
  double val_nll = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // epoch whose parameters were restored
  double best_val_nll = 0.0;
};

std::string training_log_to_csv(const TrainingLog& log);

struct TrainResult {
  MultiHeadClassifier model;
  TrainingLog log;
  ObjectiveConfig resolved_objective;  // class weights expanded
};

/// Mini-batch training of the combined objective with adaptive moment
/// estimation at the configured rate, epoch-level early stopping on
/// validation NLL, and restoration of the best epoch's parameters.
/// `cohorts` must cover every training sample when lambda_coh > 0 and may be
/// null otherwise. Aborts (throws) on any non-finite loss or gradient, with
/// the epoch/batch location in the message.
TrainResult train(MultiHeadClassifier clf, const EmbeddingDataset& train_data,
                  const EmbeddingDataset& val_data,
                  const ObjectiveConfig& objective, const CohortStats* cohorts,
                  const TrainConfig& cfg);

struct HeadGradients {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
};

struct BatchGradients {
  LossBreakdown loss;
  std::vector<HeadGradients> heads;
};

/// Full analytic parameter gradient of the batch loss (dropout inactive),
/// computed through the same backward pass the training loop uses. q/w may
/// be empty when the cohort term is off.
BatchGradients parameter_gradients(const MultiHeadClassifier& clf,
                                   std::span<const double> batch,
                                   std::size_t batch_size,
                                   std::span<const int> y,
                                   std::span<const double> q,
                                   std::span<const double> w,
                                   const ObjectiveConfig& objective);

struct Prediction {
  std::vector<double> mean_prob;
  std::vector<double> uncertainty;  // normalized entropy of mean_prob
};

/// Deterministic inference: dropout inactive, uncertainty from the mean.
Prediction predict(const MultiHeadClassifier& model,
                   std::span<const double> batch, std::size_t batch_size);

/// Unweighted mean negative log-likelihood of the mean prediction.
double mean_nll(const MultiHeadClassifier& model, const EmbeddingDataset& data);

std::string model_to_json(const MultiHeadClassifier& clf);
MultiHeadClassifier model_from_json(const std::string& text);

}  // namespace cura
