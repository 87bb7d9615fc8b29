#include "cura/multihead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cura/io.hpp"

namespace cura {

namespace {

constexpr std::uint64_t kSeedTagShuffle = 31;
constexpr std::uint64_t kSeedTagDropout = 32;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void HeadSpec::validate() const {
  if (hidden_units < 1) throw std::runtime_error("head spec: hidden_units < 1");
  if (activation != "relu") {
    throw std::runtime_error("head spec: unsupported activation '" + activation +
                             "' (only relu)");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::runtime_error("head spec: dropout_rate must be in [0,1)");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::runtime_error("train: learning_rate <= 0");
  if (max_epochs < 1) throw std::runtime_error("train: max_epochs < 1");
  if (batch_size < 1) throw std::runtime_error("train: batch_size < 1");
  if (patience < 1 || patience > max_epochs) {
    throw std::runtime_error("train: need 1 <= patience <= max_epochs");
  }
}

void MultiHeadClassifier::check_finite() const {
  for (std::size_t m = 0; m < heads.size(); ++m) {
    const HeadParams& h = heads[m];
    auto ok = [](std::span<const double> v) {
      for (const double x : v) {
        if (!std::isfinite(x)) return false;
      }
      return true;
    };
    if (!ok(h.w1) || !ok(h.b1) || !ok(h.w2) || !std::isfinite(h.b2)) {
      throw std::runtime_error("classifier: non-finite parameter in head " +
                               std::to_string(m));
    }
  }
}

MultiHeadClassifier init_classifier_with_seeds(
    std::size_t input_dim, const HeadSpec& spec,
    std::span<const std::uint64_t> head_seeds) {
  spec.validate();
  if (input_dim < 1) throw std::runtime_error("init_classifier: input_dim < 1");
  if (head_seeds.empty()) throw std::runtime_error("init_classifier: no heads");

  MultiHeadClassifier clf;
  clf.input_dim = input_dim;
  clf.n_heads = head_seeds.size();
  clf.hidden_units = spec.hidden_units;
  clf.dropout_rate = spec.dropout_rate;
  clf.heads.resize(clf.n_heads);

  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(spec.hidden_units));
  for (std::size_t m = 0; m < clf.n_heads; ++m) {
    Rng rng(head_seeds[m]);
    HeadParams& h = clf.heads[m];
    h.w1.resize(input_dim * spec.hidden_units);
    h.b1.resize(spec.hidden_units);
    h.w2.resize(spec.hidden_units);
    for (double& x : h.w1) x = rng.uniform(-bound1, bound1);
    for (double& x : h.b1) x = rng.uniform(-bound1, bound1);
    for (double& x : h.w2) x = rng.uniform(-bound2, bound2);
    h.b2 = rng.uniform(-bound2, bound2) + spec.output_bias_shift;
  }
  return clf;
}

MultiHeadClassifier init_classifier(std::size_t input_dim, std::size_t n_heads,
                                    const HeadSpec& spec) {
  if (n_heads < 1) throw std::runtime_error("init_classifier: n_heads < 1");
  std::vector<std::uint64_t> seeds(n_heads);
  for (std::size_t m = 0; m < n_heads; ++m) {
    seeds[m] = spec.init_seed + static_cast<std::uint64_t>(m);
  }
  return init_classifier_with_seeds(input_dim, spec, seeds);
}

namespace {

// One head's forward pass over a batch. w1 is stored input-major
// (input_dim x hidden) so the inner loops run over contiguous hidden units.
// When `mask` is non-null, inverted dropout is sampled into it.
void head_forward(const HeadParams& head, std::span<const double> batch,
                  std::size_t batch_size, std::size_t input_dim,
                  std::size_t hidden, double dropout_rate, Rng* rng,
                  double* z1, double* mask, double* raw_prob) {
  for (std::size_t b = 0; b < batch_size; ++b) {
    double* zrow = z1 + b * hidden;
    for (std::size_t j = 0; j < hidden; ++j) zrow[j] = head.b1[j];
    const double* xrow = batch.data() + b * input_dim;
    for (std::size_t i = 0; i < input_dim; ++i) {
      const double xi = xrow[i];
      const double* wrow = head.w1.data() + i * hidden;
      for (std::size_t j = 0; j < hidden; ++j) zrow[j] += xi * wrow[j];
    }
  }
  if (mask != nullptr) {
    const double keep_scale = 1.0 / (1.0 - dropout_rate);
    for (std::size_t t = 0; t < batch_size * hidden; ++t) {
      mask[t] = rng->bernoulli(dropout_rate) ? 0.0 : keep_scale;
    }
  }
  for (std::size_t b = 0; b < batch_size; ++b) {
    const double* zrow = z1 + b * hidden;
    const double* mrow = mask != nullptr ? mask + b * hidden : nullptr;
    double logit = head.b2;
    for (std::size_t j = 0; j < hidden; ++j) {
      double h = zrow[j] > 0.0 ? zrow[j] : 0.0;
      if (mrow != nullptr) h *= mrow[j];
      logit += head.w2[j] * h;
    }
    raw_prob[b] = sigmoid(logit);
  }
}

}  // namespace

ForwardResult forward(const MultiHeadClassifier& clf,
                      std::span<const double> batch, std::size_t batch_size,
                      bool dropout_active, Rng* rng) {
  if (batch.size() != batch_size * clf.input_dim) {
    throw std::runtime_error("forward: batch shape does not match input_dim " +
                             std::to_string(clf.input_dim));
  }
  const bool use_dropout = dropout_active && clf.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr) {
    throw std::runtime_error("forward: dropout requested without a generator");
  }

  const std::size_t m_heads = clf.n_heads;
  const std::size_t hidden = clf.hidden_units;
  ForwardResult out;
  out.per_head.assign(m_heads * batch_size, 0.0);
  out.mean.assign(batch_size, 0.0);

  std::vector<double> z1(batch_size * hidden);
  std::vector<double> mask;
  if (use_dropout) mask.resize(batch_size * hidden);
  std::vector<double> raw(batch_size);

  for (std::size_t m = 0; m < m_heads; ++m) {
    head_forward(clf.heads[m], batch, batch_size, clf.input_dim, hidden,
                 clf.dropout_rate, rng, z1.data(),
                 use_dropout ? mask.data() : nullptr, raw.data());
    double* row = out.per_head.data() + m * batch_size;
    for (std::size_t b = 0; b < batch_size; ++b) {
      const double p = clamp_probability(raw[b], kProbClamp);
      if (!std::isfinite(p)) {
        throw std::runtime_error("forward: non-finite activation in head " +
                                 std::to_string(m));
      }
      row[b] = p;
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m_heads);
  for (std::size_t b = 0; b < batch_size; ++b) {
    double sum = 0.0;
    for (std::size_t m = 0; m < m_heads; ++m) {
      sum += out.per_head[m * batch_size + b];
    }
    out.mean[b] = sum * inv_m;
  }
  return out;
}

ClassWeights resolve_class_weights(std::span<const int> labels,
                                   ClassWeightMode mode) {
  if (mode == ClassWeightMode::kNone) return {1.0, 1.0};
  std::size_t pos = 0;
  for (const int y : labels) pos += y == 1;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw std::runtime_error(
        "balanced class weights need both classes in the training labels");
  }
  const double n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(pos)),
          n / (2.0 * static_cast<double>(neg))};
}

namespace {

// Backward pass for one head. Consumes the cached pre-activations (z1), the
// dropout multipliers (null when dropout is off), the raw sigmoid outputs,
// and d(loss)/d(mean prob); emits parameter gradients. A head output pinned
// by the probability clamp contributes zero gradient, matching the flat loss
// there.
void head_backward(const HeadParams& head, const double* z1, const double* mask,
                   const double* raw, const double* xb, std::size_t b_count,
                   std::size_t d, std::size_t hidden, double inv_m,
                   std::span<const double> grad_mean, double* dlogit,
                   double* dz1, double* gw1, double* gb1, double* gw2,
                   double& gb2) {
  gb2 = 0.0;
  for (std::size_t b = 0; b < b_count; ++b) {
    const double s = raw[b];
    const bool clamped = s < kProbClamp || s > 1.0 - kProbClamp;
    dlogit[b] = clamped ? 0.0 : grad_mean[b] * inv_m * s * (1.0 - s);
    gb2 += dlogit[b];
  }
  std::fill(gw2, gw2 + hidden, 0.0);
  for (std::size_t b = 0; b < b_count; ++b) {
    const double g = dlogit[b];
    if (g == 0.0) continue;
    const double* zrow = z1 + b * hidden;
    const double* mrow = mask != nullptr ? mask + b * hidden : nullptr;
    for (std::size_t j = 0; j < hidden; ++j) {
      double h = zrow[j] > 0.0 ? zrow[j] : 0.0;
      if (mrow != nullptr) h *= mrow[j];
      gw2[j] += g * h;
    }
  }
  for (std::size_t b = 0; b < b_count; ++b) {
    const double g = dlogit[b];
    const double* zrow = z1 + b * hidden;
    const double* mrow = mask != nullptr ? mask + b * hidden : nullptr;
    double* drow = dz1 + b * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      double v = g * head.w2[j];
      if (mrow != nullptr) v *= mrow[j];
      drow[j] = zrow[j] > 0.0 ? v : 0.0;
    }
  }
  std::fill(gw1, gw1 + d * hidden, 0.0);
  std::fill(gb1, gb1 + hidden, 0.0);
  for (std::size_t b = 0; b < b_count; ++b) {
    const double* drow = dz1 + b * hidden;
    const double* xrow = xb + b * d;
    for (std::size_t j = 0; j < hidden; ++j) gb1[j] += drow[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = xrow[i];
      double* grow = gw1 + i * hidden;
      for (std::size_t j = 0; j < hidden; ++j) grow[j] += xi * drow[j];
    }
  }
}

struct AdamArray {
  std::vector<double> m, v;
  explicit AdamArray(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

struct HeadOptimizer {
  AdamArray w1, b1, w2, b2;
  HeadOptimizer(std::size_t n_w1, std::size_t n_hidden)
      : w1(n_w1), b1(n_hidden), w2(n_hidden), b2(1) {}
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void adam_step(std::span<double> param, std::span<const double> grad,
               AdamArray& state, double lr, double bias1, double bias2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double mhat = state.m[i] / bias1;
    const double vhat = state.v[i] / bias2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

}  // namespace

TrainResult train(MultiHeadClassifier clf, const EmbeddingDataset& train_data,
                  const EmbeddingDataset& val_data,
                  const ObjectiveConfig& objective, const CohortStats* cohorts,
                  const TrainConfig& cfg) {
  cfg.validate();
  objective.validate();
  if (train_data.dim != clf.input_dim || val_data.dim != clf.input_dim) {
    throw std::runtime_error("train: dataset dim does not match classifier");
  }
  if (train_data.n() == 0) throw std::runtime_error("train: empty training set");
  if (val_data.n() == 0) throw std::runtime_error("train: empty validation set");

  ObjectiveConfig obj = objective;
  const ClassWeights cw =
      resolve_class_weights(train_data.labels, cfg.class_weight_mode);
  obj.w_pos = cw.w_pos;
  obj.w_neg = cw.w_neg;

  const bool use_cohort = obj.lambda_coh > 0.0;
  if (use_cohort) {
    if (cohorts == nullptr || cohorts->n() != train_data.n()) {
      throw std::runtime_error(
          "train: lambda_coh > 0 requires cohort stats covering every "
          "training sample");
    }
  }

  const std::size_t n = train_data.n();
  const std::size_t d = clf.input_dim;
  const std::size_t hidden = clf.hidden_units;
  const std::size_t m_heads = clf.n_heads;
  const std::size_t bs = std::min(cfg.batch_size, n);
  const bool use_dropout = clf.dropout_rate > 0.0;

  Rng shuffle_rng(derive_seed(cfg.seed, kSeedTagShuffle));
  Rng dropout_rng(derive_seed(cfg.seed, kSeedTagDropout));

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  // Batch workspace; per-head activations are cached for the backward pass.
  std::vector<double> xb(bs * d);
  std::vector<int> yb(bs);
  std::vector<double> qb, wb;
  if (use_cohort) {
    qb.resize(bs);
    wb.resize(bs);
  }
  std::vector<double> z1_all(m_heads * bs * hidden);
  std::vector<double> mask_all;
  if (use_dropout) mask_all.resize(m_heads * bs * hidden);
  std::vector<double> raw_all(m_heads * bs);
  std::vector<double> mean(bs);
  std::vector<double> dlogit(bs);
  std::vector<double> dz1(bs * hidden);
  std::vector<double> gw1(d * hidden), gb1(hidden), gw2(hidden);

  std::vector<HeadOptimizer> opt;
  opt.reserve(m_heads);
  for (std::size_t m = 0; m < m_heads; ++m) opt.emplace_back(d * hidden, hidden);

  TrainingLog log;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<HeadParams> best_params = clf.heads;
  std::size_t best_epoch = 0;
  std::size_t since_improvement = 0;
  std::size_t step = 0;
  const double inv_m = 1.0 / static_cast<double>(m_heads);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(perm);
    double sum_base = 0.0, sum_ind = 0.0, sum_coh = 0.0, sum_total = 0.0;

    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t b_count = std::min(bs, n - start);
      const std::size_t batch_id = start / bs;
      for (std::size_t b = 0; b < b_count; ++b) {
        const std::size_t row = perm[start + b];
        const auto src = train_data.row(row);
        std::copy(src.begin(), src.end(), xb.begin() + b * d);
        yb[b] = train_data.labels[row];
        if (use_cohort) {
          qb[b] = cohorts->q[row];
          wb[b] = cohorts->weight[row];
        }
      }

      for (std::size_t m = 0; m < m_heads; ++m) {
        head_forward(clf.heads[m], {xb.data(), b_count * d}, b_count, d, hidden,
                     clf.dropout_rate, use_dropout ? &dropout_rng : nullptr,
                     z1_all.data() + m * bs * hidden,
                     use_dropout ? mask_all.data() + m * bs * hidden : nullptr,
                     raw_all.data() + m * bs);
      }
      for (std::size_t b = 0; b < b_count; ++b) {
        double sum = 0.0;
        for (std::size_t m = 0; m < m_heads; ++m) {
          sum += clamp_probability(raw_all[m * bs + b], kProbClamp);
        }
        mean[b] = sum * inv_m;
      }

      LossBreakdown breakdown;
      try {
        breakdown = loss_total(
            {mean.data(), b_count}, {yb.data(), b_count},
            use_cohort ? std::span<const double>(qb.data(), b_count)
                       : std::span<const double>(),
            use_cohort ? std::span<const double>(wb.data(), b_count)
                       : std::span<const double>(),
            obj);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_id) + ": " +
                                 e.what());
      }
      for (std::size_t b = 0; b < b_count; ++b) {
        if (!std::isfinite(breakdown.grad_wrt_mean_prob[b])) {
          throw std::runtime_error("train: non-finite gradient at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_id));
        }
      }

      ++step;
      const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));

      for (std::size_t m = 0; m < m_heads; ++m) {
        HeadParams& head = clf.heads[m];
        double gb2 = 0.0;
        head_backward(head, z1_all.data() + m * bs * hidden,
                      use_dropout ? mask_all.data() + m * bs * hidden : nullptr,
                      raw_all.data() + m * bs, xb.data(), b_count, d, hidden,
                      inv_m, {breakdown.grad_wrt_mean_prob.data(), b_count},
                      dlogit.data(), dz1.data(), gw1.data(), gb1.data(),
                      gw2.data(), gb2);

        adam_step(head.w1, gw1, opt[m].w1, cfg.learning_rate, bias1, bias2);
        adam_step(head.b1, gb1, opt[m].b1, cfg.learning_rate, bias1, bias2);
        adam_step(head.w2, gw2, opt[m].w2, cfg.learning_rate, bias1, bias2);
        std::span<double> b2{&head.b2, 1};
        std::span<const double> gb2s{&gb2, 1};
        adam_step(b2, gb2s, opt[m].b2, cfg.learning_rate, bias1, bias2);
      }

      const double bn = static_cast<double>(b_count);
      sum_base += breakdown.l_base * bn;
      sum_ind += breakdown.l_ind * bn;
      sum_coh += breakdown.l_coh * bn;
      sum_total += breakdown.l_total * bn;
    }

    clf.check_finite();
    const double val_nll = mean_nll(clf, val_data);
    const double inv_n = 1.0 / static_cast<double>(n);
    log.epochs.push_back({epoch, sum_base * inv_n, sum_ind * inv_n,
                          sum_coh * inv_n, sum_total * inv_n, val_nll});

    if (val_nll < best_val) {
      best_val = val_nll;
      best_params = clf.heads;
      best_epoch = epoch;
      since_improvement = 0;
    } else {
      ++since_improvement;
      if (since_improvement >= cfg.patience) break;
    }
  }

  clf.heads = std::move(best_params);
  log.best_epoch = best_epoch;
  log.best_val_nll = best_val;

  TrainResult result;
  result.model = std::move(clf);
  result.log = std::move(log);
  result.resolved_objective = obj;
  return result;
}

BatchGradients parameter_gradients(const MultiHeadClassifier& clf,
                                   std::span<const double> batch,
                                   std::size_t batch_size,
                                   std::span<const int> y,
                                   std::span<const double> q,
                                   std::span<const double> w,
                                   const ObjectiveConfig& objective) {
  const std::size_t d = clf.input_dim;
  const std::size_t hidden = clf.hidden_units;
  const std::size_t m_heads = clf.n_heads;
  if (batch.size() != batch_size * d) {
    throw std::runtime_error("parameter_gradients: batch shape mismatch");
  }

  std::vector<double> z1_all(m_heads * batch_size * hidden);
  std::vector<double> raw_all(m_heads * batch_size);
  std::vector<double> mean(batch_size, 0.0);
  for (std::size_t m = 0; m < m_heads; ++m) {
    head_forward(clf.heads[m], batch, batch_size, d, hidden, 0.0, nullptr,
                 z1_all.data() + m * batch_size * hidden, nullptr,
                 raw_all.data() + m * batch_size);
  }
  const double inv_m = 1.0 / static_cast<double>(m_heads);
  for (std::size_t b = 0; b < batch_size; ++b) {
    double sum = 0.0;
    for (std::size_t m = 0; m < m_heads; ++m) {
      sum += clamp_probability(raw_all[m * batch_size + b], kProbClamp);
    }
    mean[b] = sum * inv_m;
  }

  BatchGradients out;
  out.loss = loss_total({mean.data(), batch_size}, y, q, w, objective);
  out.heads.resize(m_heads);
  std::vector<double> dlogit(batch_size), dz1(batch_size * hidden);
  for (std::size_t m = 0; m < m_heads; ++m) {
    HeadGradients& g = out.heads[m];
    g.w1.resize(d * hidden);
    g.b1.resize(hidden);
    g.w2.resize(hidden);
    head_backward(clf.heads[m], z1_all.data() + m * batch_size * hidden,
                  nullptr, raw_all.data() + m * batch_size, batch.data(),
                  batch_size, d, hidden, inv_m,
                  {out.loss.grad_wrt_mean_prob.data(), batch_size},
                  dlogit.data(), dz1.data(), g.w1.data(), g.b1.data(),
                  g.w2.data(), g.b2);
  }
  return out;
}

Prediction predict(const MultiHeadClassifier& model,
                   std::span<const double> batch, std::size_t batch_size) {
  const ForwardResult fw = forward(model, batch, batch_size, false, nullptr);
  Prediction pred;
  pred.mean_prob = fw.mean;
  pred.uncertainty.resize(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    pred.uncertainty[b] = normalized_entropy(fw.mean[b]);
  }
  return pred;
}

double mean_nll(const MultiHeadClassifier& model, const EmbeddingDataset& data) {
  if (data.n() == 0) throw std::runtime_error("mean_nll: empty dataset");
  constexpr std::size_t kChunk = 4096;
  double sum = 0.0;
  for (std::size_t start = 0; start < data.n(); start += kChunk) {
    const std::size_t count = std::min(kChunk, data.n() - start);
    const ForwardResult fw = forward(
        model, {data.embeddings.data() + start * data.dim, count * data.dim},
        count, false, nullptr);
    for (std::size_t b = 0; b < count; ++b) {
      sum += weighted_ce(fw.mean[b], static_cast<double>(data.labels[start + b]),
                         1.0, 1.0);
    }
  }
  return sum / static_cast<double>(data.n());
}

std::string training_log_to_csv(const TrainingLog& log) {
  std::string out = "epoch,l_base,l_ind,l_coh,l_total,val_nll\n";
  for (const EpochLog& row : log.epochs) {
    out += std::to_string(row.epoch);
    out += ',';
    out += fmt_double(row.l_base);
    out += ',';
    out += fmt_double(row.l_ind);
    out += ',';
    out += fmt_double(row.l_coh);
    out += ',';
    out += fmt_double(row.l_total);
    out += ',';
    out += fmt_double(row.val_nll);
    out += '\n';
  }
  return out;
}

std::string model_to_json(const MultiHeadClassifier& clf) {
  nlohmann::json j;
  j["format"] = "cura-multihead-v1";
  j["input_dim"] = clf.input_dim;
  j["n_heads"] = clf.n_heads;
  j["hidden_units"] = clf.hidden_units;
  j["dropout_rate"] = clf.dropout_rate;
  nlohmann::json heads = nlohmann::json::array();
  for (const HeadParams& h : clf.heads) {
    heads.push_back({{"w1", h.w1}, {"b1", h.b1}, {"w2", h.w2}, {"b2", h.b2}});
  }
  j["heads"] = std::move(heads);
  return j.dump();
}

MultiHeadClassifier model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format").get<std::string>() != "cura-multihead-v1") {
    throw std::runtime_error("model: unknown format tag");
  }
  MultiHeadClassifier clf;
  clf.input_dim = j.at("input_dim").get<std::size_t>();
  clf.n_heads = j.at("n_heads").get<std::size_t>();
  clf.hidden_units = j.at("hidden_units").get<std::size_t>();
  clf.dropout_rate = j.at("dropout_rate").get<double>();
  for (const auto& hj : j.at("heads")) {
    HeadParams h;
    h.w1 = hj.at("w1").get<std::vector<double>>();
    h.b1 = hj.at("b1").get<std::vector<double>>();
    h.w2 = hj.at("w2").get<std::vector<double>>();
    h.b2 = hj.at("b2").get<double>();
    if (h.w1.size() != clf.input_dim * clf.hidden_units ||
        h.b1.size() != clf.hidden_units || h.w2.size() != clf.hidden_units) {
      throw std::runtime_error("model: parameter shape mismatch");
    }
    clf.heads.push_back(std::move(h));
  }
  if (clf.heads.size() != clf.n_heads) {
    throw std::runtime_error("model: head count mismatch");
  }
  clf.check_finite();
  return clf;
}

}  // namespace cura
