#include "cura/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cura/io.hpp"
#include "cura/rng.hpp"

namespace cura {

namespace {

constexpr std::uint64_t kSeedTagAssign = 11;
constexpr std::uint64_t kSeedTagDraw = 12;
constexpr std::uint64_t kSeedTagFoldDeal = 21;
constexpr std::uint64_t kSeedTagFoldVal = 22;

std::string make_id(std::size_t row) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "s%06zu", row);
  return buf;
}

}  // namespace

double EmbeddingDataset::positive_rate() const {
  if (labels.empty()) return 0.0;
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

void EmbeddingDataset::validate() const {
  if (dim < 1) throw std::runtime_error("dataset: dim must be >= 1");
  if (ids.size() != labels.size()) {
    throw std::runtime_error("dataset: ids/labels length mismatch");
  }
  if (embeddings.size() != labels.size() * dim) {
    throw std::runtime_error("dataset: embedding matrix shape mismatch");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw std::runtime_error("dataset: label outside {0,1} at row " +
                               std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (!std::isfinite(embeddings[i])) {
      throw std::runtime_error("dataset: non-finite coordinate at row " +
                               std::to_string(i / dim));
    }
  }
}

EmbeddingDataset subset(const EmbeddingDataset& ds,
                        std::span<const std::size_t> indices) {
  EmbeddingDataset out;
  out.dim = ds.dim;
  out.ids.reserve(indices.size());
  out.labels.reserve(indices.size());
  out.embeddings.reserve(indices.size() * ds.dim);
  for (const std::size_t i : indices) {
    out.ids.push_back(ds.ids[i]);
    out.labels.push_back(ds.labels[i]);
    const auto r = ds.row(i);
    out.embeddings.insert(out.embeddings.end(), r.begin(), r.end());
  }
  return out;
}

void SynthConfig::validate() const {
  if (n_samples < 1) throw std::runtime_error("synth: n_samples must be >= 1");
  if (dim < 1) throw std::runtime_error("synth: dim must be >= 1");
  if (n_clusters < 2) {
    throw std::runtime_error("synth: n_clusters must be >= 2 (one per class)");
  }
  if (n_samples < 2 * n_clusters) {
    throw std::runtime_error("synth: n_samples must be >= 2 * n_clusters");
  }
  if (!(target_positive_rate > 0.0 && target_positive_rate < 1.0)) {
    throw std::runtime_error("synth: target_positive_rate must be in (0,1)");
  }
  if (!(ambiguity >= 0.0 && ambiguity <= 1.0)) {
    throw std::runtime_error("synth: ambiguity must be in [0,1]");
  }
}

EmbeddingDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_samples;
  const std::size_t d = cfg.dim;

  // Cluster centers on a sphere of radius 4; first half of the clusters are
  // the positive class.
  Rng center_rng(derive_seed(cfg.seed, kSeedTagAssign));
  const std::size_t n_pos_clusters = std::max<std::size_t>(1, cfg.n_clusters / 2);
  const std::size_t n_neg_clusters = cfg.n_clusters - n_pos_clusters;
  std::vector<double> centers(cfg.n_clusters * d);
  for (std::size_t c = 0; c < cfg.n_clusters; ++c) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = center_rng.normal();
      centers[c * d + j] = g;
      norm2 += g * g;
    }
    const double scale = 4.0 / std::sqrt(std::max(norm2, 1e-300));
    for (std::size_t j = 0; j < d; ++j) centers[c * d + j] *= scale;
  }

  // Sample plan. The positive budget is fixed at round(rate * n) so the
  // empirical rate tracks the target even when the boundary cohort is large;
  // boundary labels aim for a fair coin but are capped by that budget.
  const std::size_t n_pos = static_cast<std::size_t>(
      std::llround(cfg.target_positive_rate * static_cast<double>(n)));
  const std::size_t n_neg = n - n_pos;
  const std::size_t n_amb = static_cast<std::size_t>(
      std::llround(cfg.ambiguity * static_cast<double>(n)));
  std::size_t amb_pos = static_cast<std::size_t>(
      std::llround(0.5 * static_cast<double>(n_amb)));
  amb_pos = std::min(amb_pos, n_pos);
  amb_pos = std::max(amb_pos, n_amb > n_neg ? n_amb - n_neg : 0);
  const std::size_t amb_neg = n_amb - amb_pos;
  const std::size_t clean_pos = n_pos - amb_pos;
  const std::size_t clean_neg = n_neg - amb_neg;

  struct Plan {
    bool ambiguous;
    int label;
    std::size_t cluster;  // clean samples only
  };
  std::vector<Plan> plans;
  plans.reserve(n);
  for (std::size_t i = 0; i < clean_pos; ++i) {
    plans.push_back({false, 1, i % n_pos_clusters});
  }
  for (std::size_t i = 0; i < clean_neg; ++i) {
    plans.push_back({false, 0, n_pos_clusters + i % n_neg_clusters});
  }
  for (std::size_t i = 0; i < amb_pos; ++i) plans.push_back({true, 1, 0});
  for (std::size_t i = 0; i < amb_neg; ++i) plans.push_back({true, 0, 0});

  Rng draw_rng(derive_seed(cfg.seed, kSeedTagDraw));
  draw_rng.shuffle(plans);

  EmbeddingDataset ds;
  ds.dim = d;
  ds.ids.reserve(n);
  ds.labels.reserve(n);
  ds.embeddings.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const Plan& plan = plans[i];
    double* row = ds.embeddings.data() + i * d;
    if (plan.ambiguous) {
      // Boundary samples stay boundary-confined: tighter noise than the
      // clusters so they populate the inter-class gap, not the cluster cores.
      const std::size_t cp = draw_rng.index(n_pos_clusters);
      const std::size_t cn = n_pos_clusters + draw_rng.index(n_neg_clusters);
      const double alpha = draw_rng.uniform(0.4, 0.6);
      for (std::size_t j = 0; j < d; ++j) {
        const double mid =
            alpha * centers[cp * d + j] + (1.0 - alpha) * centers[cn * d + j];
        row[j] = mid + 0.65 * draw_rng.normal();
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = centers[plan.cluster * d + j] + draw_rng.normal();
      }
    }
    ds.ids.push_back(make_id(i));
    ds.labels.push_back(plan.label);
  }
  ds.validate();
  return ds;
}

std::string dataset_to_csv(const EmbeddingDataset& ds) {
  std::string out = "id,label";
  for (std::size_t j = 0; j < ds.dim; ++j) {
    out += ",e" + std::to_string(j);
  }
  out += '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out += ds.ids[i];
    out += ds.labels[i] == 1 ? ",1" : ",0";
    const auto r = ds.row(i);
    for (const double v : r) {
      out += ',';
      out += fmt_double(v);
    }
    out += '\n';
  }
  return out;
}

EmbeddingDataset dataset_from_csv(const std::string& text,
                                  const std::string& origin) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest = text;
    while (!rest.empty()) {
      std::size_t pos = rest.find('\n');
      std::string_view line =
          pos == std::string_view::npos ? rest : rest.substr(0, pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
  }
  if (lines.empty()) {
    throw std::runtime_error(origin + ": empty file, expected a header row");
  }

  const auto header = split_csv_line(lines[0]);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw std::runtime_error(
        origin + ": line 1: malformed header, expected id,label,e0,...");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j + 2] != "e" + std::to_string(j)) {
      throw std::runtime_error(origin + ": line 1: expected column 'e" +
                               std::to_string(j) + "', found '" +
                               std::string(header[j + 2]) + "'");
    }
  }

  EmbeddingDataset ds;
  ds.dim = dim;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string line_no = std::to_string(li + 1);
    if (lines[li].empty()) {
      throw std::runtime_error(origin + ": line " + line_no + ": empty row");
    }
    const auto cells = split_csv_line(lines[li]);
    if (cells.size() != dim + 2) {
      throw std::runtime_error(origin + ": line " + line_no + ": expected " +
                               std::to_string(dim + 2) + " columns, found " +
                               std::to_string(cells.size()));
    }
    ds.ids.emplace_back(cells[0]);
    if (cells[1] == "0") {
      ds.labels.push_back(0);
    } else if (cells[1] == "1") {
      ds.labels.push_back(1);
    } else {
      throw std::runtime_error(origin + ": line " + line_no +
                               ": label must be 0 or 1, found '" +
                               std::string(cells[1]) + "'");
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = parse_double(cells[j + 2],
                                    origin + ": line " + line_no + ", column e" +
                                        std::to_string(j));
      if (!std::isfinite(v)) {
        throw std::runtime_error(origin + ": line " + line_no +
                                 ": non-finite value in column e" +
                                 std::to_string(j));
      }
      ds.embeddings.push_back(v);
    }
  }
  ds.validate();
  return ds;
}

EmbeddingDataset load_csv(const std::filesystem::path& path) {
  return dataset_from_csv(read_file(path), path.string());
}

void write_csv(const EmbeddingDataset& ds, const std::filesystem::path& path) {
  atomic_write_file(path, dataset_to_csv(ds));
}

namespace {

// Shared between split_folds and fold_split_from_json so a deserialized
// split reproduces exactly the same train/val carving.
void derive_fold_sets(FoldSplit& split, const EmbeddingDataset& ds,
                      double val_fraction, std::uint64_t seed) {
  const std::size_t k = split.n_folds;
  split.train_indices.assign(k, {});
  split.val_indices.assign(k, {});
  split.test_indices.assign(k, {});
  for (std::size_t i = 0; i < ds.n(); ++i) {
    split.test_indices[split.assignments[i]].push_back(i);
  }
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> rest_pos, rest_neg;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (split.assignments[i] == f) continue;
      (ds.labels[i] == 1 ? rest_pos : rest_neg).push_back(i);
    }
    Rng rng(derive_seed(seed, kSeedTagFoldVal, f));
    rng.shuffle(rest_pos);
    rng.shuffle(rest_neg);
    const auto take = [val_fraction](std::size_t count) {
      return static_cast<std::size_t>(
          std::llround(val_fraction * static_cast<double>(count)));
    };
    const std::size_t val_pos = take(rest_pos.size());
    const std::size_t val_neg = take(rest_neg.size());
    auto& val = split.val_indices[f];
    auto& train = split.train_indices[f];
    val.insert(val.end(), rest_pos.begin(), rest_pos.begin() + val_pos);
    val.insert(val.end(), rest_neg.begin(), rest_neg.begin() + val_neg);
    train.insert(train.end(), rest_pos.begin() + val_pos, rest_pos.end());
    train.insert(train.end(), rest_neg.begin() + val_neg, rest_neg.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    std::sort(split.test_indices[f].begin(), split.test_indices[f].end());
  }
}

}  // namespace

FoldSplit split_folds(const EmbeddingDataset& ds, std::size_t n_folds,
                      double val_fraction, std::uint64_t seed) {
  if (n_folds < 2) throw std::runtime_error("split_folds: n_folds must be >= 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::runtime_error("split_folds: val_fraction must be in (0,1)");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    (ds.labels[i] == 1 ? pos : neg).push_back(i);
  }
  if (pos.size() < n_folds || neg.size() < n_folds) {
    throw std::runtime_error(
        "split_folds: need at least n_folds samples of each class for "
        "stratification (have " +
        std::to_string(pos.size()) + " positive, " + std::to_string(neg.size()) +
        " negative, n_folds=" + std::to_string(n_folds) + ")");
  }

  Rng rng(derive_seed(seed, kSeedTagFoldDeal));
  rng.shuffle(pos);
  rng.shuffle(neg);

  FoldSplit split;
  split.n_folds = n_folds;
  split.assignments.assign(ds.n(), 0);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    split.assignments[pos[i]] = i % n_folds;
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    split.assignments[neg[i]] = i % n_folds;
  }
  derive_fold_sets(split, ds, val_fraction, seed);
  return split;
}

std::string fold_split_to_json(const FoldSplit& split) {
  nlohmann::json j;
  j["n_folds"] = split.n_folds;
  j["assignments"] = split.assignments;
  return j.dump();
}

FoldSplit fold_split_from_json(const std::string& text,
                               const EmbeddingDataset& ds,
                               double val_fraction, std::uint64_t seed) {
  const auto j = nlohmann::json::parse(text);
  FoldSplit split;
  split.n_folds = j.at("n_folds").get<std::size_t>();
  split.assignments = j.at("assignments").get<std::vector<std::size_t>>();
  if (split.assignments.size() != ds.n()) {
    throw std::runtime_error("fold split: assignment length " +
                             std::to_string(split.assignments.size()) +
                             " does not match dataset size " +
                             std::to_string(ds.n()));
  }
  for (const std::size_t f : split.assignments) {
    if (f >= split.n_folds) {
      throw std::runtime_error("fold split: assignment out of range");
    }
  }
  derive_fold_sets(split, ds, val_fraction, seed);
  return split;
}

}  // namespace cura
