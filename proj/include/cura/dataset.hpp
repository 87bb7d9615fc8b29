#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cura {

/// Frozen per-sample embeddings with binary outcome labels. Immutable after
/// construction; every downstream module consumes this shape.
struct EmbeddingDataset {
  std::vector<std::string> ids;
  std::vector<double> embeddings;  // row-major, n() x dim
  std::vector<int> labels;         // each 0 or 1
  std::size_t dim = 0;

  std::size_t n() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }

  double positive_rate() const;

  /// Throws std::runtime_error on any structural violation (size mismatch,
  /// non-finite coordinate, label outside {0,1}, dim < 1).
  void validate() const;
};

/// Row subset in the given index order; ids/labels/embeddings are copied.
EmbeddingDataset subset(const EmbeddingDataset& ds,
                        std::span<const std::size_t> indices);

struct SynthConfig {
  std::size_t n_samples = 10000;
  std::size_t dim = 16;
  std::size_t n_clusters = 4;
  double target_positive_rate = 0.03;
  double ambiguity = 0.2;  // share of samples placed near class boundaries
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic synthetic cohort: Gaussian clusters on a radius-4 sphere
/// with unit noise, one class per cluster, plus an ambiguous cohort drawn
/// near midpoints between positive and negative centers with noisy labels.
/// Equal configs (including seed) produce bit-identical datasets.
EmbeddingDataset generate_synthetic(const SynthConfig& cfg);

/// CSV schema: header `id,label,e0,...,e{dim-1}`, label in {0,1}, embedding
/// cells plain decimal floats. Errors name the offending 1-based line.
EmbeddingDataset load_csv(const std::filesystem::path& path);
void write_csv(const EmbeddingDataset& ds, const std::filesystem::path& path);
std::string dataset_to_csv(const EmbeddingDataset& ds);
EmbeddingDataset dataset_from_csv(const std::string& text,
                                  const std::string& origin);

struct FoldSplit {
  std::size_t n_folds = 0;
  std::vector<std::size_t> assignments;  // test fold of each sample

  // Derived index sets, pairwise disjoint within a fold.
  std::vector<std::vector<std::size_t>> train_indices;
  std::vector<std::vector<std::size_t>> val_indices;
  std::vector<std::vector<std::size_t>> test_indices;
};

/// Stratified k-fold split: positives and negatives are dealt round-robin so
/// per-fold class counts are within one sample of proportional. The
/// validation set is carved from the non-test portion, also stratified.
FoldSplit split_folds(const EmbeddingDataset& ds, std::size_t n_folds,
                      double val_fraction, std::uint64_t seed);

std::string fold_split_to_json(const FoldSplit& split);
FoldSplit fold_split_from_json(const std::string& text,
                               const EmbeddingDataset& ds,
                               double val_fraction, std::uint64_t seed);

}  // namespace cura
