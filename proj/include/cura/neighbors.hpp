#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cura/dataset.hpp"

namespace cura {

/// Exact cosine-distance k-nearest-neighbor index over a labeled reference
/// set. Non-owning view: the referenced embeddings/labels must outlive the
/// index. Immutable after build; queries are read-only and thread-safe.
struct NeighborIndex {
  const double* embeddings = nullptr;  // row-major, n x dim
  const int* labels = nullptr;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t k = 0;
  std::vector<double> inv_norms;  // 1 / ||row||
};

/// Validates rows (no zero-norm row; cosine is undefined there) and the k
/// bound (k <= n-1 so self-exclusion always leaves k neighbors).
NeighborIndex build_index(std::span<const double> embeddings, std::size_t dim,
                          std::span<const int> labels, std::size_t k);

constexpr std::ptrdiff_t kNoExclusion = -1;

/// The k reference indices nearest to `query`, ordered by ascending cosine
/// distance with ties broken by ascending reference index.
std::vector<std::size_t> query_neighbors(const NeighborIndex& idx,
                                         std::span<const double> query,
                                         std::ptrdiff_t exclude_self = kNoExclusion);

/// Neighborhood risk q for each query row: the exact mean of the k retrieved
/// neighbor labels (a multiple of 1/k). `exclude_self`, when non-empty, gives
/// a reference index to drop per query (-1 for none).
std::vector<double> neighborhood_risk(const NeighborIndex& idx,
                                      std::span<const double> query_rows,
                                      std::size_t n_queries,
                                      std::span<const std::ptrdiff_t> exclude_self = {});

/// Normalized binary entropy of a neighborhood risk; 0 exactly on pure
/// cohorts, 1 exactly at q = 0.5.
double cohort_entropy(double q);

/// Per-sample cohort statistics precomputed once from frozen embeddings and
/// reused for all training epochs.
struct CohortStats {
  std::vector<double> q;
  std::vector<double> cohort_entropy;
  std::vector<double> weight;  // lambda_coh * cohort_entropy
  std::size_t k = 0;
  double lambda_coh = 0.0;

  std::size_t n() const { return q.size(); }
};

/// Computes q, entropy, and weight for every training sample, with each
/// query's own row excluded from its neighbor set.
CohortStats precompute_cohorts(const NeighborIndex& idx,
                               const EmbeddingDataset& train_set,
                               double lambda_coh);

/// CSV dump `id,q,cohort_entropy,weight` for inspection.
std::string cohort_stats_to_csv(const CohortStats& stats,
                                std::span<const std::string> ids);

}  // namespace cura
