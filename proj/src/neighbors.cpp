#include "cura/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cura/io.hpp"
#include "cura/objective.hpp"

namespace cura {

NeighborIndex build_index(std::span<const double> embeddings, std::size_t dim,
                          std::span<const int> labels, std::size_t k) {
  if (dim < 1) throw std::runtime_error("build_index: dim must be >= 1");
  if (embeddings.size() != labels.size() * dim) {
    throw std::runtime_error("build_index: embedding matrix shape mismatch");
  }
  const std::size_t n = labels.size();
  if (k < 1) throw std::runtime_error("build_index: k must be >= 1");
  if (n < 2 || k > n - 1) {
    throw std::runtime_error("build_index: k=" + std::to_string(k) +
                             " too large for " + std::to_string(n) +
                             " reference samples (self-exclusion needs k <= n-1)");
  }

  NeighborIndex idx;
  idx.embeddings = embeddings.data();
  idx.labels = labels.data();
  idx.n = n;
  idx.dim = dim;
  idx.k = k;
  idx.inv_norms.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = embeddings.data() + i * dim;
    double norm2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) norm2 += row[j] * row[j];
    if (norm2 == 0.0) {
      throw std::runtime_error("build_index: zero-norm embedding row at index " +
                               std::to_string(i) +
                               " (cosine distance undefined)");
    }
    idx.inv_norms[i] = 1.0 / std::sqrt(norm2);
  }
  return idx;
}

namespace {

struct Candidate {
  double dist;
  std::size_t ref;
};

inline bool candidate_less(const Candidate& a, const Candidate& b) {
  return a.dist < b.dist || (a.dist == b.dist && a.ref < b.ref);
}

// Fills `out` with the k nearest candidates in final order. `scratch` is
// reused across queries to avoid reallocation.
void select_neighbors(const NeighborIndex& idx, const double* query,
                      std::ptrdiff_t exclude_self,
                      std::vector<Candidate>& scratch,
                      std::vector<std::size_t>& out) {
  const std::size_t d = idx.dim;
  double qnorm2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) qnorm2 += query[j] * query[j];
  if (qnorm2 == 0.0) {
    throw std::runtime_error("query_neighbors: zero-norm query row");
  }
  const double inv_qnorm = 1.0 / std::sqrt(qnorm2);

  scratch.clear();
  scratch.reserve(idx.n);
  for (std::size_t r = 0; r < idx.n; ++r) {
    if (static_cast<std::ptrdiff_t>(r) == exclude_self) continue;
    const double* ref = idx.embeddings + r * d;
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += query[j] * ref[j];
    const double dist = 1.0 - dot * inv_qnorm * idx.inv_norms[r];
    scratch.push_back({dist, r});
  }
  if (scratch.size() < idx.k) {
    throw std::runtime_error("query_neighbors: fewer candidates than k");
  }
  std::nth_element(scratch.begin(), scratch.begin() + (idx.k - 1),
                   scratch.end(), candidate_less);
  std::sort(scratch.begin(), scratch.begin() + idx.k, candidate_less);
  out.resize(idx.k);
  for (std::size_t i = 0; i < idx.k; ++i) out[i] = scratch[i].ref;
}

}  // namespace

std::vector<std::size_t> query_neighbors(const NeighborIndex& idx,
                                         std::span<const double> query,
                                         std::ptrdiff_t exclude_self) {
  if (query.size() != idx.dim) {
    throw std::runtime_error("query_neighbors: query dim " +
                             std::to_string(query.size()) +
                             " does not match index dim " +
                             std::to_string(idx.dim));
  }
  std::vector<Candidate> scratch;
  std::vector<std::size_t> out;
  select_neighbors(idx, query.data(), exclude_self, scratch, out);
  return out;
}

std::vector<double> neighborhood_risk(const NeighborIndex& idx,
                                      std::span<const double> query_rows,
                                      std::size_t n_queries,
                                      std::span<const std::ptrdiff_t> exclude_self) {
  if (query_rows.size() != n_queries * idx.dim) {
    throw std::runtime_error("neighborhood_risk: query matrix shape mismatch");
  }
  if (!exclude_self.empty() && exclude_self.size() != n_queries) {
    throw std::runtime_error("neighborhood_risk: exclusion list length mismatch");
  }
  std::vector<double> q(n_queries);
  std::vector<Candidate> scratch;
  std::vector<std::size_t> neigh;
  for (std::size_t i = 0; i < n_queries; ++i) {
    const std::ptrdiff_t excl = exclude_self.empty() ? kNoExclusion : exclude_self[i];
    select_neighbors(idx, query_rows.data() + i * idx.dim, excl, scratch, neigh);
    std::size_t positives = 0;
    for (const std::size_t r : neigh) positives += idx.labels[r] == 1;
    q[i] = static_cast<double>(positives) / static_cast<double>(idx.k);
  }
  return q;
}

double cohort_entropy(double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::runtime_error("cohort_entropy: q outside [0,1]");
  }
  return normalized_entropy(q);
}

CohortStats precompute_cohorts(const NeighborIndex& idx,
                               const EmbeddingDataset& train_set,
                               double lambda_coh) {
  if (train_set.n() != idx.n || train_set.dim != idx.dim) {
    throw std::runtime_error(
        "precompute_cohorts: training set does not match the index "
        "(expected every training sample present)");
  }
  if (lambda_coh < 0.0) {
    throw std::runtime_error("precompute_cohorts: lambda_coh must be >= 0");
  }
  std::vector<std::ptrdiff_t> self(train_set.n());
  for (std::size_t i = 0; i < self.size(); ++i) {
    self[i] = static_cast<std::ptrdiff_t>(i);
  }
  CohortStats stats;
  stats.k = idx.k;
  stats.lambda_coh = lambda_coh;
  stats.q = neighborhood_risk(idx, train_set.embeddings, train_set.n(), self);
  stats.cohort_entropy.resize(stats.q.size());
  stats.weight.resize(stats.q.size());
  for (std::size_t i = 0; i < stats.q.size(); ++i) {
    stats.cohort_entropy[i] = cohort_entropy(stats.q[i]);
    stats.weight[i] = lambda_coh * stats.cohort_entropy[i];
  }
  return stats;
}

std::string cohort_stats_to_csv(const CohortStats& stats,
                                std::span<const std::string> ids) {
  if (ids.size() != stats.n()) {
    throw std::runtime_error("cohort_stats_to_csv: id count mismatch");
  }
  std::string out = "id,q,cohort_entropy,weight\n";
  for (std::size_t i = 0; i < stats.n(); ++i) {
    out += ids[i];
    out += ',';
    out += fmt_double(stats.q[i]);
    out += ',';
    out += fmt_double(stats.cohort_entropy[i]);
    out += ',';
    out += fmt_double(stats.weight[i]);
    out += '\n';
  }
  return out;
}

}  // namespace cura
