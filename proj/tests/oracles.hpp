#pragma once

// Test-only reference implementations. Each is written as the most direct
// (often quadratic) restatement of the definition, independent of the
// algorithms used by the library, so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

// P(random positive outranks random negative), ties at half credit.
inline double auroc_pair_count(const std::vector<double>& prob,
                               const std::vector<int>& label) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (label[i] != 1) continue;
    for (std::size_t j = 0; j < prob.size(); ++j) {
      if (label[j] != 0) continue;
      ++pairs;
      if (prob[i] > prob[j]) wins += 1.0;
      else if (prob[i] == prob[j]) wins += 0.5;
    }
  }
  if (pairs == 0) throw std::runtime_error("oracle auroc: one class only");
  return wins / static_cast<double>(pairs);
}

// Average precision by walking ranks in (prob desc, index asc) order and
// recomputing precision from scratch at every positive.
inline double auprc_rank_walk(const std::vector<double>& prob,
                              const std::vector<int>& label) {
  std::vector<std::size_t> order(prob.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prob[a] > prob[b];
  });
  std::size_t n_pos = 0;
  for (const int y : label) n_pos += y == 1;
  if (n_pos == 0) throw std::runtime_error("oracle auprc: no positives");
  double ap = 0.0;
  for (std::size_t rank = 1; rank <= order.size(); ++rank) {
    if (label[order[rank - 1]] != 1) continue;
    std::size_t tp = 0;
    for (std::size_t r = 1; r <= rank; ++r) tp += label[order[r - 1]] == 1;
    ap += static_cast<double>(tp) / static_cast<double>(rank);
  }
  return ap / static_cast<double>(n_pos);
}

// Mean selective risk over all coverage levels; the retained set and its
// error count are re-derived from scratch for every k.
inline double aurc_enumerate(const std::vector<double>& prob,
                             const std::vector<double>& uncertainty,
                             const std::vector<int>& label) {
  const std::size_t n = prob.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return uncertainty[a] < uncertainty[b];
  });
  double total = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    std::size_t errors = 0;
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t i = order[t];
      const int pred = prob[i] >= 0.5 ? 1 : 0;
      errors += pred != label[i];
    }
    total += static_cast<double>(errors) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

// Exact cosine k-nearest-neighbors by full scan and full sort.
inline std::vector<std::size_t> knn_full_scan(
    const std::vector<double>& embeddings, std::size_t dim,
    const std::vector<double>& query, std::size_t k,
    std::ptrdiff_t exclude = -1) {
  const std::size_t n = embeddings.size() / dim;
  double qn = 0.0;
  for (std::size_t j = 0; j < dim; ++j) qn += query[j] * query[j];
  qn = std::sqrt(qn);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t r = 0; r < n; ++r) {
    if (static_cast<std::ptrdiff_t>(r) == exclude) continue;
    double dot = 0.0, rn = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      dot += query[j] * embeddings[r * dim + j];
      rn += embeddings[r * dim + j] * embeddings[r * dim + j];
    }
    cand.emplace_back(1.0 - dot / (qn * std::sqrt(rn)), r);
  }
  std::sort(cand.begin(), cand.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(cand[i].second);
  return out;
}

inline double mean_label(const std::vector<int>& labels,
                         const std::vector<std::size_t>& subset) {
  double s = 0.0;
  for (const std::size_t i : subset) s += labels[i];
  return s / static_cast<double>(subset.size());
}

}  // namespace oracle
