#include "cura/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "cura/io.hpp"
#include "cura/objective.hpp"

namespace cura {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t count_positives(const ScoredSet& s) {
  return static_cast<std::size_t>(
      std::count(s.label.begin(), s.label.end(), 1));
}

// Ranking by ascending uncertainty, ties broken by ascending index; the
// shared order behind AURC, retained-cohort, and workload curves.
std::vector<std::size_t> confidence_order(const ScoredSet& s) {
  std::vector<std::size_t> order(s.n());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.uncertainty[a] != s.uncertainty[b]) {
      return s.uncertainty[a] < s.uncertainty[b];
    }
    return a < b;
  });
  return order;
}

std::size_t retained_count(double fraction, std::size_t n) {
  const double raw = std::ceil(fraction * static_cast<double>(n));
  return std::min<std::size_t>(n, static_cast<std::size_t>(raw));
}

}  // namespace

ScoredSet make_scored(std::vector<double> prob, std::vector<int> label,
                      std::string method, std::string fold) {
  if (prob.size() != label.size()) {
    throw std::runtime_error("scored set: prob/label length mismatch");
  }
  ScoredSet s;
  s.prob = std::move(prob);
  s.label = std::move(label);
  s.method = std::move(method);
  s.fold = std::move(fold);
  s.uncertainty.resize(s.prob.size());
  for (std::size_t i = 0; i < s.prob.size(); ++i) {
    if (!(s.prob[i] > 0.0 && s.prob[i] < 1.0)) {
      throw std::runtime_error("scored set: probability outside (0,1) at row " +
                               std::to_string(i));
    }
    if (s.label[i] != 0 && s.label[i] != 1) {
      throw std::runtime_error("scored set: label outside {0,1} at row " +
                               std::to_string(i));
    }
    s.uncertainty[i] = normalized_entropy(s.prob[i]);
  }
  return s;
}

void check_consistency(const ScoredSet& s, double tol) {
  if (s.prob.size() != s.label.size() ||
      s.uncertainty.size() != s.label.size()) {
    throw std::runtime_error("scored set: field length mismatch");
  }
  for (std::size_t i = 0; i < s.n(); ++i) {
    if (std::abs(s.uncertainty[i] - normalized_entropy(s.prob[i])) > tol) {
      throw std::runtime_error(
          "scored set: uncertainty inconsistent with probability at row " +
          std::to_string(i));
    }
  }
}

double auroc(const ScoredSet& s) {
  const std::size_t n_pos = count_positives(s);
  const std::size_t n_neg = s.n() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::runtime_error("auroc: needs at least one sample of each class");
  }
  std::vector<std::size_t> order(s.n());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.prob[a] < s.prob[b];
  });
  // Average ranks over tied probability groups (Mann-Whitney with ties at
  // half credit).
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < s.n()) {
    std::size_t j = i;
    while (j < s.n() && s.prob[order[j]] == s.prob[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (s.label[order[t]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double auprc(const ScoredSet& s) {
  const std::size_t n_pos = count_positives(s);
  if (n_pos == 0) {
    throw std::runtime_error("auprc: needs at least one positive sample");
  }
  std::vector<std::size_t> order(s.n());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.prob[a] != s.prob[b]) return s.prob[a] > s.prob[b];
    return a < b;
  });
  double ap = 0.0;
  std::size_t true_pos = 0;
  for (std::size_t rank = 1; rank <= s.n(); ++rank) {
    if (s.label[order[rank - 1]] == 1) {
      ++true_pos;
      ap += static_cast<double>(true_pos) / static_cast<double>(rank);
    }
  }
  return ap / static_cast<double>(n_pos);
}

double brier(const ScoredSet& s) {
  if (s.n() == 0) throw std::runtime_error("brier: empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double d = s.prob[i] - static_cast<double>(s.label[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(s.n());
}

double nll(const ScoredSet& s) {
  if (s.n() == 0) throw std::runtime_error("nll: empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    sum += weighted_ce(s.prob[i], static_cast<double>(s.label[i]), 1.0, 1.0);
  }
  return sum / static_cast<double>(s.n());
}

double aurc(const ScoredSet& s) {
  if (s.n() == 0) throw std::runtime_error("aurc: empty set");
  const auto order = confidence_order(s);
  double sum_risk = 0.0;
  std::size_t errors = 0;
  for (std::size_t k = 1; k <= s.n(); ++k) {
    const std::size_t i = order[k - 1];
    errors += predicted_label(s.prob[i]) != s.label[i];
    sum_risk += static_cast<double>(errors) / static_cast<double>(k);
  }
  return sum_risk / static_cast<double>(s.n());
}

std::vector<UncertaintyBin> uncertainty_bins(const ScoredSet& s,
                                             std::size_t n_bins) {
  if (n_bins < 1) throw std::runtime_error("uncertainty_bins: n_bins < 1");
  std::vector<UncertaintyBin> bins(n_bins);
  std::vector<std::size_t> correct(n_bins, 0), positive(n_bins, 0);
  const double width = 1.0 / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lo = static_cast<double>(b) * width;
    bins[b].hi = b + 1 == n_bins ? 1.0 : static_cast<double>(b + 1) * width;
  }
  for (std::size_t i = 0; i < s.n(); ++i) {
    std::size_t b = static_cast<std::size_t>(s.uncertainty[i] *
                                             static_cast<double>(n_bins));
    b = std::min(b, n_bins - 1);
    bins[b].count += 1;
    correct[b] += predicted_label(s.prob[i]) == s.label[i];
    positive[b] += s.label[i] == 1;
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (bins[b].count == 0) {
      bins[b].accuracy = kNaN;
      bins[b].positive_rate = kNaN;
    } else {
      const double c = static_cast<double>(bins[b].count);
      bins[b].accuracy = static_cast<double>(correct[b]) / c;
      bins[b].positive_rate = static_cast<double>(positive[b]) / c;
    }
  }
  return bins;
}

std::vector<CurvePoint> retained_auprc_curve(const ScoredSet& s,
                                             std::span<const double> fractions) {
  const auto order = confidence_order(s);
  std::vector<CurvePoint> out;
  out.reserve(fractions.size());
  for (const double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw std::runtime_error("retained_auprc_curve: fraction outside (0,1]");
    }
    const std::size_t m = retained_count(f, s.n());
    ScoredSet sub;
    sub.prob.reserve(m);
    sub.label.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      sub.prob.push_back(s.prob[order[k]]);
      sub.label.push_back(s.label[order[k]]);
    }
    sub.uncertainty.assign(m, 0.0);
    if (count_positives(sub) == 0) {
      out.push_back({f, kNaN, false});
    } else {
      out.push_back({f, auprc(sub), true});
    }
  }
  return out;
}

std::vector<CurvePoint> workload_safety_curve(const ScoredSet& s,
                                              std::span<const double> fractions) {
  const auto order = confidence_order(s);
  std::vector<CurvePoint> out;
  out.reserve(fractions.size());
  for (const double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw std::runtime_error("workload_safety_curve: fraction outside [0,1]");
    }
    const std::size_t m = retained_count(f, s.n());
    std::size_t missed = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = order[k];
      missed += s.label[i] == 1 && s.prob[i] < 0.5;
    }
    out.push_back(
        {f, 1000.0 * static_cast<double>(missed) / static_cast<double>(s.n()),
         true});
  }
  return out;
}

std::vector<CurvePoint> risk_coverage_curve(const ScoredSet& s,
                                            std::size_t n_points) {
  if (n_points < 1) throw std::runtime_error("risk_coverage_curve: n_points < 1");
  const auto order = confidence_order(s);
  std::vector<std::size_t> prefix_errors(s.n() + 1, 0);
  for (std::size_t k = 1; k <= s.n(); ++k) {
    const std::size_t i = order[k - 1];
    prefix_errors[k] =
        prefix_errors[k - 1] + (predicted_label(s.prob[i]) != s.label[i]);
  }
  std::vector<CurvePoint> out;
  out.reserve(n_points);
  for (std::size_t p = 1; p <= n_points; ++p) {
    const double coverage =
        static_cast<double>(p) / static_cast<double>(n_points);
    const std::size_t m = std::max<std::size_t>(1, retained_count(coverage, s.n()));
    out.push_back({coverage, static_cast<double>(prefix_errors[m]) /
                                 static_cast<double>(m),
                   true});
  }
  return out;
}

double false_reassurance_rate(const ScoredSet& s, double tau) {
  const std::size_t n_pos = count_positives(s);
  if (n_pos == 0) {
    throw std::runtime_error(
        "false_reassurance_rate: needs at least one positive sample");
  }
  std::size_t reassured = 0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    reassured +=
        s.label[i] == 1 && s.uncertainty[i] < tau && s.prob[i] < tau;
  }
  return static_cast<double>(reassured) / static_cast<double>(n_pos);
}

std::vector<std::pair<double, double>> frr_sweep(const ScoredSet& s) {
  std::vector<std::pair<double, double>> out;
  for (const double tau : {0.05, 0.10, 0.15}) {
    out.emplace_back(tau, false_reassurance_rate(s, tau));
  }
  return out;
}

EvalReport evaluate(const ScoredSet& s, const EvalOptions& opts) {
  check_consistency(s);
  EvalReport r;
  r.method = s.method;
  r.fold = s.fold;
  r.auroc = auroc(s);
  r.auprc = auprc(s);
  r.brier = brier(s);
  r.nll = nll(s);
  r.aurc = aurc(s);
  for (const auto& [tau, value] : frr_sweep(s)) r.frr[tau] = value;
  r.risk_coverage = risk_coverage_curve(s, opts.risk_coverage_points);
  r.bins = uncertainty_bins(s, opts.n_bins);
  r.retained_auprc = retained_auprc_curve(s, opts.retained_fractions);
  r.workload_safety = workload_safety_curve(s, opts.workload_fractions);
  return r;
}

AggregateReport aggregate_reports(std::span<const EvalReport> reports) {
  if (reports.empty()) {
    throw std::runtime_error("aggregate_reports: no reports");
  }
  AggregateReport agg;
  agg.method = reports.front().method;
  agg.n_folds = reports.size();
  const double n = static_cast<double>(reports.size());
  auto mean_sd = [&](auto getter, double& mean, double& sd) {
    double sum = 0.0;
    for (const EvalReport& r : reports) sum += getter(r);
    mean = sum / n;
    double var = 0.0;
    for (const EvalReport& r : reports) {
      const double d = getter(r) - mean;
      var += d * d;
    }
    sd = std::sqrt(var / n);
  };
  mean_sd([](const EvalReport& r) { return r.auroc; }, agg.auroc_mean, agg.auroc_sd);
  mean_sd([](const EvalReport& r) { return r.auprc; }, agg.auprc_mean, agg.auprc_sd);
  mean_sd([](const EvalReport& r) { return r.brier; }, agg.brier_mean, agg.brier_sd);
  mean_sd([](const EvalReport& r) { return r.nll; }, agg.nll_mean, agg.nll_sd);
  mean_sd([](const EvalReport& r) { return r.aurc; }, agg.aurc_mean, agg.aurc_sd);
  for (const auto& [tau, value] : reports.front().frr) {
    double sum = 0.0;
    for (const EvalReport& r : reports) sum += r.frr.at(tau);
    agg.frr_mean[tau] = sum / n;
  }
  return agg;
}

namespace {

nlohmann::json curve_to_json(std::span<const CurvePoint> curve,
                             const char* x_name, const char* y_name) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CurvePoint& p : curve) {
    nlohmann::json row;
    row[x_name] = p.x;
    if (p.defined) {
      row[y_name] = p.value;
    } else {
      row[y_name] = nullptr;
    }
    arr.push_back(std::move(row));
  }
  return arr;
}

nlohmann::json frr_to_json(const std::map<double, double>& frr) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [tau, value] : frr) {
    arr.push_back({{"tau", tau}, {"frr", value}});
  }
  return arr;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["fold"] = r.fold;
  j["auroc"] = r.auroc;
  j["auprc"] = r.auprc;
  j["brier"] = r.brier;
  j["nll"] = r.nll;
  j["aurc"] = r.aurc;
  j["frr"] = frr_to_json(r.frr);
  j["risk_coverage"] = curve_to_json(r.risk_coverage, "coverage", "risk");
  nlohmann::json bins = nlohmann::json::array();
  for (const UncertaintyBin& b : r.bins) {
    nlohmann::json row{{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}};
    if (b.count == 0) {
      row["accuracy"] = nullptr;
      row["positive_rate"] = nullptr;
    } else {
      row["accuracy"] = b.accuracy;
      row["positive_rate"] = b.positive_rate;
    }
    bins.push_back(std::move(row));
  }
  j["bins"] = std::move(bins);
  j["retained_auprc"] = curve_to_json(r.retained_auprc, "fraction", "auprc");
  j["workload_safety"] =
      curve_to_json(r.workload_safety, "fraction", "missed_per_1000");
  return j.dump(2);
}

std::string aggregate_to_json(const AggregateReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["n_folds"] = r.n_folds;
  j["auroc"] = {{"mean", r.auroc_mean}, {"sd", r.auroc_sd}};
  j["auprc"] = {{"mean", r.auprc_mean}, {"sd", r.auprc_sd}};
  j["brier"] = {{"mean", r.brier_mean}, {"sd", r.brier_sd}};
  j["nll"] = {{"mean", r.nll_mean}, {"sd", r.nll_sd}};
  j["aurc"] = {{"mean", r.aurc_mean}, {"sd", r.aurc_sd}};
  j["frr"] = frr_to_json(r.frr_mean);
  return j.dump(2);
}

std::string risk_coverage_to_csv(std::span<const CurvePoint> curve) {
  std::string out = "coverage,risk\n";
  for (const CurvePoint& p : curve) {
    out += fmt_double(p.x);
    out += ',';
    out += p.defined ? fmt_double(p.value) : "nan";
    out += '\n';
  }
  return out;
}

std::string bins_to_csv(std::span<const UncertaintyBin> bins) {
  std::string out = "lo,hi,count,accuracy,positive_rate\n";
  for (const UncertaintyBin& b : bins) {
    out += fmt_double(b.lo);
    out += ',';
    out += fmt_double(b.hi);
    out += ',';
    out += std::to_string(b.count);
    out += ',';
    out += b.count == 0 ? "nan" : fmt_double(b.accuracy);
    out += ',';
    out += b.count == 0 ? "nan" : fmt_double(b.positive_rate);
    out += '\n';
  }
  return out;
}

std::string retained_auprc_to_csv(std::span<const CurvePoint> curve) {
  std::string out = "fraction,auprc\n";
  for (const CurvePoint& p : curve) {
    out += fmt_double(p.x);
    out += ',';
    out += p.defined ? fmt_double(p.value) : "nan";
    out += '\n';
  }
  return out;
}

std::string workload_safety_to_csv(std::span<const CurvePoint> curve) {
  std::string out = "fraction,missed_per_1000\n";
  for (const CurvePoint& p : curve) {
    out += fmt_double(p.x);
    out += ',';
    out += p.defined ? fmt_double(p.value) : "nan";
    out += '\n';
  }
  return out;
}

std::string frr_to_csv(std::span<const std::pair<double, double>> sweep) {
  std::string out = "tau,frr\n";
  for (const auto& [tau, value] : sweep) {
    out += fmt_double(tau);
    out += ',';
    out += fmt_double(value);
    out += '\n';
  }
  return out;
}

}  // namespace cura
