#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cura {

/// Final probabilities, their normalized-entropy uncertainty, and labels for
/// one method on one fold (or a pooled set of folds). Uncertainty is always
/// recomputable from prob; `check_consistency` verifies that to 1e-9.
struct ScoredSet {
  std::vector<double> prob;
  std::vector<double> uncertainty;
  std::vector<int> label;
  std::string method;
  std::string fold;

  std::size_t n() const { return label.size(); }
};

ScoredSet make_scored(std::vector<double> prob, std::vector<int> label,
                      std::string method = {}, std::string fold = {});

void check_consistency(const ScoredSet& s, double tol = 1e-9);

/// Decision rule used by accuracy-style quantities: positive iff p >= 0.5.
inline int predicted_label(double prob) { return prob >= 0.5 ? 1 : 0; }

/// Mann-Whitney statistic: probability that a random positive outranks a
/// random negative, ties counted one half.
double auroc(const ScoredSet& s);

/// Average precision with step interpolation; ties ordered by descending
/// probability then ascending index.
double auprc(const ScoredSet& s);

double brier(const ScoredSet& s);
double nll(const ScoredSet& s);

/// Mean selective risk over all n coverage levels: samples ranked by
/// ascending uncertainty (ties by index), risk = misclassification rate at
/// the 0.5 threshold among the retained prefix.
double aurc(const ScoredSet& s);

struct UncertaintyBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;       // NaN when the bin is empty
  double positive_rate = 0.0;  // NaN when the bin is empty
};

/// Equal-width bins on [0,1]; the last bin is right-closed. Empty bins are
/// reported with count 0 and NaN rates, never dropped.
std::vector<UncertaintyBin> uncertainty_bins(const ScoredSet& s,
                                             std::size_t n_bins);

struct CurvePoint {
  double x = 0.0;
  double value = 0.0;
  bool defined = true;
};

/// AUPRC over the ceil(f*n) lowest-uncertainty samples per fraction;
/// undefined (flagged, NaN value) when the retained set has no positives.
std::vector<CurvePoint> retained_auprc_curve(const ScoredSet& s,
                                             std::span<const double> fractions);

/// Missed positives per 1000 patients when the ceil(f*n) lowest-uncertainty
/// samples are automated; missed = automated positives with prob < 0.5.
std::vector<CurvePoint> workload_safety_curve(const ScoredSet& s,
                                              std::span<const double> fractions);

/// Selective risk at `n_points` evenly spaced coverage levels.
std::vector<CurvePoint> risk_coverage_curve(const ScoredSet& s,
                                            std::size_t n_points = 100);

/// Fraction of true positives in the safe region {u < tau and p < tau}.
double false_reassurance_rate(const ScoredSet& s, double tau);

/// The threshold sweep reported in the analyses: tau in {0.05, 0.10, 0.15}.
std::vector<std::pair<double, double>> frr_sweep(const ScoredSet& s);

struct EvalReport {
  std::string method;
  std::string fold;
  double auroc = 0.0;
  double auprc = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  double aurc = 0.0;
  std::map<double, double> frr;
  std::vector<CurvePoint> risk_coverage;
  std::vector<UncertaintyBin> bins;
  std::vector<CurvePoint> retained_auprc;
  std::vector<CurvePoint> workload_safety;
};

struct EvalOptions {
  std::size_t n_bins = 10;
  std::size_t risk_coverage_points = 100;
  std::vector<double> retained_fractions = {0.1, 0.2, 0.3, 0.4, 0.5,
                                            0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> workload_fractions = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3,
                                            0.35, 0.4, 0.45, 0.5, 0.55, 0.6,
                                            0.65, 0.7, 0.75, 0.8, 0.85, 0.9,
                                            0.95, 1.0};
};

EvalReport evaluate(const ScoredSet& s, const EvalOptions& opts = {});

/// Arithmetic mean and population standard deviation of the scalar metrics
/// across folds.
struct AggregateReport {
  std::string method;
  std::size_t n_folds = 0;
  double auroc_mean = 0.0, auroc_sd = 0.0;
  double auprc_mean = 0.0, auprc_sd = 0.0;
  double brier_mean = 0.0, brier_sd = 0.0;
  double nll_mean = 0.0, nll_sd = 0.0;
  double aurc_mean = 0.0, aurc_sd = 0.0;
  std::map<double, double> frr_mean;
};

AggregateReport aggregate_reports(std::span<const EvalReport> reports);

std::string report_to_json(const EvalReport& r);
std::string aggregate_to_json(const AggregateReport& r);

// Curve CSV emitters (full round-trip precision; NaN marks undefined cells).
std::string risk_coverage_to_csv(std::span<const CurvePoint> curve);
std::string bins_to_csv(std::span<const UncertaintyBin> bins);
std::string retained_auprc_to_csv(std::span<const CurvePoint> curve);
std::string workload_safety_to_csv(std::span<const CurvePoint> curve);
std::string frr_to_csv(std::span<const std::pair<double, double>> sweep);

}  // namespace cura
