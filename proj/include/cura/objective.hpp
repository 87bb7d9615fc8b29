#pragma once

#include <span>
#include <vector>

namespace cura {

/// Weights and clamps for the combined training objective
///   total = base risk CE + individual calibration + cohort alignment.
struct ObjectiveConfig {
  double lambda_ind = 0.5;
  double lambda_coh = 0.01;
  double w_pos = 1.0;  // class weight on positive targets in the base term
  double w_neg = 1.0;
  double epsilon = 1e-7;  // probability clamp before any log
  // The cohort term defaults to plain (unweighted) CE; that is the form under
  // which the soft-label rewrite below is an exact identity. Class-weighted
  // cohort CE is available behind this switch.
  bool cohort_weighted_ce = false;

  void validate() const;
};

struct LossBreakdown {
  double l_base = 0.0;
  double l_ind = 0.0;
  double l_coh = 0.0;
  double l_total = 0.0;  // always l_base + l_ind + l_coh, same evaluation order
  // d(batch loss)/d(mean probability), one entry per sample.
  std::vector<double> grad_wrt_mean_prob;
};

/// Rewrite of base + cohort CE as a single scaled CE against a soft target:
/// gamma = w/(1+w), t = (y + w*q)/(1+w), scale = 1+w.
struct SoftLabelForm {
  double gamma = 0.0;
  double t = 0.0;
  double scale = 1.0;
};

double clamp_probability(double p, double epsilon);

/// -[w_pos*y*ln(p) + w_neg*(1-y)*ln(1-p)]; y may be a soft target in [0,1].
double weighted_ce(double p, double y, double w_pos, double w_neg);

/// Confidence assigned to the true label: y*p + (1-y)*(1-p).
double correctness(double p_mean, int y);

/// Binary entropy of p normalized by ln 2; exactly 0 at {0,1}, exactly 1 at 0.5.
double normalized_entropy(double p_mean);

/// Batch mean of -(1-a)ln(u) - a*ln(1-u), scaled by lambda_ind.
double loss_ind(std::span<const double> p_mean, std::span<const int> y,
                double lambda_ind, double epsilon = 1e-7);

/// Batch mean of w * CE(p, q) with unweighted CE.
double loss_coh(std::span<const double> p_mean, std::span<const double> q,
                std::span<const double> w, double epsilon = 1e-7);

/// All three terms plus the exact derivative of the batch loss with respect
/// to each mean probability. The calibration term is differentiated through
/// both the correctness probability and the entropy (no stop-gradient).
/// q/w may be empty when lambda_coh is zero.
LossBreakdown loss_total(std::span<const double> p_mean,
                         std::span<const int> y, std::span<const double> q,
                         std::span<const double> w,
                         const ObjectiveConfig& cfg);

SoftLabelForm soft_label_form(int y, double q, double w);

/// |CE(p,y) + w*CE(p,q) - (1+w)*CE(p,t)| with unweighted CE on both sides.
double verify_soft_label_identity(double p, int y, double q, double w);

}  // namespace cura
