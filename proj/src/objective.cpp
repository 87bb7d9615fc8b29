#include "cura/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cura {

namespace {

constexpr double kEntropyClamp = 1e-7;  // clamp on u before logs
const double kInvLn2 = 1.0 / std::log(2.0);

}  // namespace

void ObjectiveConfig::validate() const {
  if (lambda_ind < 0.0) throw std::runtime_error("objective: lambda_ind < 0");
  if (lambda_coh < 0.0) throw std::runtime_error("objective: lambda_coh < 0");
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw std::runtime_error("objective: epsilon must be in (0, 0.5)");
  }
  if (w_pos <= 0.0 || w_neg <= 0.0) {
    throw std::runtime_error("objective: class weights must be positive");
  }
}

double clamp_probability(double p, double epsilon) {
  if (p < epsilon) return epsilon;
  if (p > 1.0 - epsilon) return 1.0 - epsilon;
  return p;
}

double weighted_ce(double p, double y, double w_pos, double w_neg) {
  return -(w_pos * y * std::log(p) + w_neg * (1.0 - y) * std::log1p(-p));
}

double correctness(double p_mean, int y) {
  return y == 1 ? p_mean : 1.0 - p_mean;
}

double normalized_entropy(double p_mean) {
  if (p_mean <= 0.0 || p_mean >= 1.0) return 0.0;
  if (p_mean == 0.5) return 1.0;
  const double h =
      -(p_mean * std::log(p_mean) + (1.0 - p_mean) * std::log1p(-p_mean));
  const double u = h * kInvLn2;
  return u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
}

namespace {

// Per-sample calibration term -(1-a)ln(u) - a*ln(1-u) and its derivative in
// the mean probability. The derivative runs through both a(p) and u(p); a
// clamped u contributes no u-path gradient (the loss is locally flat there).
struct IndTerm {
  double value;
  double dvalue_dp;
};

IndTerm ind_term(double p, int y) {
  const double a = correctness(p, y);
  const double u_raw = normalized_entropy(p);
  const bool u_clamped = u_raw < kEntropyClamp || u_raw > 1.0 - kEntropyClamp;
  const double u = u_clamped
                       ? (u_raw < kEntropyClamp ? kEntropyClamp : 1.0 - kEntropyClamp)
                       : u_raw;
  const double log_u = std::log(u);
  const double log_1mu = std::log1p(-u);
  const double value = -(1.0 - a) * log_u - a * log_1mu;
  const double da_dp = y == 1 ? 1.0 : -1.0;
  const double du_dp = u_clamped ? 0.0 : std::log((1.0 - p) / p) * kInvLn2;
  const double dvalue_dp = da_dp * (log_u - log_1mu) +
                           du_dp * (a / (1.0 - u) - (1.0 - a) / u);
  return {value, dvalue_dp};
}

}  // namespace

double loss_ind(std::span<const double> p_mean, std::span<const int> y,
                double lambda_ind, double epsilon) {
  if (lambda_ind == 0.0 || p_mean.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < p_mean.size(); ++i) {
    sum += ind_term(clamp_probability(p_mean[i], epsilon), y[i]).value;
  }
  return lambda_ind * sum / static_cast<double>(p_mean.size());
}

double loss_coh(std::span<const double> p_mean, std::span<const double> q,
                std::span<const double> w, double epsilon) {
  if (p_mean.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < p_mean.size(); ++i) {
    const double p = clamp_probability(p_mean[i], epsilon);
    sum += w[i] * weighted_ce(p, q[i], 1.0, 1.0);
  }
  return sum / static_cast<double>(p_mean.size());
}

LossBreakdown loss_total(std::span<const double> p_mean,
                         std::span<const int> y, std::span<const double> q,
                         std::span<const double> w,
                         const ObjectiveConfig& cfg) {
  const std::size_t n = p_mean.size();
  if (y.size() != n) throw std::runtime_error("loss_total: y length mismatch");
  const bool has_cohort = !w.empty();
  if (has_cohort && (q.size() != n || w.size() != n)) {
    throw std::runtime_error("loss_total: cohort vector length mismatch");
  }

  LossBreakdown out;
  out.grad_wrt_mean_prob.assign(n, 0.0);
  if (n == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  double sum_base = 0.0, sum_ind = 0.0, sum_coh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = clamp_probability(p_mean[i], cfg.epsilon);
    const bool p_clamped = p != p_mean[i];
    const double yl = static_cast<double>(y[i]);

    sum_base += weighted_ce(p, yl, cfg.w_pos, cfg.w_neg);
    double grad = p_clamped
                      ? 0.0
                      : -cfg.w_pos * yl / p + cfg.w_neg * (1.0 - yl) / (1.0 - p);

    if (cfg.lambda_ind != 0.0) {
      const IndTerm term = ind_term(p, y[i]);
      sum_ind += term.value;
      if (!p_clamped) grad += cfg.lambda_ind * term.dvalue_dp;
    }

    if (has_cohort && w[i] != 0.0) {
      const double cw_pos = cfg.cohort_weighted_ce ? cfg.w_pos : 1.0;
      const double cw_neg = cfg.cohort_weighted_ce ? cfg.w_neg : 1.0;
      sum_coh += w[i] * weighted_ce(p, q[i], cw_pos, cw_neg);
      if (!p_clamped) {
        grad += w[i] * (-cw_pos * q[i] / p + cw_neg * (1.0 - q[i]) / (1.0 - p));
      }
    }

    out.grad_wrt_mean_prob[i] = grad * inv_n;
  }

  out.l_base = sum_base * inv_n;
  out.l_ind = cfg.lambda_ind * sum_ind * inv_n;
  out.l_coh = sum_coh * inv_n;
  out.l_total = out.l_base + out.l_ind + out.l_coh;
  if (!std::isfinite(out.l_total)) {
    throw std::runtime_error("loss_total: non-finite loss (l_base=" +
                             std::to_string(out.l_base) + ", l_ind=" +
                             std::to_string(out.l_ind) + ", l_coh=" +
                             std::to_string(out.l_coh) + ")");
  }
  return out;
}

SoftLabelForm soft_label_form(int y, double q, double w) {
  if (w < 0.0) throw std::runtime_error("soft_label_form: w must be >= 0");
  SoftLabelForm form;
  form.scale = 1.0 + w;
  form.gamma = w / (1.0 + w);
  form.t = (static_cast<double>(y) + w * q) / (1.0 + w);
  return form;
}

double verify_soft_label_identity(double p, int y, double q, double w) {
  const SoftLabelForm form = soft_label_form(y, q, w);
  const double lhs = weighted_ce(p, static_cast<double>(y), 1.0, 1.0) +
                     w * weighted_ce(p, q, 1.0, 1.0);
  const double rhs = form.scale * weighted_ce(p, form.t, 1.0, 1.0);
  return std::abs(lhs - rhs);
}

}  // namespace cura
