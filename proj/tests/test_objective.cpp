#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cura/objective.hpp"
#include "cura/rng.hpp"

using namespace cura;

TEST_CASE("weighted cross-entropy on frozen scalar cases") {
  const double eps = 1e-7;
  CHECK(weighted_ce(1.0 - eps, 1.0, 1.0, 1.0) <= -std::log1p(-eps) + 1e-12);
  CHECK(weighted_ce(0.5, 1.0, 1.0, 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // soft target: -[0.75 ln 0.8 + 0.25 ln 0.2]
  const double expect = -(0.75 * std::log(0.8) + 0.25 * std::log(0.2));
  CHECK(weighted_ce(0.8, 0.75, 1.0, 1.0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(weighted_ce(0.8, 0.75, 1.0, 1.0) - 0.5698) < 1e-3);
  // class weights scale each side
  CHECK(weighted_ce(0.5, 1.0, 2.0, 1.0) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("correctness probability is the confidence in the true label") {
  CHECK(correctness(0.8, 1) == 0.8);
  CHECK(correctness(0.8, 0) == doctest::Approx(0.2).epsilon(1e-15));
  for (double p = 0.05; p < 1.0; p += 0.1) {
    CHECK(correctness(p, 1) + correctness(p, 0) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("normalized entropy endpoints, shape, and symmetry") {
  CHECK(normalized_entropy(0.5) == 1.0);
  CHECK(normalized_entropy(1.0 - 1e-7) < 1e-5);
  CHECK(normalized_entropy(0.2) == doctest::Approx(0.7219).epsilon(1e-4));
  // strictly increasing on (0, 0.5], strictly decreasing on [0.5, 1)
  double prev = normalized_entropy(1e-6);
  for (double p = 0.01; p <= 0.5; p += 0.01) {
    const double u = normalized_entropy(p);
    CHECK(u > prev);
    prev = u;
  }
  prev = 1.0;
  for (double p = 0.51; p < 1.0; p += 0.01) {
    const double u = normalized_entropy(p);
    CHECK(u < prev);
    prev = u;
  }
  for (double p = 0.02; p < 0.5; p += 0.03) {
    CHECK(normalized_entropy(p) ==
          doctest::Approx(normalized_entropy(1.0 - p)).epsilon(1e-12));
  }
}

TEST_CASE("individual calibration loss on frozen cases") {
  const std::vector<int> y1{1};
  CHECK(loss_ind(std::vector<double>{0.8}, y1, 0.0) == 0.0);

  // y=1, p=0.8: a=0.8, u=u(0.8); term = -0.2 ln u - 0.8 ln(1-u)
  const double u = normalized_entropy(0.8);
  const double expect = -0.2 * std::log(u) - 0.8 * std::log(1.0 - u);
  CHECK(loss_ind(std::vector<double>{0.8}, y1, 1.0) ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(loss_ind(std::vector<double>{0.8}, y1, 1.0) - 1.0891) < 1e-3);

  // label-flip symmetry: (y=1, p) and (y=0, 1-p) share a and u
  const std::vector<int> y0{0};
  for (double p = 0.1; p < 0.95; p += 0.08) {
    CHECK(loss_ind(std::vector<double>{p}, y1, 0.5) ==
          doctest::Approx(loss_ind(std::vector<double>{1.0 - p}, y0, 0.5))
              .epsilon(1e-12));
  }
}

TEST_CASE("per-sample calibration term is minimized where u matches 1-a") {
  // grid scan over the clamped domain (endpoints included) for one y=1 sample
  const std::vector<int> y{1};
  std::vector<double> grid{1e-7, 1.0 - 1e-7};
  for (double p = 1e-4; p < 1.0; p += 1e-4) grid.push_back(p);
  double best_p = 0.5, best_v = 1e300;
  for (const double p : grid) {
    const double v = loss_ind(std::vector<double>{p}, y, 1.0);
    if (v < best_v) {
      best_v = v;
      best_p = p;
    }
  }
  // the minimum sits where uncertainty equals the error proxy (both -> 0 at
  // the confident-correct corner)
  const double u = normalized_entropy(best_p);
  const double err_proxy = 1.0 - correctness(best_p, 1);
  CHECK(std::abs(u - err_proxy) < 1e-4);
}

TEST_CASE("cohort loss on frozen cases") {
  const std::vector<double> zero_w{0.0, 0.0};
  CHECK(loss_coh(std::vector<double>{0.3, 0.7}, std::vector<double>{0.2, 0.9},
                 zero_w) == 0.0);
  CHECK(loss_coh(std::vector<double>{0.5}, std::vector<double>{0.5},
                 std::vector<double>{1.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const double ce = -(0.25 * std::log(0.8) + 0.75 * std::log(0.2));
  CHECK(loss_coh(std::vector<double>{0.8}, std::vector<double>{0.25},
                 std::vector<double>{0.8113}) ==
        doctest::Approx(0.8113 * ce).epsilon(1e-12));
  CHECK(std::abs(0.8113 * ce - 1.0246) < 1e-3);
}

TEST_CASE("combined loss: additivity is exact and switches are exact") {
  Rng rng(100);
  ObjectiveConfig cfg;
  cfg.lambda_ind = 0.5;
  cfg.lambda_coh = 0.01;
  cfg.w_pos = 3.0;
  cfg.w_neg = 0.7;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng.index(8);
    std::vector<double> p(n), q(n), w(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(0.02, 0.98);
      q[i] = rng.uniform();
      w[i] = rng.uniform(0.0, 0.02);
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    const LossBreakdown b = loss_total(p, y, q, w, cfg);
    CHECK(b.l_total == b.l_base + b.l_ind + b.l_coh);  // bitwise
    CHECK(b.l_base >= 0.0);
    CHECK(b.l_ind >= 0.0);
    CHECK(b.l_coh >= 0.0);
  }

  ObjectiveConfig off = cfg;
  off.lambda_ind = 0.0;
  off.lambda_coh = 0.0;
  const std::vector<double> p{0.3, 0.8};
  const std::vector<int> y{1, 0};
  const LossBreakdown b = loss_total(p, y, {}, {}, off);
  CHECK(b.l_ind == 0.0);
  CHECK(b.l_coh == 0.0);
  CHECK(b.l_total == b.l_base);
}

TEST_CASE("symmetric start with balanced weights gives ln 2 base loss") {
  const std::vector<double> p{0.5, 0.5, 0.5, 0.5};
  const std::vector<int> y{1, 0, 1, 0};
  ObjectiveConfig cfg;
  cfg.lambda_ind = 0.0;
  cfg.lambda_coh = 0.0;
  const LossBreakdown b = loss_total(p, y, {}, {}, cfg);
  CHECK(b.l_base == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("gradient in the mean probability matches central differences") {
  Rng rng(200);
  ObjectiveConfig cfg;
  cfg.lambda_ind = 0.5;
  cfg.lambda_coh = 0.01;
  cfg.w_pos = 2.0;
  cfg.w_neg = 0.8;
  const std::size_t n = 5;
  std::vector<double> p(n), q(n), w(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = rng.uniform(0.05, 0.45) + (rng.bernoulli(0.5) ? 0.5 : 0.0);
    q[i] = rng.uniform(0.1, 0.9);
    w[i] = 0.01 * normalized_entropy(q[i]);
    y[i] = i % 2;
  }
  const LossBreakdown base = loss_total(p, y, q, w, cfg);
  const double h = 1e-6;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> up = p, down = p;
    up[i] += h;
    down[i] -= h;
    const double fd = (loss_total(up, y, q, w, cfg).l_total -
                       loss_total(down, y, q, w, cfg).l_total) /
                      (2.0 * h);
    const double a = base.grad_wrt_mean_prob[i];
    CHECK(std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-2}) < 1e-6);
  }
}

TEST_CASE("clamped probabilities contribute finite loss and zero gradient") {
  ObjectiveConfig cfg;
  cfg.lambda_ind = 0.5;
  cfg.lambda_coh = 0.01;
  const std::vector<double> p{1e-9, 1.0 - 1e-12};
  const std::vector<int> y{1, 0};
  const std::vector<double> q{0.5, 0.5};
  const std::vector<double> w{0.01, 0.01};
  const LossBreakdown b = loss_total(p, y, q, w, cfg);
  CHECK(std::isfinite(b.l_total));
  CHECK(b.grad_wrt_mean_prob[0] == 0.0);
  CHECK(b.grad_wrt_mean_prob[1] == 0.0);
}

TEST_CASE("soft label form") {
  SoftLabelForm f = soft_label_form(1, 0.3, 0.0);
  CHECK(f.gamma == 0.0);
  CHECK(f.t == 1.0);
  CHECK(f.scale == 1.0);

  f = soft_label_form(1, 0.5, 1.0);
  CHECK(f.gamma == 0.5);
  CHECK(f.t == 0.75);
  CHECK(f.scale == 2.0);

  f = soft_label_form(0, 1.0, 1e12);
  CHECK(f.t > 1.0 - 1e-9);  // cohort-dominated limit
  CHECK_THROWS_AS(soft_label_form(1, 0.5, -0.1), std::runtime_error);
}

TEST_CASE("soft-label rewrite is an identity to 1e-10") {
  Rng rng(300);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const double eps = 1e-7;
    const double p = eps + (1.0 - 2.0 * eps) * rng.uniform();
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    const double q = rng.uniform();
    const double w = rng.uniform(0.0, 10.0);
    worst = std::max(worst, verify_soft_label_identity(p, y, q, w));
  }
  CHECK(worst < 1e-10);

  CHECK(verify_soft_label_identity(0.37, 1, 0.9, 0.0) < 1e-12);  // w = 0
  CHECK(verify_soft_label_identity(0.37, 1, 1.0, 3.5) < 1e-12);  // q = y
}

TEST_CASE("objective config validation") {
  ObjectiveConfig cfg;
  cfg.lambda_ind = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  cfg = ObjectiveConfig{};
  cfg.epsilon = 0.7;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  cfg = ObjectiveConfig{};
  cfg.w_pos = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
}

TEST_CASE("vector length mismatches are rejected") {
  ObjectiveConfig cfg;
  const std::vector<double> p{0.5, 0.5};
  const std::vector<int> y{1};
  CHECK_THROWS_AS(loss_total(p, y, {}, {}, cfg), std::runtime_error);
  const std::vector<int> y2{1, 0};
  const std::vector<double> q{0.5};
  const std::vector<double> w{0.1};
  CHECK_THROWS_AS(loss_total(p, y2, q, w, cfg), std::runtime_error);
}
