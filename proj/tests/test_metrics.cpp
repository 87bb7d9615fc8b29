#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cura/metrics.hpp"
#include "cura/objective.hpp"
#include "cura/rng.hpp"
#include "oracles.hpp"

using namespace cura;

namespace {

ScoredSet random_scored(Rng& rng, std::size_t n, double rate = 0.3) {
  std::vector<double> prob(n);
  std::vector<int> label(n);
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    prob[i] = rng.uniform(0.001, 0.999);
    label[i] = rng.bernoulli(rate) ? 1 : 0;
    (label[i] == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos) label[0] = 1;
  if (!has_neg) label[n > 1 ? 1 : 0] = 0;
  return make_scored(std::move(prob), std::move(label));
}

}  // namespace

TEST_CASE("auroc endpoints") {
  ScoredSet perfect = make_scored({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  CHECK(auroc(perfect) == 1.0);
  ScoredSet ties = make_scored({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0});
  CHECK(auroc(ties) == 0.5);
  ScoredSet one_class = make_scored({0.4, 0.5}, {1, 1});
  CHECK_THROWS_AS(auroc(one_class), std::runtime_error);
}

TEST_CASE("auprc endpoints") {
  ScoredSet perfect = make_scored({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  CHECK(auprc(perfect) == 1.0);
  ScoredSet worst = make_scored({0.9, 0.8, 0.7, 0.1}, {0, 0, 0, 1});
  CHECK(auprc(worst) == 0.25);  // single positive ranked last of 4
  ScoredSet none = make_scored({0.4, 0.5}, {0, 0});
  CHECK_THROWS_AS(auprc(none), std::runtime_error);
}

TEST_CASE("ranking metrics match brute-force oracles on random sets") {
  Rng rng(808);
  for (int rep = 0; rep < 60; ++rep) {
    const ScoredSet s = random_scored(rng, 2 + rng.index(199));
    CHECK(std::abs(auroc(s) - oracle::auroc_pair_count(s.prob, s.label)) < 1e-12);
    CHECK(std::abs(auprc(s) - oracle::auprc_rank_walk(s.prob, s.label)) < 1e-12);
    CHECK(std::abs(aurc(s) -
                   oracle::aurc_enumerate(s.prob, s.uncertainty, s.label)) < 1e-12);
  }
}

TEST_CASE("ranking metrics see through strictly increasing transforms") {
  Rng rng(909);
  const ScoredSet s = random_scored(rng, 150);
  std::vector<double> squashed(s.prob.size());
  for (std::size_t i = 0; i < s.prob.size(); ++i) {
    squashed[i] = s.prob[i] * s.prob[i];  // strictly increasing on (0,1)
  }
  const ScoredSet t = make_scored(squashed, s.label);
  CHECK(auroc(t) == doctest::Approx(auroc(s)).epsilon(1e-15));
  CHECK(auprc(t) == doctest::Approx(auprc(s)).epsilon(1e-15));
}

TEST_CASE("brier and nll on frozen cases") {
  ScoredSet s = make_scored({0.9, 0.2}, {1, 0});
  CHECK(brier(s) == doctest::Approx(0.025).epsilon(1e-12));
  const double expect_nll = (-std::log(0.9) - std::log(0.8)) / 2.0;
  CHECK(nll(s) == doctest::Approx(expect_nll).epsilon(1e-12));
  CHECK(std::abs(nll(s) - 0.1643) < 1e-4);

  ScoredSet coin = make_scored({0.5, 0.5}, {1, 0});
  CHECK(brier(coin) == 0.25);
  CHECK(nll(coin) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const double eps = 1e-7;
  ScoredSet sharp = make_scored({1.0 - eps, eps}, {1, 0});
  CHECK(brier(sharp) <= eps * eps + 1e-18);
  CHECK(nll(sharp) <= -std::log1p(-eps) + 1e-12);
}

TEST_CASE("aurc endpoints and the four-sample hand case") {
  ScoredSet right = make_scored({0.9, 0.8, 0.1}, {1, 1, 0});
  CHECK(aurc(right) == 0.0);
  ScoredSet wrong = make_scored({0.9, 0.8, 0.1}, {0, 0, 1});
  CHECK(aurc(wrong) == 1.0);

  const ScoredSet hand = make_scored({0.1, 0.2, 0.4, 0.9}, {0, 0, 1, 0});
  const double expect =
      oracle::aurc_enumerate(hand.prob, hand.uncertainty, hand.label);
  CHECK(aurc(hand) == doctest::Approx(expect).epsilon(1e-15));

  // duplicated probabilities give an exact uncertainty tie, broken by index:
  // order (0, 3, 1, 2), risks 0/1, 1/2, 1/3, 2/4 -> mean 1/3
  const ScoredSet tied = make_scored({0.1, 0.2, 0.4, 0.1}, {0, 0, 1, 1});
  CHECK(tied.uncertainty[0] == tied.uncertainty[3]);
  CHECK(aurc(tied) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("uncertainty bins partition the samples") {
  ScoredSet low = make_scored({0.999, 0.9985, 0.001}, {1, 1, 0});
  const auto bins = uncertainty_bins(low, 10);
  REQUIRE(bins.size() == 10);
  CHECK(bins[0].count == 3);  // all u ~ 0.01-0.02
  for (std::size_t b = 1; b < 10; ++b) {
    CHECK(bins[b].count == 0);
    CHECK(std::isnan(bins[b].accuracy));
    CHECK(std::isnan(bins[b].positive_rate));
  }

  Rng rng(11);
  const ScoredSet s = random_scored(rng, 500);
  std::size_t total = 0;
  for (const auto& b : uncertainty_bins(s, 7)) total += b.count;
  CHECK(total == 500);

  // u = 1 lands in the right-closed last bin
  ScoredSet half = make_scored({0.5, 0.5}, {1, 0});
  const auto edge = uncertainty_bins(half, 10);
  CHECK(edge[9].count == 2);
  CHECK(edge[9].positive_rate == 0.5);
  CHECK_THROWS_AS(uncertainty_bins(half, 0), std::runtime_error);
}

TEST_CASE("bin accuracy and positive rate are exact ratios") {
  // u(0.9) = u(0.1) ~ 0.469: both land in the same bin
  ScoredSet s = make_scored({0.9, 0.1, 0.1, 0.1}, {1, 1, 0, 0});
  const auto bins = uncertainty_bins(s, 2);
  CHECK(bins[0].count == 4);
  CHECK(bins[0].accuracy == 0.75);       // the y=1 at p=0.1 is wrong
  CHECK(bins[0].positive_rate == 0.5);
}

TEST_CASE("retained-cohort auprc curve") {
  Rng rng(22);
  const ScoredSet s = random_scored(rng, 180);
  const std::vector<double> fr{1.0};
  const auto full = retained_auprc_curve(s, fr);
  CHECK(full[0].defined);
  CHECK(full[0].value == doctest::Approx(auprc(s)).epsilon(1e-15));

  // tiny retained fraction with only confident negatives -> undefined
  ScoredSet skew = make_scored({0.001, 0.002, 0.5, 0.6}, {0, 0, 1, 0});
  const std::vector<double> small{0.25};
  const auto undef = retained_auprc_curve(skew, small);
  CHECK_FALSE(undef[0].defined);
  CHECK(std::isnan(undef[0].value));

  // permuting the rows leaves the curve unchanged (tie-free uncertainties)
  std::vector<std::size_t> perm(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) perm[i] = (i * 37 + 11) % s.n();
  std::vector<double> pp(s.n());
  std::vector<int> pl(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) {
    pp[i] = s.prob[perm[i]];
    pl[i] = s.label[perm[i]];
  }
  const ScoredSet shuffled = make_scored(pp, pl);
  const std::vector<double> grid{0.2, 0.5, 0.8, 1.0};
  const auto a = retained_auprc_curve(s, grid);
  const auto b = retained_auprc_curve(shuffled, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a[i].defined == b[i].defined);
    if (a[i].defined) CHECK(a[i].value == doctest::Approx(b[i].value).epsilon(1e-12));
  }
  CHECK_THROWS_AS(retained_auprc_curve(s, std::vector<double>{0.0}),
                  std::runtime_error);
}

TEST_CASE("workload-safety curve counts missed positives in the automated set") {
  ScoredSet s = make_scored({0.01, 0.02, 0.3, 0.9}, {0, 1, 1, 1});
  const std::vector<double> fr{0.0, 1.0};
  const auto curve = workload_safety_curve(s, fr);
  CHECK(curve[0].value == 0.0);  // nothing automated
  // full automation: positives with p < 0.5 are samples 1 and 2
  CHECK(curve[1].value == doctest::Approx(1000.0 * 2.0 / 4.0).epsilon(1e-12));

  Rng rng(33);
  for (int rep = 0; rep < 20; ++rep) {
    const ScoredSet r = random_scored(rng, 120);
    std::vector<double> grid;
    for (double f = 0.0; f <= 1.0; f += 0.05) grid.push_back(f);
    const auto c = workload_safety_curve(r, grid);
    for (std::size_t i = 1; i < c.size(); ++i) {
      CHECK(c[i].value >= c[i - 1].value);  // automated set only grows
    }
  }
}

TEST_CASE("false reassurance rate counts confident low-risk positives") {
  // 10 positives; exactly 2 sit in the safe region u < 0.1 and p < 0.1
  std::vector<double> prob;
  std::vector<int> label;
  for (int i = 0; i < 2; ++i) {
    prob.push_back(0.001);  // u(0.001) ~ 0.016 < 0.1
    label.push_back(1);
  }
  for (int i = 0; i < 8; ++i) {
    prob.push_back(0.4);
    label.push_back(1);
  }
  for (int i = 0; i < 30; ++i) {
    prob.push_back(0.05);
    label.push_back(0);
  }
  const ScoredSet s = make_scored(prob, label);
  CHECK(false_reassurance_rate(s, 0.1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(false_reassurance_rate(s, 0.0) == 0.0);  // strict inequalities

  Rng rng(44);
  for (int rep = 0; rep < 20; ++rep) {
    const ScoredSet r = random_scored(rng, 150);
    double prev = 0.0;
    for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
      const double v = false_reassurance_rate(r, tau);
      CHECK(v >= prev);
      prev = v;
    }
  }
  const ScoredSet none = make_scored({0.2, 0.3}, {0, 0});
  CHECK_THROWS_AS(false_reassurance_rate(none, 0.1), std::runtime_error);
}

TEST_CASE("frr sweep covers the three reported thresholds") {
  Rng rng(55);
  const ScoredSet s = random_scored(rng, 100);
  const auto sweep = frr_sweep(s);
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].first == 0.05);
  CHECK(sweep[1].first == 0.10);
  CHECK(sweep[2].first == 0.15);
  CHECK(sweep[0].second <= sweep[1].second);
  CHECK(sweep[1].second <= sweep[2].second);
}

TEST_CASE("scored-set consistency check") {
  ScoredSet s = make_scored({0.3, 0.8}, {0, 1});
  check_consistency(s);
  s.uncertainty[0] += 1e-3;
  CHECK_THROWS_AS(check_consistency(s), std::runtime_error);
  CHECK_THROWS_AS(make_scored({0.0}, {0}), std::runtime_error);
  CHECK_THROWS_AS(make_scored({0.5}, {2}), std::runtime_error);
}

TEST_CASE("evaluate assembles the full report") {
  Rng rng(66);
  ScoredSet s = random_scored(rng, 300);
  s.method = "cura";
  s.fold = "fold0";
  const EvalReport r = evaluate(s);
  CHECK(r.method == "cura");
  CHECK(r.auroc >= 0.0);
  CHECK(r.auroc <= 1.0);
  CHECK(r.auprc >= 0.0);
  CHECK(r.brier >= 0.0);
  CHECK(r.brier <= 1.0);
  CHECK(r.aurc >= 0.0);
  CHECK(r.aurc <= 1.0);
  CHECK(r.frr.size() == 3);
  CHECK(r.risk_coverage.size() == 100);
  CHECK(r.bins.size() == 10);
  CHECK(r.retained_auprc.size() == 10);
  CHECK(r.workload_safety.size() == 20);
  CHECK(r.risk_coverage.back().x == 1.0);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    errors += (s.prob[i] >= 0.5 ? 1 : 0) != s.label[i];
  }
  CHECK(r.risk_coverage.back().value ==
        doctest::Approx(static_cast<double>(errors) / s.n()).epsilon(1e-12));
}

TEST_CASE("aggregation: identical folds have zero spread, means are exact") {
  Rng rng(77);
  ScoredSet s = random_scored(rng, 200);
  s.method = "m";
  EvalReport r = evaluate(s);
  std::vector<EvalReport> folds{r, r, r};
  const AggregateReport agg = aggregate_reports(folds);
  CHECK(agg.n_folds == 3);
  CHECK(agg.auroc_mean == doctest::Approx(r.auroc).epsilon(1e-15));
  CHECK(agg.auroc_sd == 0.0);
  CHECK(agg.brier_sd == 0.0);
  CHECK(agg.nll_sd == 0.0);

  EvalReport r2 = r;
  r2.auroc = r.auroc / 2.0;
  std::vector<EvalReport> two{r, r2};
  const AggregateReport mixed = aggregate_reports(two);
  CHECK(mixed.auroc_mean ==
        doctest::Approx((r.auroc + r2.auroc) / 2.0).epsilon(1e-15));
}

TEST_CASE("curve csv emitters use nan markers for undefined cells") {
  std::vector<CurvePoint> curve{{0.1, 0.5, true}, {0.2, 0.0, false}};
  const std::string csv = retained_auprc_to_csv(curve);
  CHECK(csv == "fraction,auprc\n0.1,0.5\n0.2,nan\n");
  std::vector<UncertaintyBin> bins{{0.0, 0.5, 0, 0.0, 0.0}};
  bins[0].accuracy = std::nan("");
  CHECK(bins_to_csv(bins).find(",nan,nan") != std::string::npos);
}

TEST_CASE("report json carries nulls for undefined values") {
  ScoredSet skew = make_scored({0.001, 0.002, 0.6, 0.5}, {0, 0, 1, 0});
  EvalOptions opts;
  opts.retained_fractions = {0.25, 1.0};
  const EvalReport r = evaluate(skew, opts);
  const std::string js = report_to_json(r);
  CHECK(js.find("\"auprc\": null") != std::string::npos);
}
