#include <doctest.h>

#include <random>

#include "summafact/errors.hpp"
#include "summafact/stats.hpp"
#include "oracles.hpp"

using namespace summafact;

TEST_CASE("worked example: strong improvement across three pairs") {
  PairedSample sample;
  sample.metric = "demo";
  sample.before = {0.1, 0.2, 0.3};
  sample.after = {0.2, 0.4, 0.5};
  TestResult r = paired_t_test(sample);

  CHECK(r.t_stat == doctest::Approx(-5.0).epsilon(1e-6));
  CHECK(r.df == 2);
  CHECK(std::fabs(r.p_value - 0.0189) < 1e-4);
  CHECK(r.reject_null);
  CHECK(r.mean_before == doctest::Approx(0.2));
  CHECK(r.mean_after == doctest::Approx(11.0 / 30.0));
  CHECK(r.ci95.first < r.ci95.second);
  CHECK(r.ci95.second < 0.0);  // improvement shows as a negative interval
}

TEST_CASE("identical pairs hit the degenerate zero-difference rule") {
  PairedSample sample;
  sample.metric = "demo";
  sample.before = {0.4, 0.6, 0.8};
  sample.after = {0.4, 0.6, 0.8};
  TestResult r = paired_t_test(sample);
  CHECK(r.degenerate);
  CHECK(r.t_stat == 0.0);
  CHECK(r.p_value == 0.5);
  CHECK_FALSE(r.reject_null);
}

TEST_CASE("constant positive difference is degenerate anti-improvement") {
  PairedSample sample;
  sample.metric = "demo";
  sample.before = {0.5, 0.5};
  sample.after = {0.4, 0.4};
  TestResult r = paired_t_test(sample);
  CHECK(r.degenerate);
  CHECK(r.p_value == 1.0);
  CHECK_FALSE(r.reject_null);
  CHECK(r.ci95.first == doctest::Approx(0.1));
  CHECK(r.ci95.second == doctest::Approx(0.1));
}

TEST_CASE("constant negative difference is degenerate improvement") {
  PairedSample sample;
  sample.metric = "demo";
  sample.before = {0.4, 0.4};
  sample.after = {0.5, 0.5};
  TestResult r = paired_t_test(sample);
  CHECK(r.degenerate);
  CHECK(r.p_value == 0.0);
  CHECK(r.reject_null);
}

TEST_CASE("paired test validates inputs") {
  PairedSample one;
  one.before = {0.1};
  one.after = {0.2};
  CHECK_THROWS_AS(paired_t_test(one), Error);

  PairedSample mismatched;
  mismatched.before = {0.1, 0.2};
  mismatched.after = {0.2};
  CHECK_THROWS_AS(paired_t_test(mismatched), Error);
}

TEST_CASE("one-sided p values of the two directions sum to one") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int round = 0; round < 30; ++round) {
    std::size_t n = 3 + (round % 10);
    PairedSample fwd;
    PairedSample rev;
    for (std::size_t i = 0; i < n; ++i) {
      double b = unit(rng);
      double a = unit(rng);
      fwd.before.push_back(b);
      fwd.after.push_back(a);
      rev.before.push_back(a);
      rev.after.push_back(b);
    }
    TestResult f = paired_t_test(fwd);
    if (f.degenerate) continue;
    TestResult r = paired_t_test(rev);
    CHECK(f.p_value + r.p_value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.p_other_side == doctest::Approx(r.p_value).epsilon(1e-12));
  }
}

TEST_CASE("t statistic is scale equivariant") {
  PairedSample base;
  base.before = {0.11, 0.33, 0.27, 0.4};
  base.after = {0.25, 0.4, 0.31, 0.52};
  TestResult r1 = paired_t_test(base);

  PairedSample scaled;
  for (double v : base.before) scaled.before.push_back(v * 0.37);
  for (double v : base.after) scaled.after.push_back(v * 0.37);
  TestResult r2 = paired_t_test(scaled);

  CHECK(r1.t_stat == doctest::Approx(r2.t_stat).epsilon(1e-12));
  CHECK(r1.p_value == doctest::Approx(r2.p_value).epsilon(1e-12));
  CHECK(r1.reject_null == r2.reject_null);
}

TEST_CASE("pearson examples") {
  std::vector<double> x = {1, 2, 3};
  std::vector<double> y = {2, 4, 6};
  CHECK(pearson_r(x, y) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> y2 = {3, 2, 1};
  CHECK(pearson_r(x, y2) == doctest::Approx(-1.0).epsilon(1e-12));

  std::vector<double> x3 = {1, 2, 3, 4};
  std::vector<double> y3 = {1, 3, 2, 4};
  CHECK(pearson_r(x3, y3) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("pearson rejects constant series") {
  std::vector<double> x = {1, 1, 1};
  std::vector<double> y = {1, 2, 3};
  CHECK_THROWS_WITH_AS(pearson_r(x, y), doctest::Contains("constant_series"), Error);
}

TEST_CASE("pearson is invariant under positive affine transforms") {
  std::vector<double> x = {0.2, 0.5, 0.9, 0.4, 0.7};
  std::vector<double> y = {0.1, 0.6, 0.8, 0.3, 0.9};
  double base = pearson_r(x, y);
  std::vector<double> xt;
  for (double v : x) xt.push_back(3.5 * v + 11.0);
  CHECK(pearson_r(xt, y) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("linear fit examples") {
  std::vector<double> x1 = {0.0, 1.0};
  std::vector<double> y1 = {0.17, 1.0};
  FitResult two_points = linear_fit(x1, y1);
  CHECK(two_points.slope == doctest::Approx(0.83).epsilon(1e-12));
  CHECK(two_points.intercept == doctest::Approx(0.17).epsilon(1e-12));

  std::vector<double> x2 = {1, 2, 3};
  FitResult identity = linear_fit(x2, x2);
  CHECK(identity.slope == doctest::Approx(1.0));
  CHECK(identity.intercept == doctest::Approx(0.0));
  CHECK(identity.r == doctest::Approx(1.0));

  std::vector<double> x3 = {0, 1, 2};
  std::vector<double> y3 = {0, 1, 1};
  FitResult three = linear_fit(x3, y3);
  CHECK(three.slope == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(three.intercept == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("t distribution matches the quadrature oracle") {
  for (int df : {1, 2, 3, 5, 10, 29}) {
    for (double t : {-6.0, -2.5, -0.7, 0.0, 0.3, 1.96, 4.0}) {
      double ours = student_t_cdf(t, df);
      double ref = oracles::t_cdf(t, df);
      CHECK(oracles::close_rel(ours, ref, 1e-9));
    }
  }
  // frozen spot value
  CHECK(student_t_cdf(-5.0, 2) == doctest::Approx(0.0188747757).epsilon(1e-8));
}

TEST_CASE("quantile inverts the cdf") {
  for (int df : {2, 5, 17}) {
    for (double p : {0.025, 0.1, 0.5, 0.9, 0.975}) {
      double q = student_t_quantile(p, df);
      CHECK(student_t_cdf(q, df) == doctest::Approx(p).epsilon(1e-9));
    }
  }
}

TEST_CASE("build_table pairs scorecards per metric") {
  std::vector<ScoreCard> cards;
  for (int i = 0; i < 3; ++i) {
    ScoreCard before;
    before.article_id = "a" + std::to_string(i);
    before.method = Method::abstractive;
    before.stage = Stage::unrefined;
    ScoreCard after = before;
    after.stage = Stage::refined;
    for (const auto& name : metric_names()) {
      before.scores[name] = 0.3 + 0.1 * i;
      after.scores[name] = 0.5 + 0.1 * i;
    }
    cards.push_back(before);
    cards.push_back(after);
  }
  TableDiagnostics diag;
  auto table = build_table(cards, &diag);
  CHECK(table.size() == 7);  // one row per metric
  CHECK(diag.dropped_unmatched == 0);
  CHECK(diag.omitted_metrics.empty());
  for (const auto& row : table) {
    CHECK(row.n == 3);
    CHECK(row.mean_after > row.mean_before);
  }
}

TEST_CASE("build_table drops unmatched rows with a diagnostic count") {
  std::vector<ScoreCard> cards;
  for (int i = 0; i < 3; ++i) {
    ScoreCard before;
    before.article_id = "a" + std::to_string(i);
    before.method = Method::hybrid;
    before.stage = Stage::unrefined;
    before.scores["gpt"] = 0.4;
    ScoreCard after = before;
    after.stage = Stage::refined;
    after.scores["gpt"] = 0.9;
    if (i == 2) after.scores.erase("gpt");  // deliberate gap
    cards.push_back(before);
    cards.push_back(after);
  }
  TableDiagnostics diag;
  auto table = build_table(cards, &diag);
  REQUIRE(table.size() == 1);
  CHECK(table[0].n == 2);
  CHECK(diag.dropped_unmatched == 1);
}

TEST_CASE("build_table omits metrics with fewer than two pairs") {
  std::vector<ScoreCard> cards;
  ScoreCard solo;
  solo.article_id = "a0";
  solo.method = Method::extractive;
  solo.stage = Stage::unrefined;
  solo.scores["rouge1"] = 0.5;
  cards.push_back(solo);

  TableDiagnostics diag;
  auto table = build_table(cards, &diag);
  CHECK(table.empty());
  REQUIRE(diag.omitted_metrics.size() == 1);
  CHECK(diag.omitted_metrics[0] == "rouge1");
}

TEST_CASE("csv header matches the published table layout") {
  auto csv = test_table_csv({});
  CHECK(csv == "metric,avg_before,avg_after,p_value,ci_low,ci_high,reject_null\n");
}

TEST_CASE("random samples agree with the reference implementation") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> size(3, 30);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::normal_distribution<double> noise(0.0, 0.06);

  int done = 0;
  while (done < 40) {
    std::size_t n = size(rng);
    PairedSample sample;
    for (std::size_t i = 0; i < n; ++i) {
      double b = unit(rng);
      sample.before.push_back(b);
      sample.after.push_back(std::clamp(b + 0.05 + noise(rng), 0.0, 1.0));
    }
    TestResult ours = paired_t_test(sample);
    if (ours.degenerate || std::fabs(ours.t_stat) > 6.0) continue;
    ++done;

    // sign coherence: improvement iff the CI midpoint is negative
    double midpoint = (ours.ci95.first + ours.ci95.second) / 2.0;
    CHECK((ours.mean_after > ours.mean_before) == (midpoint < 0.0));

    auto ref = oracles::ref_paired_test(sample.before, sample.after);
    CHECK(oracles::close_rel(ours.t_stat, ref.t, 1e-6));
    CHECK(oracles::close_rel(ours.p_value, ref.p, 1e-6));
    CHECK(oracles::close_rel(ours.ci95.first, ref.ci_low, 1e-6));
    CHECK(oracles::close_rel(ours.ci95.second, ref.ci_high, 1e-6));

    auto fit = linear_fit(sample.before, sample.after);
    auto rfit = oracles::ref_fit(sample.before, sample.after);
    CHECK(oracles::close_rel(fit.r, rfit.r, 1e-6));
    CHECK(oracles::close_rel(fit.slope, rfit.slope, 1e-6));
    CHECK(oracles::close_rel(fit.intercept, rfit.intercept, 1e-6));
    CHECK(oracles::close_rel(pearson_r(sample.before, sample.after), rfit.r, 1e-6));
  }
}
