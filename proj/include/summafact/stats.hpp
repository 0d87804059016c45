#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "summafact/metrics.hpp"

namespace summafact {

struct PairedSample {
  std::string metric;
  std::vector<double> before;
  std::vector<double> after;
  std::vector<std::pair<std::string, std::string>> pairing;  // (article_id, method)
};

struct TestResult {
  std::string metric;
  double mean_before = 0.0;
  double mean_after = 0.0;
  double t_stat = 0.0;
  int df = 0;
  double p_value = 1.0;       // one-sided, H1: mean(after) > mean(before)
  double p_other_side = 0.0;  // the opposite one-sided p, kept as a diagnostic
  std::pair<double, double> ci95{0.0, 0.0};  // two-sided 95% CI for mean(before - after)
  bool reject_null = false;   // p_value < alpha
  bool degenerate = false;    // all differences identical (sd = 0)
  std::size_t n = 0;
};

struct FitResult {
  double r = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Lower-tail CDF of Student's t with `df` degrees of freedom, computed via
/// the regularized incomplete beta function.
double student_t_cdf(double t, int df);

/// Inverse of student_t_cdf (bisection).
double student_t_quantile(double p, int df);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double x, double a, double b);

/// Paired one-sided t-test on d_i = before_i - after_i. Small p means the
/// "after" scores are larger. sd(d)=0 short-circuits: p is 0, 1 or 0.5 by
/// the sign of mean(d), flagged degenerate.
TestResult paired_t_test(const PairedSample& sample, double alpha = 0.05);

double pearson_r(std::span<const double> x, std::span<const double> y);

/// Ordinary least squares y = slope*x + intercept, r from pearson_r.
FitResult linear_fit(std::span<const double> x, std::span<const double> y);

struct TableDiagnostics {
  std::size_t dropped_unmatched = 0;
  std::vector<std::string> omitted_metrics;  // fewer than 2 complete pairs
};

/// Matches unrefined/refined scorecards per (article_id, method, metric)
/// and runs one paired test per metric, in table order.
std::vector<TestResult> build_table(const std::vector<ScoreCard>& scorecards,
                                    TableDiagnostics* diagnostics = nullptr, double alpha = 0.05);

/// CSV rows matching the published table layout:
/// metric,avg_before,avg_after,p_value,ci_low,ci_high,reject_null
std::string test_table_csv(const std::vector<TestResult>& table);

}  // namespace summafact
