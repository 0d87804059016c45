#include "summafact/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "summafact/errors.hpp"
#include "summafact/util.hpp"

namespace summafact {

// ---------------------------------------------------------------------------
// Student's t distribution via the regularized incomplete beta function
// ---------------------------------------------------------------------------

namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Lentz's continued fraction for I_x(a, b)
double incomplete_beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;

  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw Error(ErrorKind::computation, "incomplete beta requires a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * incomplete_beta_cf(x, a, b) / a;
  return 1.0 - std::exp(b * std::log(1.0 - x) + a * std::log(x) - log_beta(a, b)) *
                   incomplete_beta_cf(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, int df) {
  if (df < 1) throw Error(ErrorKind::computation, "degrees of freedom must be >= 1");
  if (t == 0.0) return 0.5;
  double v = static_cast<double>(df);
  double x = v / (v + t * t);
  double tail = 0.5 * regularized_incomplete_beta(x, v / 2.0, 0.5);
  return (t > 0.0) ? 1.0 - tail : tail;
}

double student_t_quantile(double p, int df) {
  if (p <= 0.0 || p >= 1.0)
    throw Error(ErrorKind::computation, "quantile requires p in (0, 1)");
  if (p == 0.5) return 0.0;
  double lo = -1.0;
  double hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * std::max(1.0, std::fabs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Paired t-test
// ---------------------------------------------------------------------------

TestResult paired_t_test(const PairedSample& sample, double alpha) {
  const std::size_t n = sample.before.size();
  if (sample.after.size() != n)
    throw Error(ErrorKind::validation, "before/after lengths differ for " + sample.metric);
  if (!sample.pairing.empty() && sample.pairing.size() != n)
    throw Error(ErrorKind::validation, "pairing length differs for " + sample.metric);
  if (n < 2) throw Error(ErrorKind::precondition, "paired test needs at least 2 pairs");

  TestResult result;
  result.metric = sample.metric;
  result.n = n;
  result.df = static_cast<int>(n) - 1;

  double sum_before = 0.0;
  double sum_after = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_before += sample.before[i];
    sum_after += sample.after[i];
  }
  result.mean_before = sum_before / static_cast<double>(n);
  result.mean_after = sum_after / static_cast<double>(n);

  // differences d_i = before_i - after_i; improvement shows as mean(d) < 0
  double mean_d = result.mean_before - result.mean_after;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = (sample.before[i] - sample.after[i]) - mean_d;
    ss += d * d;
  }
  double var_d = ss / static_cast<double>(n - 1);
  double sd_d = std::sqrt(var_d);

  if (sd_d == 0.0) {
    result.degenerate = true;
    if (mean_d < 0.0) {
      result.t_stat = -std::numeric_limits<double>::infinity();
      result.p_value = 0.0;
    } else if (mean_d > 0.0) {
      result.t_stat = std::numeric_limits<double>::infinity();
      result.p_value = 1.0;
    } else {
      result.t_stat = 0.0;
      result.p_value = 0.5;
    }
    result.p_other_side = 1.0 - result.p_value;
    result.ci95 = {mean_d, mean_d};
    result.reject_null = result.p_value < alpha;
    return result;
  }

  double se = sd_d / std::sqrt(static_cast<double>(n));
  result.t_stat = mean_d / se;
  result.p_value = student_t_cdf(result.t_stat, result.df);
  result.p_other_side = 1.0 - result.p_value;

  double t_crit = student_t_quantile(0.975, result.df);
  result.ci95 = {mean_d - t_crit * se, mean_d + t_crit * se};
  result.reject_null = result.p_value < alpha;
  return result;
}

// ---------------------------------------------------------------------------
// Correlation and least squares
// ---------------------------------------------------------------------------

namespace {

struct CenteredSums {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
};

CenteredSums centered_sums(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorKind::validation, "series lengths differ");
  if (x.size() < 2) throw Error(ErrorKind::precondition, "need at least 2 points");
  CenteredSums s;
  const double n = static_cast<double>(x.size());
  for (double v : x) s.mean_x += v;
  for (double v : y) s.mean_y += v;
  s.mean_x /= n;
  s.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - s.mean_x;
    double dy = y[i] - s.mean_y;
    s.sxx += dx * dx;
    s.syy += dy * dy;
    s.sxy += dx * dy;
  }
  if (s.sxx == 0.0 || s.syy == 0.0)
    throw Error(ErrorKind::computation, "constant_series: zero variance");
  return s;
}

}  // namespace

double pearson_r(std::span<const double> x, std::span<const double> y) {
  CenteredSums s = centered_sums(x, y);
  return std::clamp(s.sxy / std::sqrt(s.sxx * s.syy), -1.0, 1.0);
}

FitResult linear_fit(std::span<const double> x, std::span<const double> y) {
  CenteredSums s = centered_sums(x, y);
  FitResult fit;
  fit.slope = s.sxy / s.sxx;
  fit.intercept = s.mean_y - fit.slope * s.mean_x;
  fit.r = std::clamp(s.sxy / std::sqrt(s.sxx * s.syy), -1.0, 1.0);
  return fit;
}

// ---------------------------------------------------------------------------
// Table construction
// ---------------------------------------------------------------------------

std::vector<TestResult> build_table(const std::vector<ScoreCard>& scorecards,
                                    TableDiagnostics* diagnostics, double alpha) {
  // (article, method) -> stage -> card scores
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::map<Stage, const ScoreCard*>> grouped;
  for (const auto& card : scorecards)
    grouped[{card.article_id, to_string(card.method)}][card.stage] = &card;

  TableDiagnostics local;
  TableDiagnostics& diag = diagnostics ? *diagnostics : local;

  std::vector<TestResult> table;
  for (const auto& metric : metric_names()) {
    PairedSample sample;
    sample.metric = metric;
    bool seen_anywhere = false;
    for (const auto& card : scorecards)
      if (card.scores.count(metric) > 0) {
        seen_anywhere = true;
        break;
      }
    if (!seen_anywhere) continue;
    for (const auto& [key, stages] : grouped) {
      auto before_it = stages.find(Stage::unrefined);
      auto after_it = stages.find(Stage::refined);
      const double* before_score = nullptr;
      const double* after_score = nullptr;
      if (before_it != stages.end()) {
        auto it = before_it->second->scores.find(metric);
        if (it != before_it->second->scores.end()) before_score = &it->second;
      }
      if (after_it != stages.end()) {
        auto it = after_it->second->scores.find(metric);
        if (it != after_it->second->scores.end()) after_score = &it->second;
      }
      if (before_score && after_score) {
        sample.before.push_back(*before_score);
        sample.after.push_back(*after_score);
        sample.pairing.emplace_back(key.first, key.second);
      } else if (before_score || after_score) {
        diag.dropped_unmatched += 1;
      }
    }
    if (sample.before.size() < 2) {
      diag.omitted_metrics.push_back(metric);
      continue;
    }
    table.push_back(paired_t_test(sample, alpha));
  }
  return table;
}

std::string test_table_csv(const std::vector<TestResult>& table) {
  std::string csv = "metric,avg_before,avg_after,p_value,ci_low,ci_high,reject_null\n";
  for (const auto& row : table) {
    csv += row.metric;
    csv += ',';
    csv += format_fixed(row.mean_before);
    csv += ',';
    csv += format_fixed(row.mean_after);
    csv += ',';
    csv += format_fixed(row.p_value);
    csv += ',';
    csv += format_fixed(row.ci95.first);
    csv += ',';
    csv += format_fixed(row.ci95.second);
    csv += ',';
    csv += row.reject_null ? "yes" : "no";
    csv += '\n';
  }
  return csv;
}

}  // namespace summafact
