#pragma once

// Student-t distribution, one-sample and Welch t-tests, per-position
// summaries. Tests are two-sided.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "planprobe/error.hpp"

namespace planprobe::stats {

namespace detail {

// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 20000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b). `one_minus_x` is passed separately
/// so callers can supply it without cancellation.
inline double incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameterError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, one_minus_x) / b;
}

inline double incomplete_beta(double a, double b, double x) {
  return incomplete_beta(a, b, x, 1.0 - x);
}

/// Student-t CDF.
inline double t_cdf(double t, double df) {
  if (!(df > 0.0) || std::isnan(df)) throw InvalidParameterError("degrees of freedom must be > 0");
  if (std::isnan(t)) throw InvalidParameterError("t is NaN");
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double one_minus_x = t2 / (df + t2);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x, one_minus_x);
  return t > 0.0 ? 1.0 - tail : tail;
}

/// Two-sided p-value for statistic t.
inline double two_sided_p(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  return std::min(1.0, 2.0 * t_cdf(-std::abs(t), df));
}

/// Inverse CDF by bracketing and bisection.
inline double t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameterError("quantile probability must be in (0,1)");
  if (p == 0.5) return 0.0;
  double lo = -1.0;
  double hi = 1.0;
  while (t_cdf(lo, df) > p) lo *= 2.0;
  while (t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

enum class TestKind { one_sample, welch_two_sample };

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  TestKind kind = TestKind::one_sample;
};

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // n - 1 denominator
};

inline Moments moments(std::span<const double> values) {
  Moments m;
  m.n = values.size();
  if (m.n == 0) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(m.n);
  if (m.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.variance = ss / static_cast<double>(m.n - 1);
  }
  return m;
}

inline TTestResult one_sample_ttest(std::span<const double> values, double mu0) {
  if (values.size() < 2) throw InvalidDataError("one-sample t-test needs at least 2 values");
  const auto m = moments(values);
  if (!(m.variance > 0.0)) throw DegenerateDataError("one-sample t-test: zero variance");
  TTestResult r;
  r.kind = TestKind::one_sample;
  r.t_statistic = (m.mean - mu0) / std::sqrt(m.variance / static_cast<double>(m.n));
  r.degrees_of_freedom = static_cast<double>(m.n - 1);
  r.p_value = two_sided_p(r.t_statistic, r.degrees_of_freedom);
  return r;
}

/// Welch statistic with Welch-Satterthwaite degrees of freedom.
inline TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidDataError("Welch t-test needs n >= 2 per group");
  const auto ma = moments(a);
  const auto mb = moments(b);
  const double sa = ma.variance / static_cast<double>(ma.n);
  const double sb = mb.variance / static_cast<double>(mb.n);
  if (!(sa + sb > 0.0)) throw DegenerateDataError("Welch t-test: both groups have zero variance");
  TTestResult r;
  r.kind = TestKind::welch_two_sample;
  r.t_statistic = (ma.mean - mb.mean) / std::sqrt(sa + sb);
  r.degrees_of_freedom = (sa + sb) * (sa + sb) /
                         (sa * sa / static_cast<double>(ma.n - 1) +
                          sb * sb / static_cast<double>(mb.n - 1));
  r.p_value = two_sided_p(r.t_statistic, r.degrees_of_freedom);
  return r;
}

struct PositionSummary {
  std::size_t position = 0;  // 1-based
  double mean = 0.0;
  double std_error = 0.0;  // NaN when n == 1
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::size_t n = 0;
  bool ragged = false;  // fewer sequences reach this position than were given
};

/// Per-position mean, standard error and exact-t 95% interval over a set of
/// sequences of possibly different lengths.
inline std::vector<PositionSummary> summarize_positions(
    const std::vector<std::vector<double>>& sequences) {
  if (sequences.empty()) throw InvalidDataError("no sequences to summarize");
  std::size_t longest = 0;
  for (const auto& s : sequences) longest = std::max(longest, s.size());
  if (longest == 0) throw InvalidDataError("all sequences are empty");
  std::vector<PositionSummary> out;
  std::vector<double> column;
  for (std::size_t pos = 0; pos < longest; ++pos) {
    column.clear();
    for (const auto& s : sequences)
      if (pos < s.size()) column.push_back(s[pos]);
    const auto m = moments(column);
    PositionSummary ps;
    ps.position = pos + 1;
    ps.n = m.n;
    ps.mean = m.mean;
    ps.ragged = m.n < sequences.size();
    if (m.n > 1) {
      ps.std_error = std::sqrt(m.variance / static_cast<double>(m.n));
      const double crit = t_quantile(0.975, static_cast<double>(m.n - 1));
      ps.ci95_low = m.mean - crit * ps.std_error;
      ps.ci95_high = m.mean + crit * ps.std_error;
    } else {
      ps.std_error = std::numeric_limits<double>::quiet_NaN();
      ps.ci95_low = ps.ci95_high = m.mean;
    }
    out.push_back(ps);
  }
  return out;
}

}  // namespace planprobe::stats
