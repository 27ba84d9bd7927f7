#include "mfuq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfuq/errors.hpp"

namespace mfuq {

SampleMoments sample_moments(std::span<const double> values) {
  const std::int64_t n = static_cast<std::int64_t>(values.size());
  if (n < 2) {
    throw InsufficientDataError("sample_moments: need at least 2 values");
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ssq = 0.0;
  for (double v : values) {
    const double d = v - mean;
    ssq += d * d;
  }
  return {n, mean, ssq / static_cast<double>(n - 1)};
}

double sample_correlation(std::span<const double> x,
                          std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DomainError("sample_correlation: length mismatch");
  }
  const std::size_t n = x.size();
  if (n < 2) {
    throw InsufficientDataError("sample_correlation: need at least 2 pairs");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateDataError("sample_correlation: zero variance sequence");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Phi(x) via the complementary error function.
double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0x1.6a09e667f3bcdp-1);  // x / sqrt(2)
}

// Rational initial guess for the inverse normal CDF (Acklam), then one
// Halley refinement against erfc, giving near machine precision.
double icdf_initial(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

constexpr double kSqrt2Pi = 2.506628274631000502;

}  // namespace

double standard_normal_icdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("standard_normal_icdf: p must lie in (0, 1)");
  }
  double x = icdf_initial(p);
  // Halley refinement: e = Phi(x) - p, u = e / phi(x).
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double normal_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("normal_quantile: alpha must lie in (0, 1)");
  }
  return standard_normal_icdf(1.0 - alpha);
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
  constexpr double kFpMin = 1e-300;
  constexpr double kEps = 3e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw SolverError("regularized_incomplete_beta: continued fraction failed");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError("regularized_incomplete_beta: a, b must be positive");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("regularized_incomplete_beta: x must lie in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

namespace {

// Upper tail P(T > t) for t >= 0.
double t_upper_tail(double t, double df) {
  const double x = df / (df + t * t);
  return 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
}

double t_log_pdf(double t, double df) {
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * 3.14159265358979323846) -
         0.5 * (df + 1.0) * std::log1p(t * t / df);
}

}  // namespace

double t_quantile(double alpha, std::int64_t df) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("t_quantile: alpha must lie in (0, 1)");
  }
  if (df < 1) throw DomainError("t_quantile: df must be >= 1");
  if (alpha == 0.5) return 0.0;
  if (alpha > 0.5) return -t_quantile(1.0 - alpha, df);

  const double nu = static_cast<double>(df);
  // Bracket the root of P(T > t) = alpha, then refine by safeguarded Newton.
  double lo = 0.0;
  double hi = std::max(2.0 * normal_quantile(alpha), 2.0);
  while (t_upper_tail(hi, nu) > alpha) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw SolverError("t_quantile: bracketing failed");
  }
  double t = std::min(std::max(normal_quantile(alpha), lo), hi);
  for (int it = 0; it < 100; ++it) {
    const double f = t_upper_tail(t, nu) - alpha;
    if (f > 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    const double step = f * std::exp(-t_log_pdf(t, nu));
    double next = t + step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - t) <= 1e-12 * (1.0 + std::fabs(t))) return next;
    t = next;
  }
  return t;
}

}  // namespace mfuq
