#include "mfuq/cost_policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "mfuq/errors.hpp"
#include "mfuq/estimators.hpp"

namespace mfuq {

void validate(const CostModel& cost) {
  if (!(cost.g > 0.0)) throw DomainError("CostModel: g must be positive");
  if (!(cost.w0 > 0.0)) throw DomainError("CostModel: w0 must be positive");
  if (cost.w1 < 0.0) throw DomainError("CostModel: w1 must be nonnegative");
}

void validate(const TrendCoefficients& coeffs) {
  if (!(coeffs.zeta > 0.0)) {
    throw DomainError("TrendCoefficients: zeta must be positive");
  }
  if (coeffs.c1 < 0.0 || coeffs.c2 < 0.0 || coeffs.c3 < 0.0 ||
      coeffs.c4 < 0.0) {
    throw DomainError("TrendCoefficients: c1..c4 must be nonnegative");
  }
}

namespace {

struct Line2Fit {
  double a = 0.0;  // coefficient on x
  double b = 0.0;  // intercept
  double rss = 0.0;
};

double rss_of(std::span<const double> x, std::span<const double> y, double a,
              double b) {
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - a * x[i] - b;
    rss += r * r;
  }
  return rss;
}

// Least squares for y ~ a x + b subject to a, b >= 0. With two free
// parameters the constrained optimum is either the unconstrained solution
// or a boundary refit, so comparing the three candidates is exact.
Line2Fit nonnegative_line_fit(std::span<const double> x,
                              std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  std::vector<Line2Fit> candidates;
  const double det = n * sxx - sx * sx;
  if (std::fabs(det) > 1e-14 * std::max(1.0, n * sxx)) {
    const double a = (n * sxy - sx * sy) / det;
    const double b = (sy * sxx - sx * sxy) / det;
    if (a >= 0.0 && b >= 0.0) candidates.push_back({a, b, 0.0});
  }
  if (sxx > 0.0) candidates.push_back({std::max(0.0, sxy / sxx), 0.0, 0.0});
  candidates.push_back({0.0, std::max(0.0, sy / n), 0.0});
  for (auto& c : candidates) c.rss = rss_of(x, y, c.a, c.b);
  return *std::min_element(
      candidates.begin(), candidates.end(),
      [](const Line2Fit& l, const Line2Fit& r) { return l.rss < r.rss; });
}

std::size_t count_distinct_n(std::span<const TrendPoint> points) {
  std::set<double> ns;
  for (const auto& p : points) ns.insert(p.n);
  return ns.size();
}

}  // namespace

CorrelationTrendFit fit_correlation_trend(std::span<const TrendPoint> points) {
  if (count_distinct_n(points) < 3) {
    throw InsufficientDataError(
        "fit_correlation_trend: need at least 3 distinct sizes");
  }
  std::vector<double> n_vals, y;
  for (const auto& p : points) {
    if (!(p.n > 0.0)) {
      throw DomainError("fit_correlation_trend: sizes must be positive");
    }
    if (std::fabs(p.value) > 1.0) {
      throw DomainError("fit_correlation_trend: |rho| must be <= 1");
    }
    n_vals.push_back(p.n);
    y.push_back(1.0 - p.value * p.value);
  }

  const bool all_equal =
      std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (all_equal) {
    return {1.0, 0.0, y[0], 0.0};
  }

  std::vector<double> x(n_vals.size());
  const auto profile = [&](double zeta) {
    for (std::size_t i = 0; i < n_vals.size(); ++i) {
      x[i] = std::pow(n_vals[i], -zeta);
    }
    return nonnegative_line_fit(x, y);
  };

  // Coarse log-spaced scan, then golden-section refinement of zeta around
  // the best grid cell.
  const double zeta_lo = 0.05, zeta_hi = 8.0;
  const int grid_points = 241;
  double best_zeta = zeta_lo;
  double best_rss = std::numeric_limits<double>::infinity();
  int best_idx = 0;
  std::vector<double> grid(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    grid[i] = zeta_lo * std::pow(zeta_hi / zeta_lo,
                                 static_cast<double>(i) / (grid_points - 1));
    const double rss = profile(grid[i]).rss;
    if (rss < best_rss) {
      best_rss = rss;
      best_zeta = grid[i];
      best_idx = i;
    }
  }
  double lo = grid[std::max(0, best_idx - 1)];
  double hi = grid[std::min(grid_points - 1, best_idx + 1)];
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = profile(x1).rss;
  double f2 = profile(x2).rss;
  while (hi - lo > 1e-7) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = profile(x1).rss;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = profile(x2).rss;
    }
  }
  const double refined = 0.5 * (lo + hi);
  const Line2Fit refined_fit = profile(refined);
  if (refined_fit.rss < best_rss) {
    best_zeta = refined;
    best_rss = refined_fit.rss;
  }
  const Line2Fit fit = profile(best_zeta);
  return {best_zeta, fit.a, fit.b, fit.rss};
}

TimeTrendFit fit_training_time_trend(std::span<const TrendPoint> points) {
  if (count_distinct_n(points) < 2) {
    throw InsufficientDataError(
        "fit_training_time_trend: need at least 2 distinct sizes");
  }
  std::vector<double> x, y;
  for (const auto& p : points) {
    if (p.value < 0.0) {
      throw DomainError("fit_training_time_trend: times must be nonnegative");
    }
    x.push_back(p.n);
    y.push_back(p.value);
  }
  const Line2Fit fit = nonnegative_line_fit(x, y);
  return {fit.a, fit.b};
}

double feasible_n_max(const TrendCoefficients& coeffs, double p,
                      const CostModel& cost) {
  validate(cost);
  validate(coeffs);
  return (p - coeffs.c4) / (cost.g + cost.w0 + coeffs.c3);
}

double mse_upper_bound(double n, const TrendCoefficients& coeffs, double p,
                       const CostModel& cost, double sigma0) {
  const double n_max = feasible_n_max(coeffs, p, cost);
  if (!(n > 0.0 && n < n_max)) {
    throw DomainError("mse_upper_bound: n outside (0, n_max)");
  }
  const double numer =
      coeffs.c1 * cost.w0 * std::pow(n, -coeffs.zeta) + coeffs.c2 * cost.w0 +
      cost.g;
  const double denom = p - (cost.g + cost.w0) * n - coeffs.c3 * n - coeffs.c4;
  return 2.0 * sigma0 * sigma0 * numer / denom;
}

std::int64_t optimal_training_size(const TrendCoefficients& coeffs, double p,
                                   const CostModel& cost, double sigma0,
                                   std::int64_t n_min) {
  if (n_min < 1) throw DomainError("optimal_training_size: n_min must be >= 1");
  const double n_max = feasible_n_max(coeffs, p, cost);
  const std::int64_t top =
      static_cast<std::int64_t>(std::floor(n_max)) - 1;
  if (top < n_min) {
    throw BudgetError(
        "optimal_training_size: no admissible training size within budget");
  }

  const auto bound = [&](double n) {
    return mse_upper_bound(n, coeffs, p, cost, sigma0);
  };

  // Golden section on the open interval; the bound is unimodal (strictly
  // convex for c1 > 0, monotone for c1 = 0).
  double lo = std::min(1e-6 * n_max, 1e-3);
  double hi = n_max - std::min(1e-6 * n_max, 1e-3);
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = bound(x1);
  double f2 = bound(x2);
  while (hi - lo > 1e-3) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = bound(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = bound(x2);
    }
  }
  const double n_cont = 0.5 * (lo + hi);

  const auto clamp_to_range = [&](std::int64_t n) {
    return std::clamp(n, n_min, top);
  };
  const std::int64_t cand_lo =
      clamp_to_range(static_cast<std::int64_t>(std::floor(n_cont)));
  const std::int64_t cand_hi =
      clamp_to_range(static_cast<std::int64_t>(std::ceil(n_cont)));
  if (cand_lo == cand_hi) return cand_lo;
  return bound(static_cast<double>(cand_lo)) <=
                 bound(static_cast<double>(cand_hi))
             ? cand_lo
             : cand_hi;
}

bool efficiency_check(double rho, const CostModel& cost) {
  validate(cost);
  const double rho2 = rho * rho;
  return cost.w0 * rho2 > cost.g * (1.0 - rho2);
}

SamplingPolicy compute_policy(std::int64_t n_star, double rho_n, double sigma0,
                              double sigma1, double p, const CostModel& cost,
                              double t_n) {
  validate(cost);
  if (n_star < 1) throw DomainError("compute_policy: n_star must be >= 1");
  if (t_n < 0.0) throw DomainError("compute_policy: t_n must be nonnegative");
  if (std::fabs(rho_n) > 1.0) {
    throw DomainError("compute_policy: rho outside [-1, 1]");
  }
  if (sigma0 < 0.0) throw DomainError("compute_policy: negative sigma0");
  if (!(sigma1 > 0.0)) {
    throw DegenerateDataError("compute_policy: degenerate surrogate spread");
  }
  const double rho = std::clamp(rho_n, -kRhoClipBound, kRhoClipBound);
  if (!efficiency_check(rho, cost)) {
    throw PolicyError(
        "compute_policy: surrogate not efficient (w0 rho^2 <= g (1 - rho^2))");
  }
  const double remaining =
      p - (cost.g + cost.w0) * static_cast<double>(n_star) - t_n;
  if (!(remaining > cost.w0 + cost.g)) {
    throw BudgetError(
        "compute_policy: post-training budget below one paired sample");
  }
  const double rho2 = rho * rho;
  const double r = std::sqrt(cost.w0 * rho2 / (cost.g * (1.0 - rho2)));
  const auto m0 =
      static_cast<std::int64_t>(std::floor(remaining / (cost.w0 + cost.g * r)));
  if (m0 < 2) {
    throw PolicyError(
        "compute_policy: policy degenerate, fewer than 2 full-model samples");
  }
  const auto m1 =
      static_cast<std::int64_t>(std::floor(r * static_cast<double>(m0)));

  SamplingPolicy policy;
  policy.n_star = n_star;
  policy.m0_star = m0;
  policy.m1_star = m1;
  policy.r = r;
  policy.lambda_star = rho * sigma0 / sigma1;
  policy.remaining_budget_after_training = remaining;
  const double spread = std::sqrt(cost.w0 * (1.0 - rho2)) +
                        std::sqrt(cost.g * rho2);
  policy.predicted_mse_bound = sigma0 * sigma0 / remaining * spread * spread;
  return policy;
}

}  // namespace mfuq
