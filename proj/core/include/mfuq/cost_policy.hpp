#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace mfuq {

// Declared unit costs, all in the same abstract unit as the budget p.
struct CostModel {
  double g = 1.0;     // input generation cost per sample
  double w0 = 100.0;  // full-model solve cost per sample
  double w1 = 0.0;    // surrogate evaluation cost per sample
  std::string unit = "cost-unit";
};

// Throws DomainError unless g > 0, w0 > 0, w1 >= 0.
void validate(const CostModel& cost);

// One preliminary-study observation at training size n.
struct TrendPoint {
  double n = 0.0;
  double value = 0.0;  // rho(n) for the correlation trend, t(n) for time
};

// Fitted laws 1 - rho^2(n) ~ c1 n^-zeta + c2 and t(n) ~ c3 n + c4.
struct TrendCoefficients {
  double zeta = 1.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
};

void validate(const TrendCoefficients& coeffs);

struct CorrelationTrendFit {
  double zeta = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double rss = 0.0;
};

struct TimeTrendFit {
  double c3 = 0.0;
  double c4 = 0.0;
};

// Fits 1 - rho^2(n) ~ c1 n^-zeta + c2 with c1, c2 >= 0 by profiling the
// linear pair over a log-spaced zeta grid on [0.05, 8] and refining the
// best zeta by golden section. Requires >= 3 distinct n and |rho| <= 1.
CorrelationTrendFit fit_correlation_trend(std::span<const TrendPoint> points);

// Least-squares line t(n) ~ c3 n + c4 with both coefficients kept
// nonnegative (boundary refit when the unconstrained line dips below).
// Requires >= 2 distinct n and nonnegative times.
TimeTrendFit fit_training_time_trend(std::span<const TrendPoint> points);

// Largest admissible continuum training size (p - c4) / (g + w0 + c3).
double feasible_n_max(const TrendCoefficients& coeffs, double p,
                      const CostModel& cost);

// Estimator MSE bound at training size n:
//   2 sigma0^2 (c1 w0 n^-zeta + c2 w0 + g) / (p - (g + w0) n - c3 n - c4).
// Requires 0 < n < feasible_n_max. Strictly convex in n when c1 > 0.
double mse_upper_bound(double n, const TrendCoefficients& coeffs, double p,
                       const CostModel& cost, double sigma0);

// Minimizes the bound by golden section over the admissible interval
// (interval tolerance 1e-3), then returns the better of floor/ceil clamped
// to [n_min, floor(n_max) - 1]. Throws BudgetError if that range is empty.
std::int64_t optimal_training_size(const TrendCoefficients& coeffs, double p,
                                   const CostModel& cost, double sigma0,
                                   std::int64_t n_min);

// Surrogate efficiency condition w0 rho^2 > g (1 - rho^2).
bool efficiency_check(double rho, const CostModel& cost);

// Final sampling plan for one campaign.
struct SamplingPolicy {
  std::int64_t n_star = 0;   // training set size
  std::int64_t m0_star = 0;  // shared two-fidelity samples
  std::int64_t m1_star = 0;  // surrogate-only samples (>= m0_star)
  double r = 0.0;            // target ratio m1/m0
  double lambda_star = 0.0;  // control-variate weight
  double remaining_budget_after_training = 0.0;
  double predicted_mse_bound = 0.0;
};

// Splits the post-training budget p - (g + w0) n* - t(n*) into
// m0 = floor(rem / (w0 + g r)), m1 = floor(r m0) with
// r = sqrt(w0 rho^2 / (g (1 - rho^2))) and lambda = rho sigma0 / sigma1.
// Throws PolicyError when the surrogate is not efficient or fewer than two
// full-model samples are affordable, BudgetError when rem <= w0 + g.
SamplingPolicy compute_policy(std::int64_t n_star, double rho_n, double sigma0,
                              double sigma1, double p, const CostModel& cost,
                              double t_n);

}  // namespace mfuq
