#pragma once

#include <cstdint>
#include <span>

namespace mfuq {

struct SampleMoments {
  std::int64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased, divisor count - 1
};

// Two-pass mean and unbiased variance. Requires values.size() >= 2.
SampleMoments sample_moments(std::span<const double> values);

// Pearson correlation of paired samples, clamped to [-1, 1].
// Requires equal lengths >= 2 and nonzero variance in both sequences.
double sample_correlation(std::span<const double> x, std::span<const double> y);

// Inverse standard normal CDF: returns q with Phi(q) = p. Requires 0 < p < 1.
double standard_normal_icdf(double p);

// Upper-tail standard normal quantile z_alpha with Phi(z) = 1 - alpha.
// Requires 0 < alpha < 1.
double normal_quantile(double alpha);

// Upper-tail Student-t quantile with df degrees of freedom:
// P(T > t) = alpha. Requires 0 < alpha < 1 and df >= 1.
double t_quantile(double alpha, std::int64_t df);

// Regularized incomplete beta function I_x(a, b), a,b > 0, x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace mfuq
