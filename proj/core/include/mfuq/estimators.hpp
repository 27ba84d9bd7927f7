#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mfuq {

// Correlation estimates are clipped to +/- this bound before entering
// policy or interval math, so perfectly correlated surrogates degrade
// gracefully instead of dividing by zero.
inline constexpr double kRhoClipBound = 1.0 - 1e-9;

// Point estimate, estimator-variance estimate, and confidence interval,
// together with the declared cost that produced them.
struct EstimateReport {
  double point = 0.0;
  double variance_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence_level = 0.0;
  std::string method;                  // "mc_fom" or "dl_mfmc"
  std::map<std::string, double> cost;  // ledger component totals, may be empty
};

// Paired QoI evaluations: inputs 0..m0-1 were run through both the full
// model and the surrogate, inputs m0..m1-1 through the surrogate only.
// Immutable after construction.
class QoiSamplePair {
 public:
  QoiSamplePair(std::vector<double> fom_values, std::vector<double> rom_values,
                std::vector<std::int64_t> input_ids = {});

  std::int64_t m0() const { return static_cast<std::int64_t>(fom_.size()); }
  std::int64_t m1() const { return static_cast<std::int64_t>(rom_.size()); }
  const std::vector<double>& fom_values() const { return fom_; }
  const std::vector<double>& rom_values() const { return rom_; }
  const std::vector<std::int64_t>& input_ids() const { return ids_; }

 private:
  std::vector<double> fom_;
  std::vector<double> rom_;
  std::vector<std::int64_t> ids_;
};

// Plain Monte Carlo estimate with a Student-t interval; the degrees of
// freedom equal the sample count.
EstimateReport mc_fom_estimate(std::span<const double> values, double gamma);

// Multi-fidelity control-variate estimate:
//   mean(fom) + lambda * (mean(rom over m1) - mean(rom over first m0)).
double mfmc_point_estimate(const QoiSamplePair& pair, double lambda);

// Closed-form estimator MSE:
//   sigma0^2/m0 + (1/m0 - 1/m1) (lambda^2 sigma1^2 - 2 lambda rho sigma1 sigma0).
double mfmc_mse_theoretical(double sigma0, double sigma1, double rho,
                            double lambda, std::int64_t m0, std::int64_t m1);

// Variance-minimizing control-variate weight rho * sigma0 / sigma1.
double optimal_lambda(double sigma0, double sigma1, double rho);

// Estimator MSE when n training samples are invested:
//   sigma0^2 / (p - (g + w0) n - t(n)) * (sqrt(w0 (1 - rho^2)) + sqrt(g rho^2))^2.
// Requires positive remaining budget and the efficiency condition
// w0 rho^2 > g (1 - rho^2).
double dl_mfmc_mse_given_n(double n, double p, double g, double w0,
                           double t_of_n, double rho_n, double sigma0);

// Estimate with the plug-in optimal weight and asymptotic normal interval
//   point +/- z_{(1-gamma)/2} sqrt(s0^2/m0 - (1/m0 - 1/m1) rho^2 s0^2).
// rho and s0 come from the m0 shared pairs, s1 from all m1 surrogate values.
EstimateReport dl_mfmc_confidence_interval(const QoiSamplePair& pair,
                                           double gamma);

}  // namespace mfuq
