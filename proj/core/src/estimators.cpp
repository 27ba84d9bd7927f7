#include "mfuq/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "mfuq/errors.hpp"
#include "mfuq/stats.hpp"

namespace mfuq {

namespace {

double mean_of(std::span<const double> v, std::size_t count) {
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += v[i];
  return s / static_cast<double>(count);
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("confidence level must lie in (0, 1)");
  }
}

}  // namespace

QoiSamplePair::QoiSamplePair(std::vector<double> fom_values,
                             std::vector<double> rom_values,
                             std::vector<std::int64_t> input_ids)
    : fom_(std::move(fom_values)),
      rom_(std::move(rom_values)),
      ids_(std::move(input_ids)) {
  if (fom_.size() > rom_.size()) {
    throw DomainError("QoiSamplePair: requires m0 <= m1");
  }
  if (!ids_.empty() && ids_.size() != rom_.size()) {
    throw DomainError("QoiSamplePair: input_ids must have one entry per input");
  }
}

EstimateReport mc_fom_estimate(std::span<const double> values, double gamma) {
  check_gamma(gamma);
  if (values.size() < 2) {
    throw InsufficientDataError("mc_fom_estimate: need at least 2 values");
  }
  const auto m = sample_moments(values);
  const double n = static_cast<double>(m.count);
  const double var_est = m.variance / n;
  const double half = t_quantile(0.5 * (1.0 - gamma), m.count) *
                      std::sqrt(var_est);
  EstimateReport r;
  r.point = m.mean;
  r.variance_estimate = var_est;
  r.ci_low = m.mean - half;
  r.ci_high = m.mean + half;
  r.confidence_level = gamma;
  r.method = "mc_fom";
  return r;
}

double mfmc_point_estimate(const QoiSamplePair& pair, double lambda) {
  if (pair.m0() < 1) {
    throw InsufficientDataError("mfmc_point_estimate: need m0 >= 1");
  }
  const double fom_mean = mean_of(pair.fom_values(), pair.fom_values().size());
  const double rom_mean_all =
      mean_of(pair.rom_values(), pair.rom_values().size());
  const double rom_mean_shared =
      mean_of(pair.rom_values(), static_cast<std::size_t>(pair.m0()));
  return fom_mean + lambda * (rom_mean_all - rom_mean_shared);
}

double mfmc_mse_theoretical(double sigma0, double sigma1, double rho,
                            double lambda, std::int64_t m0, std::int64_t m1) {
  if (m0 < 1 || m1 < m0) {
    throw DomainError("mfmc_mse_theoretical: requires 1 <= m0 <= m1");
  }
  if (sigma0 < 0.0 || sigma1 < 0.0) {
    throw DomainError("mfmc_mse_theoretical: negative standard deviation");
  }
  if (std::fabs(rho) > 1.0) {
    throw DomainError("mfmc_mse_theoretical: rho outside [-1, 1]");
  }
  const double im0 = 1.0 / static_cast<double>(m0);
  const double im1 = 1.0 / static_cast<double>(m1);
  return sigma0 * sigma0 * im0 +
         (im0 - im1) *
             (lambda * lambda * sigma1 * sigma1 -
              2.0 * lambda * rho * sigma1 * sigma0);
}

double optimal_lambda(double sigma0, double sigma1, double rho) {
  if (sigma0 < 0.0) throw DomainError("optimal_lambda: negative sigma0");
  if (std::fabs(rho) > 1.0) {
    throw DomainError("optimal_lambda: rho outside [-1, 1]");
  }
  if (sigma1 <= 0.0) {
    throw DegenerateDataError("optimal_lambda: surrogate spread is zero");
  }
  return rho * sigma0 / sigma1;
}

double dl_mfmc_mse_given_n(double n, double p, double g, double w0,
                           double t_of_n, double rho_n, double sigma0) {
  if (g <= 0.0 || w0 <= 0.0) {
    throw DomainError("dl_mfmc_mse_given_n: costs must be positive");
  }
  if (std::fabs(rho_n) > 1.0) {
    throw DomainError("dl_mfmc_mse_given_n: rho outside [-1, 1]");
  }
  const double remaining = p - (g + w0) * n - t_of_n;
  if (!(remaining > 0.0)) {
    throw BudgetError("dl_mfmc_mse_given_n: training spend exhausts budget");
  }
  const double rho2 = rho_n * rho_n;
  if (!(w0 * rho2 > g * (1.0 - rho2))) {
    throw PolicyError(
        "dl_mfmc_mse_given_n: surrogate not efficient (w0 rho^2 <= g (1 - rho^2))");
  }
  const double s = std::sqrt(w0 * (1.0 - rho2)) + std::sqrt(g * rho2);
  return sigma0 * sigma0 / remaining * s * s;
}

EstimateReport dl_mfmc_confidence_interval(const QoiSamplePair& pair,
                                           double gamma) {
  check_gamma(gamma);
  const std::int64_t m0 = pair.m0();
  const std::int64_t m1 = pair.m1();
  if (m0 < 2) {
    throw InsufficientDataError("dl_mfmc_confidence_interval: need m0 >= 2");
  }
  const std::span<const double> rom(pair.rom_values());
  const auto fom_m = sample_moments(pair.fom_values());
  const auto rom_m = sample_moments(rom);
  if (rom_m.variance <= 0.0) {
    throw DegenerateDataError(
        "dl_mfmc_confidence_interval: degenerate surrogate spread");
  }
  double rho = sample_correlation(pair.fom_values(),
                                  rom.subspan(0, static_cast<std::size_t>(m0)));
  rho = std::clamp(rho, -kRhoClipBound, kRhoClipBound);
  const double sigma0 = std::sqrt(fom_m.variance);
  const double sigma1 = std::sqrt(rom_m.variance);
  const double lambda = rho * sigma0 / sigma1;

  const double im0 = 1.0 / static_cast<double>(m0);
  const double im1 = 1.0 / static_cast<double>(m1);
  const double var_est =
      fom_m.variance * im0 - (im0 - im1) * rho * rho * fom_m.variance;
  const double half =
      normal_quantile(0.5 * (1.0 - gamma)) * std::sqrt(var_est);
  const double point = mfmc_point_estimate(pair, lambda);

  EstimateReport r;
  r.point = point;
  r.variance_estimate = var_est;
  r.ci_low = point - half;
  r.ci_high = point + half;
  r.confidence_level = gamma;
  r.method = "dl_mfmc";
  return r;
}

}  // namespace mfuq
