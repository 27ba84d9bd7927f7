#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "mfuq/estimators.hpp"
#include "mfuq/model.hpp"
#include "mfuq/oxygen.hpp"
#include "mfuq/rng.hpp"

namespace mfuq {

// Bivariate Gaussian QoI pair with known moments, used by replication
// studies to validate estimator variance and interval coverage against
// closed forms. fom = mean0 + sigma0 Z, rom = mean1 + sigma1 (rho Z +
// sqrt(1 - rho^2) W) with independent standard normals Z, W.
struct GaussianPairModel {
  double mean0 = 0.0;
  double sigma0 = 1.0;
  double mean1 = 0.0;
  double sigma1 = 1.0;
  double rho = 0.9;

  // Draws m1 paired inputs; the first m0 carry both fidelities.
  QoiSamplePair draw(std::int64_t m0, std::int64_t m1, RngStream& rng) const;
};

// Closed-form parameter-to-field map on a small grid, scaled like the
// oxygen testbed so the same QoI functionals apply. Network descriptors
// are drawn from a small quantized set and the derived distance fields
// cached, so campaigns run in milliseconds; solves are exact, making
// the model suitable for budget-accounting and determinism studies.
class AnalyticFieldModel final : public ForwardModel {
 public:
  explicit AnalyticFieldModel(GridSpec grid = GridSpec{9, 9, 1.0 / 8.0},
                              ParameterRanges ranges = ParameterRanges{});

  GridSpec grid() const override { return grid_; }
  void validate_parameters(const ParameterSample& mu) const override;
  ParameterSample sample_parameters(RngStream& rng) const override;
  FieldSolution solve(const ParameterSample& mu) const override;

  const ParameterRanges& ranges() const { return ranges_; }

 private:
  const std::vector<double>& distance_field(const NetworkDescriptor& nd) const;

  GridSpec grid_;
  ParameterRanges ranges_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<double, double, std::uint64_t>,
                   std::vector<double>>
      distance_cache_;
};

}  // namespace mfuq
