#include "mfuq/synthetic.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "mfuq/errors.hpp"
#include "mfuq/oxygen.hpp"

namespace mfuq {

QoiSamplePair GaussianPairModel::draw(std::int64_t m0, std::int64_t m1,
                                      RngStream& rng) const {
  if (m0 < 0 || m1 < m0) {
    throw DomainError("GaussianPairModel::draw: requires 0 <= m0 <= m1");
  }
  if (std::fabs(rho) > 1.0) {
    throw DomainError("GaussianPairModel::draw: rho outside [-1, 1]");
  }
  const double ortho = std::sqrt(1.0 - rho * rho);
  std::vector<double> fom;
  std::vector<double> rom;
  fom.reserve(static_cast<std::size_t>(m0));
  rom.reserve(static_cast<std::size_t>(m1));
  for (std::int64_t i = 0; i < m1; ++i) {
    const double z = rng.normal();
    const double w = rng.normal();
    rom.push_back(mean1 + sigma1 * (rho * z + ortho * w));
    if (i < m0) fom.push_back(mean0 + sigma0 * z);
  }
  return QoiSamplePair(std::move(fom), std::move(rom));
}

namespace {

// Quantized descriptor levels keep the distinct-layout universe small
// enough that every distance field is computed once and then reused.
constexpr double kDensityLevels[] = {5.0e3, 6.0e3, 7.0e3};
constexpr double kFractionLevels[] = {0.0, 0.25, 0.5};
constexpr std::uint64_t kSeedLevels = 32;

double unit_coordinate(double value, double lo, double hi) {
  return (value - lo) / (hi - lo);
}

void require_in(double value, double lo, double hi, const char* what) {
  const double tol = 1e-9 * (hi - lo);
  if (!(value >= lo - tol && value <= hi + tol)) {
    throw DomainError(std::string(what) + " outside the validated range");
  }
}

}  // namespace

AnalyticFieldModel::AnalyticFieldModel(GridSpec grid, ParameterRanges ranges)
    : grid_(grid), ranges_(ranges) {
  validate(grid_);
}

void AnalyticFieldModel::validate_parameters(const ParameterSample& mu) const {
  if (mu.physical.size() != 3) {
    throw DomainError("expected exactly three physical parameters");
  }
  require_in(mu.physical[kParamVmax], ranges_.v_max_lo, ranges_.v_max_hi,
             "consumption rate");
  require_in(mu.physical[kParamCin], ranges_.c_in_lo, ranges_.c_in_hi,
             "inlet concentration");
  require_in(mu.physical[kParamPermeability], ranges_.wall_permeability_lo,
             ranges_.wall_permeability_hi, "wall permeability");
  require_in(mu.network.seeds_fraction, ranges_.seeds_fraction_lo,
             ranges_.seeds_fraction_hi, "seeds fraction");
  require_in(mu.network.density_sv, ranges_.density_sv_lo,
             ranges_.density_sv_hi, "vessel density");
}

ParameterSample AnalyticFieldModel::sample_parameters(RngStream& rng) const {
  ParameterSample mu;
  mu.physical = {rng.uniform(ranges_.v_max_lo, ranges_.v_max_hi),
                 rng.uniform(ranges_.c_in_lo, ranges_.c_in_hi),
                 rng.uniform(ranges_.wall_permeability_lo,
                             ranges_.wall_permeability_hi)};
  mu.network.seeds_fraction =
      kFractionLevels[static_cast<std::size_t>(rng.uniform(0.0, 3.0)) % 3];
  mu.network.density_sv =
      kDensityLevels[static_cast<std::size_t>(rng.uniform(0.0, 3.0)) % 3];
  mu.network.seed = rng.next_u64() % kSeedLevels;
  return mu;
}

const std::vector<double>& AnalyticFieldModel::distance_field(
    const NetworkDescriptor& nd) const {
  const auto key = std::make_tuple(nd.density_sv, nd.seeds_fraction, nd.seed);
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = distance_cache_.find(key);
  if (it == distance_cache_.end()) {
    const VascularLayout layout = layout_from_descriptor(nd);
    it = distance_cache_
             .emplace(key, extravascular_distance(layout, grid_))
             .first;
  }
  return it->second;
}

FieldSolution AnalyticFieldModel::solve(const ParameterSample& mu) const {
  validate_parameters(mu);
  const std::vector<double>& d = distance_field(mu.network);

  const double u0 =
      unit_coordinate(mu.physical[kParamVmax], ranges_.v_max_lo,
                      ranges_.v_max_hi);
  const double u1 = unit_coordinate(mu.physical[kParamCin], ranges_.c_in_lo,
                                    ranges_.c_in_hi);
  const double u2 =
      unit_coordinate(mu.physical[kParamPermeability],
                      ranges_.wall_permeability_lo,
                      ranges_.wall_permeability_hi);

  // Oxygen-like profile: a far-field plateau raised by the inlet level
  // plus a perivascular boost that decays over a consumption-controlled
  // length, and a mild consumption tilt.
  const double len = 0.06 + 0.12 * u0;
  const double base = 1.5e-3 * (0.6 + 0.5 * u1);
  const double amp = 1.0e-3 * (0.4 + 0.5 * u2 + 0.3 * u1 * u2);
  const double tilt = 2.0e-4 * u0;

  FieldSolution out;
  out.grid = grid_;
  out.values.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.values[i] =
        base + amp * std::exp(-d[i] / len) + tilt * (1.0 - d[i]);
  }
  return out;
}

}  // namespace mfuq
