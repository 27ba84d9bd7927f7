#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mfuq/model.hpp"
#include "mfuq/rng.hpp"

namespace mfuq {

struct Segment {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double length() const;
};

// Random vascular layout on the unit square.
struct VascularLayout {
  std::vector<Segment> segments;
  std::vector<std::array<double, 2>> inlets;
  double density_sv = 0.0;
  double seeds_fraction = 0.0;
};

void validate(const VascularLayout& layout);

// Tissue oxygen transport coefficients, SI units. The unit square stands
// for a 1 mm x 1 mm slab of effective thickness 0.15 mm.
struct TissueProblem {
  double diffusivity = 2.41e-9;      // m^2/s
  double v_max = 1.40e-4;            // (mL_O2/mL)/s
  double michaelis_p50 = 27.0;       // mmHg
  double alpha_ox = 3.89e-5;         // (mL_O2/mL)/mmHg
  double vessel_radius = 4e-6;       // m
  double wall_permeability = 1.675e-4;  // m/s
  double c_in = 3.00e-3;             // mL_O2/mL
  double tau_boundary = 1.0e-5;      // m/s
  double c_far_field = 1.50e-3;      // mL_O2/mL
  double domain_side = 1.0e-3;       // m
  double slab_thickness = 1.5e-4;    // m
};

void validate(const TissueProblem& problem);

// Linear-quadratic radiotherapy response constants.
struct RadiobiologyParams {
  double dose = 20.0;         // Gy
  double alpha = 0.178;       // 1/Gy
  double beta = 0.0455;       // 1/Gy^2
  double delta = 1.38;
  double oer_max = 2.81;
  double let_scale = 522.45;  // keV/um
  double p_half = 1.24;       // mmHg
  double n_clonogens = 1e8;
  double let = 2.0;           // keV/um
};

// Admissible ranges of the five sampled inputs.
struct ParameterRanges {
  double v_max_lo = 0.40e-4, v_max_hi = 2.40e-4;
  double c_in_lo = 2.25e-3, c_in_hi = 3.75e-3;
  double wall_permeability_lo = 0.35e-4, wall_permeability_hi = 3.00e-4;
  double seeds_fraction_lo = 0.0, seeds_fraction_hi = 0.75;
  double density_sv_lo = 5e3, density_sv_hi = 7e3;
};

// Indices into ParameterSample::physical for this testbed.
inline constexpr std::size_t kParamVmax = 0;
inline constexpr std::size_t kParamCin = 1;
inline constexpr std::size_t kParamPermeability = 2;

// Grows a vessel network: Poisson-disk seed points (fewer, hence more
// clustered, as seeds_fraction rises) extended by random-walk segments
// until the total centerline length matches the density target.
VascularLayout generate_network(double density_sv, double seeds_fraction,
                                RngStream& rng);

// Deterministic layout from a network descriptor. The stream label is
// fixed here so every consumer derives the same geometry from the same
// descriptor.
VascularLayout layout_from_descriptor(const NetworkDescriptor& net);

// Distance from each grid node to the nearest vessel segment.
std::vector<double> extravascular_distance(const VascularLayout& layout,
                                           const GridSpec& grid);

// 1.0 on nodes within one grid spacing of an inlet point, else 0.0.
std::vector<double> inlet_indicator(const VascularLayout& layout,
                                    const GridSpec& grid);

// Per-node vessel centerline length deposited by exact cell clipping,
// in domain units (sums to the layout's total length).
std::vector<double> vessel_length_per_cell(const VascularLayout& layout,
                                           const GridSpec& grid);

// Steady oxygen field: finite-volume discretization of
//   -D lap(C) + V_max C / (C + alpha_ox p50) = 2 pi R P (C_in - C) chi
// with Robin boundary -D dC/dn = tau (C - C_far), solved by damped Picard
// iteration (factor 0.7) to relative residual 1e-8.
FieldSolution fom_solve(const TissueProblem& problem,
                        const VascularLayout& layout, const GridSpec& grid);

// Test-support variant with a manufactured volumetric source (rate units,
// one value per node; empty means zero) and a spatially varying boundary
// datum (one value per node, read on boundary nodes; empty means the
// scalar far-field value).
FieldSolution fom_solve_general(const TissueProblem& problem,
                                const VascularLayout& layout,
                                const GridSpec& grid,
                                const std::vector<double>& extra_source,
                                const std::vector<double>& boundary_value);

// Area-averaged oxygen partial pressure, mmHg.
double qoi_avg_po2(const FieldSolution& field, double alpha_ox);

// Max-min oxygen partial pressure spread, mmHg.
double qoi_delta_po2(const FieldSolution& field, double alpha_ox);

// Oxygen enhancement ratio at zero pO2 for the configured LET.
double oer_zero(const RadiobiologyParams& radio);

// Oxygen enhancement ratio at a given pO2 (mmHg); decreases to 1 as
// pO2 grows.
double oer(double p_o2, const RadiobiologyParams& radio);

// Linear-quadratic survival fraction at the OER-scaled dose.
double survival_fraction(double p_o2, const RadiobiologyParams& radio);

// Tumor control probability exp(-integral of clonogen density times
// survival fraction).
double qoi_tcp(const FieldSolution& field, double alpha_ox,
               const RadiobiologyParams& radio);

// QoI registry; names: "avg_po2", "delta_po2", "tcp".
QoiFunctional make_qoi(const std::string& name, const TissueProblem& problem,
                       const RadiobiologyParams& radio);

// Full-order oxygen model over randomized physiology and vasculature.
class OxygenModel final : public ForwardModel {
 public:
  OxygenModel(GridSpec grid, TissueProblem base, RadiobiologyParams radio,
              ParameterRanges ranges);

  GridSpec grid() const override { return grid_; }
  void validate_parameters(const ParameterSample& mu) const override;
  ParameterSample sample_parameters(RngStream& rng) const override;
  FieldSolution solve(const ParameterSample& mu) const override;

  VascularLayout layout_for(const ParameterSample& mu) const;
  TissueProblem problem_for(const ParameterSample& mu) const;
  const TissueProblem& base_problem() const { return base_; }
  const RadiobiologyParams& radiobiology() const { return radio_; }
  const ParameterRanges& ranges() const { return ranges_; }

 private:
  GridSpec grid_;
  TissueProblem base_;
  RadiobiologyParams radio_;
  ParameterRanges ranges_;
};

}  // namespace mfuq
