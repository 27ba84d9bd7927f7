#include "mfuq/oxygen.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "mfuq/errors.hpp"

namespace mfuq {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Random-walk growth step in domain units.
constexpr double kWalkStep = 0.035;
// Angle diffusion per step, radians.
constexpr double kAngleSigma = 0.55;
// Chance per deposited step of spawning a branch walker.
constexpr double kBranchProb = 0.08;
// Walker count cap, per seed point.
constexpr int kWalkerCapPerSeed = 3;
// Seeds stay this far from the boundary; walkers may approach it closer.
constexpr double kSeedMargin = 0.06;
constexpr double kWalkMargin = 0.01;

bool inside_unit(double x, double y, double margin) {
  return x >= margin && x <= 1.0 - margin && y >= margin && y <= 1.0 - margin;
}

double point_segment_distance(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0;
  const double dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((px - s.x0) * dx + (py - s.y0) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const double ex = s.x0 + t * dx - px;
  const double ey = s.y0 + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

// Uniform bucket grid over the unit square for nearest-segment queries.
class SegmentBuckets {
 public:
  explicit SegmentBuckets(const std::vector<Segment>& segments)
      : segments_(segments) {
    buckets_.resize(static_cast<std::size_t>(kSide) * kSide);
    for (int s = 0; s < static_cast<int>(segments_.size()); ++s) {
      const Segment& seg = segments_[static_cast<std::size_t>(s)];
      const int i0 = cell_of(std::min(seg.x0, seg.x1));
      const int i1 = cell_of(std::max(seg.x0, seg.x1));
      const int j0 = cell_of(std::min(seg.y0, seg.y1));
      const int j1 = cell_of(std::max(seg.y0, seg.y1));
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i)
          buckets_[static_cast<std::size_t>(j) * kSide + i].push_back(s);
    }
  }

  // Exact: ring r cells lie at distance >= (r-1)*cell from the query
  // point, so once best <= r*cell no unvisited segment can win.
  double nearest(double px, double py) const {
    double best = std::numeric_limits<double>::infinity();
    const int ci = cell_of(px);
    const int cj = cell_of(py);
    for (int r = 0; r < 2 * kSide; ++r) {
      bool any_cell = false;
      for (int j = cj - r; j <= cj + r; ++j) {
        if (j < 0 || j >= kSide) continue;
        for (int i = ci - r; i <= ci + r; ++i) {
          if (i < 0 || i >= kSide) continue;
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != r) continue;
          any_cell = true;
          for (int s : buckets_[static_cast<std::size_t>(j) * kSide + i]) {
            best = std::min(
                best,
                point_segment_distance(px, py, segments_[static_cast<std::size_t>(s)]));
          }
        }
      }
      if (best <= static_cast<double>(r) * kCell) break;
      // Rings are nested within the bucket rectangle: once one ring is
      // fully out of bounds every later ring is too.
      if (!any_cell) break;
    }
    return best;
  }

 private:
  static constexpr int kSide = 20;
  static constexpr double kCell = 1.0 / kSide;

  static int cell_of(double x) {
    int c = static_cast<int>(std::floor(x * kSide));
    return std::clamp(c, 0, kSide - 1);
  }

  const std::vector<Segment>& segments_;
  std::vector<std::vector<int>> buckets_;
};

struct Walker {
  double x = 0.0, y = 0.0, angle = 0.0;
  // Seed point this walker is leashed to; keeps growth local so that
  // fewer seeds produce visibly clustered layouts.
  double ox = 0.0, oy = 0.0;
};

// Node-centered cell weight: 1 interior, 1/2 edge, 1/4 corner.
double cell_weight(const GridSpec& grid, std::int32_t i, std::int32_t j) {
  const double wx = (i == 0 || i + 1 == grid.nx) ? 0.5 : 1.0;
  const double wy = (j == 0 || j + 1 == grid.ny) ? 0.5 : 1.0;
  return wx * wy;
}

void require_unit_extent(const GridSpec& grid) {
  validate(grid);
  const double ex = static_cast<double>(grid.nx - 1) * grid.spacing;
  const double ey = static_cast<double>(grid.ny - 1) * grid.spacing;
  if (std::abs(ex - 1.0) > 1e-9 || std::abs(ey - 1.0) > 1e-9) {
    throw DomainError("oxygen solver requires a grid spanning the unit square");
  }
}

}  // namespace

double Segment::length() const { return std::hypot(x1 - x0, y1 - y0); }

void validate(const VascularLayout& layout) {
  if (layout.segments.empty()) {
    throw DomainError("vascular layout has no segments");
  }
  if (layout.inlets.empty()) {
    throw DomainError("vascular layout has no inlets");
  }
  for (const Segment& s : layout.segments) {
    if (!std::isfinite(s.x0) || !std::isfinite(s.y0) || !std::isfinite(s.x1) ||
        !std::isfinite(s.y1)) {
      throw DomainError("vascular segment has non-finite coordinates");
    }
    if (s.x0 < 0.0 || s.x0 > 1.0 || s.y0 < 0.0 || s.y0 > 1.0 || s.x1 < 0.0 ||
        s.x1 > 1.0 || s.y1 < 0.0 || s.y1 > 1.0) {
      throw DomainError("vascular segment leaves the unit square");
    }
  }
  for (const auto& p : layout.inlets) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || p[0] < 0.0 ||
        p[0] > 1.0 || p[1] < 0.0 || p[1] > 1.0) {
      throw DomainError("vascular inlet leaves the unit square");
    }
  }
}

void validate(const TissueProblem& problem) {
  const auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!pos(problem.diffusivity) || !pos(problem.alpha_ox) ||
      !pos(problem.michaelis_p50) || !pos(problem.vessel_radius) ||
      !pos(problem.domain_side) || !pos(problem.slab_thickness)) {
    throw DomainError("tissue problem has a non-positive coefficient");
  }
  const auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!nonneg(problem.v_max) || !nonneg(problem.wall_permeability) ||
      !nonneg(problem.tau_boundary) || !nonneg(problem.c_in) ||
      !nonneg(problem.c_far_field)) {
    throw DomainError("tissue problem has a negative coefficient");
  }
}

VascularLayout generate_network(double density_sv, double seeds_fraction,
                                RngStream& rng) {
  if (!std::isfinite(density_sv) || density_sv <= 0.0) {
    throw DomainError("vessel density must be positive");
  }
  if (!std::isfinite(seeds_fraction) || seeds_fraction < 0.0 ||
      seeds_fraction > 0.95) {
    throw DomainError("seeds fraction must lie in [0, 0.95]");
  }

  // Surface density S/V = 2 pi R L_vessel / (L^2 T) fixes the total
  // centerline length in domain units: density * L * T / (2 pi R).
  const TissueProblem geom{};
  const double target = density_sv * geom.domain_side * geom.slab_thickness /
                        (2.0 * kPi * geom.vessel_radius);

  VascularLayout layout;
  layout.density_sv = density_sv;
  layout.seeds_fraction = seeds_fraction;

  const int n_seeds =
      std::max(3, static_cast<int>(std::lround(24.0 * (1.0 - seeds_fraction))));

  // Best-candidate sampling: each seed picks, out of a fixed number of
  // uniform candidates, the one farthest from the seeds placed so far.
  // The fixed candidate count keeps the generator consumption pattern
  // independent of the geometry.
  constexpr int kSeedCandidates = 30;
  for (int s = 0; s < n_seeds; ++s) {
    double bx = 0.0, by = 0.0, bd = -1.0;
    for (int attempt = 0; attempt < kSeedCandidates; ++attempt) {
      const double cx = rng.uniform(kSeedMargin, 1.0 - kSeedMargin);
      const double cy = rng.uniform(kSeedMargin, 1.0 - kSeedMargin);
      double near2 = std::numeric_limits<double>::infinity();
      for (const auto& p : layout.inlets) {
        const double dx = p[0] - cx;
        const double dy = p[1] - cy;
        near2 = std::min(near2, dx * dx + dy * dy);
      }
      if (layout.inlets.empty()) near2 = 1.0;
      if (near2 > bd) {
        bd = near2;
        bx = cx;
        by = cy;
      }
    }
    layout.inlets.push_back({bx, by});
  }

  const double leash =
      std::min(0.60 / std::sqrt(static_cast<double>(n_seeds)), 0.17);
  std::vector<Walker> walkers;
  walkers.reserve(static_cast<std::size_t>(kWalkerCapPerSeed * n_seeds));
  for (const auto& p : layout.inlets) {
    walkers.push_back({p[0], p[1], rng.uniform(0.0, 2.0 * kPi), p[0], p[1]});
  }

  const std::size_t walker_cap =
      static_cast<std::size_t>(kWalkerCapPerSeed * n_seeds);
  double total = 0.0;
  std::size_t turn = 0;
  while (total < target - 1e-12) {
    Walker& w = walkers[turn % walkers.size()];
    ++turn;
    const double step = std::min(kWalkStep, target - total);
    double na = w.angle, nx = w.x, ny = w.y;
    bool moved = false;
    for (int attempt = 0; attempt < 20; ++attempt) {
      na = w.angle + rng.normal(0.0, kAngleSigma);
      nx = w.x + step * std::cos(na);
      ny = w.y + step * std::sin(na);
      const double lx = nx - w.ox;
      const double ly = ny - w.oy;
      if (inside_unit(nx, ny, kWalkMargin) &&
          lx * lx + ly * ly <= leash * leash) {
        moved = true;
        break;
      }
    }
    if (!moved) {
      w.angle = rng.uniform(0.0, 2.0 * kPi);
      continue;
    }
    layout.segments.push_back({w.x, w.y, nx, ny});
    total += step;
    w.x = nx;
    w.y = ny;
    w.angle = na;
    if (walkers.size() < walker_cap && rng.uniform() < kBranchProb) {
      const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
      const double branch_angle = na + side * rng.uniform(kPi / 4.0, kPi / 2.0);
      walkers.push_back({nx, ny, branch_angle, w.ox, w.oy});
    }
  }

  validate(layout);
  return layout;
}

std::vector<double> extravascular_distance(const VascularLayout& layout,
                                           const GridSpec& grid) {
  validate(layout);
  validate(grid);
  SegmentBuckets buckets(layout.segments);
  std::vector<double> d(grid.num_nodes());
  for (std::int32_t j = 0; j < grid.ny; ++j) {
    for (std::int32_t i = 0; i < grid.nx; ++i) {
      d[grid.index(i, j)] = buckets.nearest(grid.x(i), grid.y(j));
    }
  }
  return d;
}

std::vector<double> inlet_indicator(const VascularLayout& layout,
                                    const GridSpec& grid) {
  validate(layout);
  validate(grid);
  std::vector<double> eta(grid.num_nodes(), 0.0);
  const double reach = grid.spacing;
  for (std::int32_t j = 0; j < grid.ny; ++j) {
    for (std::int32_t i = 0; i < grid.nx; ++i) {
      const double px = grid.x(i);
      const double py = grid.y(j);
      for (const auto& p : layout.inlets) {
        const double dx = p[0] - px;
        const double dy = p[1] - py;
        if (dx * dx + dy * dy <= reach * reach) {
          eta[grid.index(i, j)] = 1.0;
          break;
        }
      }
    }
  }
  return eta;
}

std::vector<double> vessel_length_per_cell(const VascularLayout& layout,
                                           const GridSpec& grid) {
  validate(layout);
  validate(grid);
  const double h = grid.spacing;
  std::vector<double> len(grid.num_nodes(), 0.0);
  std::vector<double> ts;
  for (const Segment& seg : layout.segments) {
    const double seg_len = seg.length();
    if (seg_len == 0.0) continue;
    ts.clear();
    ts.push_back(0.0);
    ts.push_back(1.0);
    const double dx = seg.x1 - seg.x0;
    const double dy = seg.y1 - seg.y0;
    // Node cells are squares of side h centered on nodes; their faces sit
    // at odd half-multiples of h.
    if (dx != 0.0) {
      for (std::int32_t k = 0; k + 1 < grid.nx; ++k) {
        const double xb = (static_cast<double>(k) + 0.5) * h;
        const double t = (xb - seg.x0) / dx;
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
    }
    if (dy != 0.0) {
      for (std::int32_t k = 0; k + 1 < grid.ny; ++k) {
        const double yb = (static_cast<double>(k) + 0.5) * h;
        const double t = (yb - seg.y0) / dy;
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      const double ta = ts[k];
      const double tb = ts[k + 1];
      if (tb - ta <= 0.0) continue;
      const double tm = 0.5 * (ta + tb);
      const double xm = seg.x0 + tm * dx;
      const double ym = seg.y0 + tm * dy;
      const auto ci = static_cast<std::int32_t>(std::clamp<long>(
          std::lround(xm / h), 0, static_cast<long>(grid.nx) - 1));
      const auto cj = static_cast<std::int32_t>(std::clamp<long>(
          std::lround(ym / h), 0, static_cast<long>(grid.ny) - 1));
      len[grid.index(ci, cj)] += (tb - ta) * seg_len;
    }
  }
  return len;
}

FieldSolution fom_solve(const TissueProblem& problem,
                        const VascularLayout& layout, const GridSpec& grid) {
  return fom_solve_general(problem, layout, grid, {}, {});
}

FieldSolution fom_solve_general(const TissueProblem& problem,
                                const VascularLayout& layout,
                                const GridSpec& grid,
                                const std::vector<double>& extra_source,
                                const std::vector<double>& boundary_value) {
  validate(problem);
  require_unit_extent(grid);
  const std::size_t n = grid.num_nodes();
  if (!extra_source.empty() && extra_source.size() != n) {
    throw DomainError("extra source size does not match grid");
  }
  if (!boundary_value.empty() && boundary_value.size() != n) {
    throw DomainError("boundary value size does not match grid");
  }

  const double h = grid.spacing;
  const double big_l = problem.domain_side;
  // All terms in domain units: diffusion D/L^2, Robin conductance
  // tau*L/D, vessel exchange 2 pi R P / (L T) per unit centerline length.
  const double dhat = problem.diffusivity / (big_l * big_l);
  const double tauhat = problem.tau_boundary * big_l / problem.diffusivity;
  const double coeff_q = 2.0 * kPi * problem.vessel_radius *
                         problem.wall_permeability /
                         (big_l * problem.slab_thickness);
  const double km = problem.alpha_ox * problem.michaelis_p50;

  const std::vector<double> lper = vessel_length_per_cell(layout, grid);

  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> trips;
  trips.reserve(6 * n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd vol(static_cast<Eigen::Index>(n));
  Eigen::VectorXd qvec(static_cast<Eigen::Index>(n));

  const auto idx = [&grid](std::int32_t i, std::int32_t j) {
    return static_cast<Eigen::Index>(grid.index(i, j));
  };

  // Finite-volume fluxes, one shared coefficient per face so the matrix
  // is symmetric; boundary-row faces have half length.
  for (std::int32_t j = 0; j < grid.ny; ++j) {
    const double face = (j == 0 || j + 1 == grid.ny) ? 0.5 : 1.0;
    for (std::int32_t i = 0; i + 1 < grid.nx; ++i) {
      const double c = dhat * face;
      const Eigen::Index a = idx(i, j);
      const Eigen::Index b = idx(i + 1, j);
      trips.emplace_back(a, a, c);
      trips.emplace_back(b, b, c);
      trips.emplace_back(a, b, -c);
      trips.emplace_back(b, a, -c);
    }
  }
  for (std::int32_t i = 0; i < grid.nx; ++i) {
    const double face = (i == 0 || i + 1 == grid.nx) ? 0.5 : 1.0;
    for (std::int32_t j = 0; j + 1 < grid.ny; ++j) {
      const double c = dhat * face;
      const Eigen::Index a = idx(i, j);
      const Eigen::Index b = idx(i, j + 1);
      trips.emplace_back(a, a, c);
      trips.emplace_back(b, b, c);
      trips.emplace_back(a, b, -c);
      trips.emplace_back(b, a, -c);
    }
  }

  for (std::int32_t j = 0; j < grid.ny; ++j) {
    for (std::int32_t i = 0; i < grid.nx; ++i) {
      const Eigen::Index a = idx(i, j);
      const double area = cell_weight(grid, i, j) * h * h;
      vol[a] = area;
      const double q = coeff_q * lper[grid.index(i, j)];
      qvec[a] = q;
      trips.emplace_back(a, a, q);
      rhs[a] += q * problem.c_in;
      if (!extra_source.empty()) {
        rhs[a] += extra_source[grid.index(i, j)] * area;
      }
      // Robin faces: half length next to a corner.
      double robin_len = 0.0;
      const double gx = (i == 0 || i + 1 == grid.nx)
                            ? ((j == 0 || j + 1 == grid.ny) ? 0.5 * h : h)
                            : 0.0;
      const double gy = (j == 0 || j + 1 == grid.ny)
                            ? ((i == 0 || i + 1 == grid.nx) ? 0.5 * h : h)
                            : 0.0;
      robin_len = gx + gy;
      if (robin_len > 0.0) {
        const double c = dhat * tauhat * robin_len;
        const double g = boundary_value.empty()
                             ? problem.c_far_field
                             : boundary_value[grid.index(i, j)];
        trips.emplace_back(a, a, c);
        rhs[a] += c * g;
      }
    }
  }

  Eigen::SparseMatrix<double> base(static_cast<Eigen::Index>(n),
                                   static_cast<Eigen::Index>(n));
  base.setFromTriplets(trips.begin(), trips.end());
  base.makeCompressed();

  const auto michaelis = [&](double c) {
    return problem.v_max * c / (c + km);
  };
  const auto residual_norm = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd f = base * c - rhs;
    for (Eigen::Index a = 0; a < f.size(); ++a) {
      f[a] += vol[a] * michaelis(c[a]);
    }
    return f.norm();
  };

  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  constexpr double kRelTol = 1e-8;
  constexpr int kMaxIters = 200;
  constexpr double kDamping = 0.7;

  Eigen::VectorXd c = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                                problem.c_far_field);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::SparseMatrix<double> a_iter = base;
  ldlt.analyzePattern(a_iter);
  double rel = residual_norm(c) / rhs_norm;

  for (int iter = 0; iter < kMaxIters; ++iter) {
    a_iter = base;
    // Picard: freeze the Michaelis-Menten denominator at the previous
    // iterate, keeping the matrix an SPD M-matrix.
    for (Eigen::Index a = 0; a < c.size(); ++a) {
      const double k_lin = problem.v_max / (c[a] + km);
      a_iter.coeffRef(a, a) += vol[a] * k_lin;
    }
    ldlt.factorize(a_iter);
    if (ldlt.info() != Eigen::Success) {
      throw SolverError("oxygen solver factorization failed");
    }
    const Eigen::VectorXd c_new = ldlt.solve(rhs);
    c = (iter == 0) ? c_new
                    : Eigen::VectorXd(kDamping * c_new + (1.0 - kDamping) * c);
    rel = residual_norm(c) / rhs_norm;
    if (rel <= kRelTol) {
      FieldSolution out{grid, std::vector<double>(
                                  c.data(), c.data() + static_cast<long>(n))};
      validate(out);
      return out;
    }
  }
  std::ostringstream msg;
  msg << "oxygen solver did not converge: relative residual " << rel
      << " after " << kMaxIters << " iterations (target " << kRelTol << ")";
  throw SolverError(msg.str());
}

double qoi_avg_po2(const FieldSolution& field, double alpha_ox) {
  validate(field);
  if (!(alpha_ox > 0.0)) throw DomainError("alpha_ox must be positive");
  const GridSpec& g = field.grid;
  const double h2 = g.spacing * g.spacing;
  double area = 0.0;
  double sum = 0.0;
  for (std::int32_t j = 0; j < g.ny; ++j) {
    for (std::int32_t i = 0; i < g.nx; ++i) {
      const double w = cell_weight(g, i, j) * h2;
      area += w;
      sum += w * field.values[g.index(i, j)];
    }
  }
  return sum / (area * alpha_ox);
}

double qoi_delta_po2(const FieldSolution& field, double alpha_ox) {
  validate(field);
  if (!(alpha_ox > 0.0)) throw DomainError("alpha_ox must be positive");
  const auto [lo, hi] =
      std::minmax_element(field.values.begin(), field.values.end());
  return (*hi - *lo) / alpha_ox;
}

double oer_zero(const RadiobiologyParams& radio) {
  const double lp = std::pow(radio.let, radio.delta);
  return (lp + radio.oer_max * radio.let_scale) / (radio.let_scale + lp);
}

double oer(double p_o2, const RadiobiologyParams& radio) {
  if (!std::isfinite(p_o2) || p_o2 < 0.0) {
    throw DomainError("pO2 must be finite and nonnegative");
  }
  const double o0 = oer_zero(radio);
  return (radio.p_half * o0 + p_o2) / (radio.p_half + p_o2);
}

double survival_fraction(double p_o2, const RadiobiologyParams& radio) {
  const double d_eff = radio.dose / oer(p_o2, radio);
  return std::exp(-radio.alpha * d_eff - radio.beta * d_eff * d_eff);
}

double qoi_tcp(const FieldSolution& field, double alpha_ox,
               const RadiobiologyParams& radio) {
  validate(field);
  if (!(alpha_ox > 0.0)) throw DomainError("alpha_ox must be positive");
  const GridSpec& g = field.grid;
  const double h2 = g.spacing * g.spacing;
  double area = 0.0;
  double integral = 0.0;
  for (std::int32_t j = 0; j < g.ny; ++j) {
    for (std::int32_t i = 0; i < g.nx; ++i) {
      const double w = cell_weight(g, i, j) * h2;
      area += w;
      const double p_o2 = field.values[g.index(i, j)] / alpha_ox;
      integral += w * survival_fraction(p_o2, radio);
    }
  }
  return std::exp(-radio.n_clonogens * integral / area);
}

QoiFunctional make_qoi(const std::string& name, const TissueProblem& problem,
                       const RadiobiologyParams& radio) {
  const double alpha = problem.alpha_ox;
  if (name == "avg_po2") {
    return {name, [alpha](const FieldSolution& f) {
              return qoi_avg_po2(f, alpha);
            }};
  }
  if (name == "delta_po2") {
    return {name, [alpha](const FieldSolution& f) {
              return qoi_delta_po2(f, alpha);
            }};
  }
  if (name == "tcp") {
    return {name, [alpha, radio](const FieldSolution& f) {
              return qoi_tcp(f, alpha, radio);
            }};
  }
  throw ConfigError("unknown QoI name: " + name);
}

OxygenModel::OxygenModel(GridSpec grid, TissueProblem base,
                         RadiobiologyParams radio, ParameterRanges ranges)
    : grid_(grid), base_(base), radio_(radio), ranges_(ranges) {
  require_unit_extent(grid_);
  validate(base_);
  const auto ordered = [](double lo, double hi) {
    return std::isfinite(lo) && std::isfinite(hi) && lo < hi;
  };
  if (!ordered(ranges_.v_max_lo, ranges_.v_max_hi) ||
      !ordered(ranges_.c_in_lo, ranges_.c_in_hi) ||
      !ordered(ranges_.wall_permeability_lo, ranges_.wall_permeability_hi) ||
      !ordered(ranges_.seeds_fraction_lo, ranges_.seeds_fraction_hi) ||
      !ordered(ranges_.density_sv_lo, ranges_.density_sv_hi)) {
    throw DomainError("parameter ranges must be finite and ordered");
  }
  if (ranges_.seeds_fraction_lo < 0.0 || ranges_.seeds_fraction_hi > 0.95) {
    throw DomainError("seeds fraction range must lie in [0, 0.95]");
  }
  if (ranges_.density_sv_lo <= 0.0) {
    throw DomainError("density range must be positive");
  }
}

void OxygenModel::validate_parameters(const ParameterSample& mu) const {
  if (mu.physical.size() != 3) {
    throw DomainError("oxygen model expects 3 physical parameters");
  }
  const auto in_range = [](double v, double lo, double hi) {
    const double tol = 1e-9 * (hi - lo);
    return std::isfinite(v) && v >= lo - tol && v <= hi + tol;
  };
  if (!in_range(mu.physical[kParamVmax], ranges_.v_max_lo, ranges_.v_max_hi)) {
    throw DomainError("v_max parameter out of range");
  }
  if (!in_range(mu.physical[kParamCin], ranges_.c_in_lo, ranges_.c_in_hi)) {
    throw DomainError("c_in parameter out of range");
  }
  if (!in_range(mu.physical[kParamPermeability], ranges_.wall_permeability_lo,
                ranges_.wall_permeability_hi)) {
    throw DomainError("wall permeability parameter out of range");
  }
  if (!in_range(mu.network.seeds_fraction, ranges_.seeds_fraction_lo,
                ranges_.seeds_fraction_hi)) {
    throw DomainError("seeds fraction parameter out of range");
  }
  if (!in_range(mu.network.density_sv, ranges_.density_sv_lo,
                ranges_.density_sv_hi)) {
    throw DomainError("vessel density parameter out of range");
  }
}

ParameterSample OxygenModel::sample_parameters(RngStream& rng) const {
  ParameterSample mu;
  mu.physical = {rng.uniform(ranges_.v_max_lo, ranges_.v_max_hi),
                 rng.uniform(ranges_.c_in_lo, ranges_.c_in_hi),
                 rng.uniform(ranges_.wall_permeability_lo,
                             ranges_.wall_permeability_hi)};
  mu.network.seeds_fraction =
      rng.uniform(ranges_.seeds_fraction_lo, ranges_.seeds_fraction_hi);
  mu.network.density_sv =
      rng.uniform(ranges_.density_sv_lo, ranges_.density_sv_hi);
  mu.network.seed = rng.next_u64();
  return mu;
}

VascularLayout layout_from_descriptor(const NetworkDescriptor& net) {
  RngStream stream(net.seed, "vascular-layout");
  return generate_network(net.density_sv, net.seeds_fraction, stream);
}

VascularLayout OxygenModel::layout_for(const ParameterSample& mu) const {
  return layout_from_descriptor(mu.network);
}

TissueProblem OxygenModel::problem_for(const ParameterSample& mu) const {
  TissueProblem p = base_;
  p.v_max = mu.physical[kParamVmax];
  p.c_in = mu.physical[kParamCin];
  p.wall_permeability = mu.physical[kParamPermeability];
  return p;
}

FieldSolution OxygenModel::solve(const ParameterSample& mu) const {
  validate_parameters(mu);
  return fom_solve(problem_for(mu), layout_for(mu), grid_);
}

}  // namespace mfuq
