#include "mfuq/pod_rom.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "mfuq/errors.hpp"
#include "mfuq/oxygen.hpp"

namespace mfuq {

namespace {

constexpr char kSurrogateMagic[8] = {'M', 'F', 'U', 'Q',
                                     'S', 'U', 'R', 'R'};
constexpr std::uint32_t kSurrogateFormatVersion = 1;

constexpr int kDistanceBins = 8;
constexpr double kDistanceBinWidth = 0.05;
constexpr double kCentroidReach = 0.2;
constexpr int kGeometryFeatures = kDistanceBins + 5;

// Closure regressor columns: distance, inlet, distance*inlet, constant.
Eigen::Matrix<double, Eigen::Dynamic, 4> closure_design(
    const GeometryFields& geom) {
  const auto n = static_cast<Eigen::Index>(geom.distance.size());
  Eigen::Matrix<double, Eigen::Dynamic, 4> g(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = geom.distance[static_cast<std::size_t>(i)];
    const double e = geom.inlet[static_cast<std::size_t>(i)];
    g(i, 0) = d;
    g(i, 1) = e;
    g(i, 2) = d * e;
    g(i, 3) = 1.0;
  }
  return g;
}

double mixed_loss(const std::vector<Eigen::VectorXd>& residuals,
                  const std::vector<Eigen::Matrix<double, Eigen::Dynamic, 4>>&
                      designs,
                  const Eigen::Vector4d& theta, double xi) {
  const std::size_t n = residuals.size();
  const double root_nodes = std::sqrt(static_cast<double>(residuals[0].size()));
  double mean_term = 0.0;
  double worst = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const Eigen::VectorXd e = residuals[s] - designs[s] * theta;
    mean_term += e.norm() / root_nodes;
    worst = std::max(worst, e.lpNorm<Eigen::Infinity>());
  }
  return xi * mean_term / static_cast<double>(n) + (1.0 - xi) * worst;
}

Eigen::Vector4d mixed_loss_subgradient(
    const std::vector<Eigen::VectorXd>& residuals,
    const std::vector<Eigen::Matrix<double, Eigen::Dynamic, 4>>& designs,
    const Eigen::Vector4d& theta, double xi) {
  const std::size_t n = residuals.size();
  const double root_nodes = std::sqrt(static_cast<double>(residuals[0].size()));
  Eigen::Vector4d grad = Eigen::Vector4d::Zero();
  double worst = -1.0;
  std::size_t worst_s = 0;
  Eigen::Index worst_i = 0;
  double worst_sign = 1.0;
  for (std::size_t s = 0; s < n; ++s) {
    const Eigen::VectorXd e = residuals[s] - designs[s] * theta;
    const double norm = e.norm();
    if (norm > 0.0) {
      grad -= xi / (static_cast<double>(n) * root_nodes * norm) *
              (designs[s].transpose() * e);
    }
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      const double a = std::abs(e[i]);
      // Strictly greater: ties resolve to the first attaining node.
      if (a > worst) {
        worst = a;
        worst_s = s;
        worst_i = i;
        worst_sign = e[i] >= 0.0 ? 1.0 : -1.0;
      }
    }
  }
  if (worst > 0.0) {
    grad -= (1.0 - xi) * worst_sign *
            designs[worst_s].row(worst_i).transpose();
  }
  return grad;
}

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n,
                const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw IoError("truncated surrogate file: " + path);
  }
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  write_bytes(out, &rows, sizeof rows);
  write_bytes(out, &cols, sizeof cols);
  write_bytes(out, m.data(), sizeof(double) * m.size());
}

Eigen::MatrixXd read_matrix(std::ifstream& in, const std::string& path) {
  std::uint64_t rows = 0, cols = 0;
  read_bytes(in, &rows, sizeof rows, path);
  read_bytes(in, &cols, sizeof cols, path);
  if (rows > (1u << 24) || cols > (1u << 24)) {
    throw IoError("implausible matrix extent in surrogate file: " + path);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  read_bytes(in, m.data(), sizeof(double) * m.size(), path);
  return m;
}

Eigen::VectorXd read_vector(std::ifstream& in, const std::string& path) {
  const Eigen::MatrixXd m = read_matrix(in, path);
  if (m.cols() != 1) {
    throw IoError("expected a column vector in surrogate file: " + path);
  }
  return m.col(0);
}

}  // namespace

PodBasis compute_pod_basis(const Eigen::MatrixXd& snapshots,
                           std::int32_t rank) {
  if (snapshots.rows() == 0 || snapshots.cols() == 0) {
    throw InsufficientDataError("empty snapshot matrix");
  }
  const auto max_rank =
      static_cast<std::int32_t>(std::min(snapshots.rows(), snapshots.cols()));
  if (rank < 1 || rank > max_rank) {
    throw InsufficientDataError(
        "basis rank must lie in [1, min(nodes, samples)]");
  }
  if (!snapshots.allFinite()) {
    throw DomainError("snapshot matrix has non-finite entries");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots, Eigen::ComputeThinU);
  PodBasis basis;
  basis.rank = rank;
  basis.singular_values = svd.singularValues();
  basis.modes = svd.matrixU().leftCols(rank);
  for (Eigen::Index c = 0; c < basis.modes.cols(); ++c) {
    Eigen::Index peak = 0;
    basis.modes.col(c).cwiseAbs().maxCoeff(&peak);
    if (basis.modes(peak, c) < 0.0) basis.modes.col(c) = -basis.modes.col(c);
  }
  return basis;
}

GeometryFields geometry_fields(const ParameterSample& mu,
                               const GridSpec& grid) {
  const VascularLayout layout = layout_from_descriptor(mu.network);
  return GeometryFields{extravascular_distance(layout, grid),
                        inlet_indicator(layout, grid)};
}

const GeometryFields& cached_geometry(GeometryCache& cache,
                                      const ParameterSample& mu,
                                      const GridSpec& grid) {
  const auto key = std::make_tuple(mu.network.density_sv,
                                   mu.network.seeds_fraction, mu.network.seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, geometry_fields(mu, grid)).first;
  }
  return it->second;
}

std::vector<double> surrogate_features(const ParameterSample& mu,
                                       const GeometryFields& geom,
                                       const GridSpec& grid) {
  const std::size_t nodes = geom.distance.size();
  if (nodes != static_cast<std::size_t>(grid.num_nodes()) ||
      geom.inlet.size() != nodes) {
    throw DomainError("geometry fields do not match the grid");
  }

  std::array<double, kGeometryFeatures> g{};
  double mean_d = 0.0;
  double max_d = 0.0;
  double inlet_frac = 0.0;
  double wsum = 0.0, cx = 0.0, cy = 0.0;
  for (std::int32_t j = 0; j < grid.ny; ++j) {
    for (std::int32_t i = 0; i < grid.nx; ++i) {
      const double d =
          geom.distance[static_cast<std::size_t>(grid.index(i, j))];
      const double e = geom.inlet[static_cast<std::size_t>(grid.index(i, j))];
      const int bin = std::min(kDistanceBins - 1,
                               static_cast<int>(d / kDistanceBinWidth));
      g[static_cast<std::size_t>(bin)] += 1.0;
      mean_d += d;
      max_d = std::max(max_d, d);
      inlet_frac += e;
      const double w = std::max(0.0, 1.0 - d / kCentroidReach);
      wsum += w;
      cx += w * grid.x(i);
      cy += w * grid.y(j);
    }
  }
  const double inv_nodes = 1.0 / static_cast<double>(nodes);
  for (int b = 0; b < kDistanceBins; ++b) g[static_cast<std::size_t>(b)] *= inv_nodes;
  g[kDistanceBins] = mean_d * inv_nodes;
  g[kDistanceBins + 1] = max_d;
  g[kDistanceBins + 2] = inlet_frac * inv_nodes;
  g[kDistanceBins + 3] = wsum > 0.0 ? cx / wsum : 0.5;
  g[kDistanceBins + 4] = wsum > 0.0 ? cy / wsum : 0.5;

  const std::size_t p = mu.physical.size();
  std::vector<double> feat;
  feat.reserve(1 + p + p * (p + 1) / 2 + kGeometryFeatures +
               p * kGeometryFeatures);
  feat.push_back(1.0);
  for (double v : mu.physical) feat.push_back(v);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      feat.push_back(mu.physical[a] * mu.physical[b]);
    }
  }
  for (double v : g) feat.push_back(v);
  for (double v : mu.physical) {
    for (double x : g) feat.push_back(v * x);
  }
  return feat;
}

CoefficientRegressor train_coefficient_regressor(
    const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
    double ridge_floor) {
  if (features.rows() != targets.rows()) {
    throw DomainError("feature and target sample counts differ");
  }
  if (features.rows() < 1) {
    throw InsufficientDataError("regressor needs at least one sample");
  }
  const Eigen::Index n = features.rows();
  const Eigen::Index f = features.cols();

  CoefficientRegressor reg;
  reg.feat_mean = features.colwise().mean();
  reg.feat_scale = Eigen::VectorXd::Ones(f);
  for (Eigen::Index c = 0; c < f; ++c) {
    const double sd = std::sqrt(
        (features.col(c).array() - reg.feat_mean[c]).square().sum() /
        static_cast<double>(n));
    reg.feat_scale[c] = sd > 1e-300 ? sd : 1.0;
  }
  reg.target_mean = targets.colwise().mean();

  // Centering removes the intercept from the penalized system; constant
  // columns (the bias included) become zero and carry no weight.
  Eigen::MatrixXd phi = features;
  for (Eigen::Index c = 0; c < f; ++c) {
    phi.col(c) = (phi.col(c).array() - reg.feat_mean[c]) / reg.feat_scale[c];
  }
  Eigen::MatrixXd ty = targets;
  ty.rowwise() -= reg.target_mean.transpose();

  if (n == 1) {
    // Nothing to cross-validate; the mean predictor is exact here.
    reg.weights = Eigen::MatrixXd::Zero(f, targets.cols());
    reg.ridge = std::max(ridge_floor, 1e-12);
    return reg;
  }

  const Eigen::MatrixXd gram = phi.transpose() * phi;
  const Eigen::MatrixXd moment = phi.transpose() * ty;

  // The penalty is picked by k-fold cross-validation with genuine
  // refits, so an interpolating fit is scored on samples it never saw
  // instead of being flattered by its own training residuals.
  const Eigen::Index folds = std::min<Eigen::Index>(5, n);
  const double floor_ridge = std::max(ridge_floor, 1e-12);
  double best_ridge = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 14; ++step) {
    const double ridge = floor_ridge * std::pow(10.0, step);
    double score = 0.0;
    for (Eigen::Index fold = 0; fold < folds && std::isfinite(score);
         ++fold) {
      Eigen::MatrixXd g = gram;
      Eigen::MatrixXd m = moment;
      Eigen::Index held = 0;
      for (Eigen::Index i = fold; i < n; i += folds) {
        g.noalias() -= phi.row(i).transpose() * phi.row(i);
        m.noalias() -= phi.row(i).transpose() * ty.row(i);
        ++held;
      }
      g.diagonal().array() += ridge * static_cast<double>(n - held);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
      if (ldlt.info() != Eigen::Success) {
        score = std::numeric_limits<double>::infinity();
        break;
      }
      const Eigen::MatrixXd w = ldlt.solve(m);
      if (!w.allFinite()) {
        score = std::numeric_limits<double>::infinity();
        break;
      }
      for (Eigen::Index i = fold; i < n; i += folds) {
        score += (ty.row(i) - phi.row(i) * w).squaredNorm();
      }
    }
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      best_ridge = ridge;
    }
  }

  if (std::isfinite(best_score)) {
    Eigen::MatrixXd g = gram;
    g.diagonal().array() += best_ridge * static_cast<double>(n);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    if (ldlt.info() == Eigen::Success) {
      const Eigen::MatrixXd w = ldlt.solve(moment);
      if (w.allFinite()) {
        reg.weights = w;
        reg.ridge = best_ridge;
        return reg;
      }
    }
  }
  // Guaranteed fallback: predict the mean coefficients.
  reg.weights = Eigen::MatrixXd::Zero(f, targets.cols());
  reg.ridge = std::numeric_limits<double>::infinity();
  return reg;
}

SurrogateModel train_surrogate(const SnapshotSet& snapshots,
                               const SurrogateTrainingOptions& options) {
  validate(snapshots);
  if (options.xi < 0.0 || options.xi > 1.0 || !std::isfinite(options.xi)) {
    throw ConfigError("closure mix weight must lie in [0, 1]");
  }
  if (options.closure_epochs < 0) {
    throw ConfigError("closure epochs must be nonnegative");
  }
  const auto n = static_cast<Eigen::Index>(snapshots.fields.size());
  const auto nodes = static_cast<Eigen::Index>(snapshots.grid.num_nodes());

  Eigen::MatrixXd y(nodes, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& values = snapshots.fields[static_cast<std::size_t>(s)];
    y.col(s) = Eigen::Map<const Eigen::VectorXd>(values.data(), nodes);
  }

  SurrogateModel rom;
  rom.grid_ = snapshots.grid;
  rom.xi_ = options.xi;
  rom.basis_ = compute_pod_basis(y, options.pod_rank);

  GeometryCache local;
  GeometryCache& cache = options.geometry ? *options.geometry : local;

  Eigen::MatrixXd features;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 4>> designs;
  designs.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    const ParameterSample& mu = snapshots.params[static_cast<std::size_t>(s)];
    const GeometryFields& geom = cached_geometry(cache, mu, snapshots.grid);
    const std::vector<double> phi =
        surrogate_features(mu, geom, snapshots.grid);
    if (s == 0) {
      features.resize(n, static_cast<Eigen::Index>(phi.size()));
    }
    if (static_cast<Eigen::Index>(phi.size()) != features.cols()) {
      throw DomainError("inconsistent feature dimension across snapshots");
    }
    features.row(s) = Eigen::Map<const Eigen::VectorXd>(
                          phi.data(), static_cast<Eigen::Index>(phi.size()))
                          .transpose();
    designs.push_back(closure_design(geom));
  }

  const Eigen::MatrixXd targets =
      (rom.basis_.modes.transpose() * y).transpose();  // n x rank
  rom.regressor_ =
      train_coefficient_regressor(features, targets, options.ridge_floor);

  // Closure stage: the coefficient regressor stays frozen; only theta
  // moves, by monotone backtracking subgradient steps from zero.
  std::vector<Eigen::VectorXd> residuals;
  residuals.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    Eigen::VectorXd phi = features.row(s).transpose();
    phi = ((phi - rom.regressor_.feat_mean).array() /
           rom.regressor_.feat_scale.array())
              .matrix();
    const Eigen::VectorXd coeffs =
        rom.regressor_.weights.transpose() * phi + rom.regressor_.target_mean;
    residuals.push_back(y.col(s) - rom.basis_.modes * coeffs);
  }

  Eigen::Vector4d theta = Eigen::Vector4d::Zero();
  double loss = mixed_loss(residuals, designs, theta, options.xi);
  for (std::int32_t epoch = 0; epoch < options.closure_epochs; ++epoch) {
    const Eigen::Vector4d grad =
        mixed_loss_subgradient(residuals, designs, theta, options.xi);
    const double gnorm2 = grad.squaredNorm();
    if (gnorm2 <= 0.0 || loss <= 0.0) break;
    double step = loss / gnorm2;
    bool improved = false;
    for (int half = 0; half < 40; ++half, step *= 0.5) {
      const Eigen::Vector4d cand = theta - step * grad;
      const double cand_loss = mixed_loss(residuals, designs, cand, options.xi);
      if (cand_loss < loss) {
        theta = cand;
        loss = cand_loss;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  rom.closure_ = theta;
  return rom;
}

double closure_loss(const SurrogateModel& rom, const SnapshotSet& snapshots,
                    double xi, GeometryCache* geometry) {
  validate(snapshots);
  if (snapshots.fields.empty()) {
    throw InsufficientDataError("closure loss needs at least one snapshot");
  }
  GeometryCache local;
  GeometryCache& cache = geometry ? *geometry : local;
  const auto n = static_cast<Eigen::Index>(snapshots.fields.size());
  const auto nodes = static_cast<Eigen::Index>(snapshots.grid.num_nodes());
  std::vector<Eigen::VectorXd> residuals;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 4>> designs;
  for (Eigen::Index s = 0; s < n; ++s) {
    const ParameterSample& mu = snapshots.params[static_cast<std::size_t>(s)];
    const GeometryFields& geom = cached_geometry(cache, mu, snapshots.grid);
    const FieldSolution pred = rom.evaluate_with_geometry(mu, geom);
    const auto& truth = snapshots.fields[static_cast<std::size_t>(s)];
    Eigen::VectorXd e(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
      e[i] = truth[static_cast<std::size_t>(i)] -
             pred.values[static_cast<std::size_t>(i)];
    }
    residuals.push_back(std::move(e));
    designs.push_back(Eigen::Matrix<double, Eigen::Dynamic, 4>::Zero(nodes, 4));
  }
  return mixed_loss(residuals, designs, Eigen::Vector4d::Zero(), xi);
}

FieldSolution SurrogateModel::evaluate(const ParameterSample& mu) const {
  return evaluate_with_geometry(mu, geometry_fields(mu, grid_));
}

FieldSolution SurrogateModel::evaluate_with_geometry(
    const ParameterSample& mu, const GeometryFields& geom) const {
  if (regressor_.weights.size() == 0) {
    throw DomainError("surrogate model is not trained");
  }
  const std::vector<double> phi = surrogate_features(mu, geom, grid_);
  if (static_cast<Eigen::Index>(phi.size()) != regressor_.weights.rows()) {
    throw DomainError("parameter dimension does not match trained surrogate");
  }
  Eigen::VectorXd z(static_cast<Eigen::Index>(phi.size()));
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    z[c] = (phi[static_cast<std::size_t>(c)] - regressor_.feat_mean[c]) /
           regressor_.feat_scale[c];
  }
  const Eigen::VectorXd coeffs =
      regressor_.weights.transpose() * z + regressor_.target_mean;
  Eigen::VectorXd field = basis_.modes * coeffs;
  const auto nodes = static_cast<std::size_t>(field.size());
  FieldSolution out;
  out.grid = grid_;
  out.values.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double d = geom.distance[i];
    const double e = geom.inlet[i];
    const double corrected = field[static_cast<Eigen::Index>(i)] +
                             closure_[0] * d + closure_[1] * e +
                             closure_[2] * d * e + closure_[3];
    out.values[i] = std::max(corrected, 0.0);
  }
  return out;
}

void save_surrogate(const SurrogateModel& rom, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open surrogate file for writing: " + path);
  write_bytes(out, kSurrogateMagic, sizeof kSurrogateMagic);
  write_bytes(out, &kSurrogateFormatVersion, sizeof kSurrogateFormatVersion);
  write_bytes(out, &rom.grid_.nx, sizeof rom.grid_.nx);
  write_bytes(out, &rom.grid_.ny, sizeof rom.grid_.ny);
  write_bytes(out, &rom.grid_.spacing, sizeof rom.grid_.spacing);
  write_bytes(out, &rom.basis_.rank, sizeof rom.basis_.rank);
  write_matrix(out, rom.basis_.modes);
  write_matrix(out, rom.basis_.singular_values);
  write_matrix(out, rom.regressor_.weights);
  write_matrix(out, rom.regressor_.feat_mean);
  write_matrix(out, rom.regressor_.feat_scale);
  write_matrix(out, rom.regressor_.target_mean);
  write_bytes(out, &rom.regressor_.ridge, sizeof rom.regressor_.ridge);
  write_matrix(out, rom.closure_);
  write_bytes(out, &rom.xi_, sizeof rom.xi_);
  if (!out) throw IoError("failed writing surrogate file: " + path);
}

SurrogateModel load_surrogate(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open surrogate file: " + path);
  char magic[8] = {};
  read_bytes(in, magic, sizeof magic, path);
  if (std::memcmp(magic, kSurrogateMagic, sizeof magic) != 0) {
    throw IoError("not a surrogate file: " + path);
  }
  std::uint32_t version = 0;
  read_bytes(in, &version, sizeof version, path);
  if (version != kSurrogateFormatVersion) {
    throw IoError("unsupported surrogate format version in " + path);
  }
  SurrogateModel rom;
  read_bytes(in, &rom.grid_.nx, sizeof rom.grid_.nx, path);
  read_bytes(in, &rom.grid_.ny, sizeof rom.grid_.ny, path);
  read_bytes(in, &rom.grid_.spacing, sizeof rom.grid_.spacing, path);
  read_bytes(in, &rom.basis_.rank, sizeof rom.basis_.rank, path);
  rom.basis_.modes = read_matrix(in, path);
  rom.basis_.singular_values = read_vector(in, path);
  rom.regressor_.weights = read_matrix(in, path);
  rom.regressor_.feat_mean = read_vector(in, path);
  rom.regressor_.feat_scale = read_vector(in, path);
  rom.regressor_.target_mean = read_vector(in, path);
  read_bytes(in, &rom.regressor_.ridge, sizeof rom.regressor_.ridge, path);
  const Eigen::VectorXd theta = read_vector(in, path);
  if (theta.size() != 4) {
    throw IoError("malformed closure block in surrogate file: " + path);
  }
  rom.closure_ = theta;
  read_bytes(in, &rom.xi_, sizeof rom.xi_, path);
  validate(rom.grid_);
  if (rom.basis_.modes.rows() != rom.grid_.num_nodes() ||
      rom.basis_.rank != rom.basis_.modes.cols() ||
      rom.regressor_.weights.cols() != rom.basis_.modes.cols() ||
      rom.regressor_.feat_mean.size() != rom.regressor_.weights.rows() ||
      rom.regressor_.feat_scale.size() != rom.regressor_.weights.rows() ||
      rom.regressor_.target_mean.size() != rom.regressor_.weights.cols()) {
    throw IoError("inconsistent surrogate dimensions in " + path);
  }
  return rom;
}

}  // namespace mfuq
