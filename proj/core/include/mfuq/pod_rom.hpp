#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mfuq/model.hpp"

namespace mfuq {

// Orthonormal basis of the leading left singular subspace of a snapshot
// matrix (nodes x samples).
struct PodBasis {
  Eigen::MatrixXd modes;            // nodes x rank, orthonormal columns
  Eigen::VectorXd singular_values;  // all min(nodes, samples) values
  std::int32_t rank = 0;
};

// rank must satisfy 1 <= rank <= min(nodes, samples). Columns are sign
// fixed: the entry of largest magnitude in each mode is positive.
PodBasis compute_pod_basis(const Eigen::MatrixXd& snapshots,
                           std::int32_t rank);

// Per-node geometry descriptors derived from a sample's vascular layout.
struct GeometryFields {
  std::vector<double> distance;  // nearest-vessel distance per node
  std::vector<double> inlet;     // inlet indicator per node
};

GeometryFields geometry_fields(const ParameterSample& mu,
                               const GridSpec& grid);

// Reusable geometry store keyed by the network descriptor. Not thread
// safe; intended for a single training pipeline that revisits the same
// snapshots.
using GeometryCache =
    std::map<std::tuple<double, double, std::uint64_t>, GeometryFields>;

const GeometryFields& cached_geometry(GeometryCache& cache,
                                      const ParameterSample& mu,
                                      const GridSpec& grid);

// Scalar summaries of one sample: 1 bias, the physical parameters and
// their pairwise products, 13 geometry descriptors (8 distance histogram
// bins, mean and max distance, inlet fraction, near-vessel centroid x
// and y), and every physical x geometry product.
std::vector<double> surrogate_features(const ParameterSample& mu,
                                       const GeometryFields& geom,
                                       const GridSpec& grid);

// Ridge regression from standardized, centered features to basis
// coefficients. The intercept is carried by target_mean and never
// penalized.
struct CoefficientRegressor {
  Eigen::MatrixXd weights;      // features x rank
  Eigen::VectorXd feat_mean;    // per feature
  Eigen::VectorXd feat_scale;   // per feature
  Eigen::VectorXd target_mean;  // per rank
  double ridge = 0.0;           // penalty actually used
};

// The penalty is picked from a log-spaced grid (never below ridge_floor)
// by deterministic 5-fold cross-validation with per-fold refits; falls
// back to the mean predictor if no candidate yields finite weights.
CoefficientRegressor train_coefficient_regressor(
    const Eigen::MatrixXd& features,  // samples x features
    const Eigen::MatrixXd& targets,   // samples x rank
    double ridge_floor);

struct SurrogateTrainingOptions {
  std::int32_t pod_rank = 10;
  double xi = 0.75;            // weight of the mean term in the closure loss
  std::int32_t closure_epochs = 10;
  double ridge_floor = 1e-8;
  GeometryCache* geometry = nullptr;  // optional shared store
};

// Reduced model: POD reconstruction from regressed coefficients plus a
// per-node closure that is linear in (distance, inlet, their product, 1).
class SurrogateModel {
 public:
  SurrogateModel() = default;

  FieldSolution evaluate(const ParameterSample& mu) const;
  FieldSolution evaluate_with_geometry(const ParameterSample& mu,
                                       const GeometryFields& geom) const;

  const GridSpec& grid() const { return grid_; }
  const PodBasis& basis() const { return basis_; }
  const CoefficientRegressor& regressor() const { return regressor_; }
  const Eigen::Vector4d& closure() const { return closure_; }
  double xi() const { return xi_; }

 private:
  friend SurrogateModel train_surrogate(const SnapshotSet&,
                                        const SurrogateTrainingOptions&);
  friend SurrogateModel load_surrogate(const std::string&);
  friend void save_surrogate(const SurrogateModel&, const std::string&);

  GridSpec grid_;
  PodBasis basis_;
  CoefficientRegressor regressor_;
  Eigen::Vector4d closure_ = Eigen::Vector4d::Zero();
  double xi_ = 0.75;
};

// Two stages: ridge-regressed basis coefficients first, then the closure
// trained by monotone backtracking subgradient steps on the mixed loss
// xi * mean RMS error + (1 - xi) * worst node error, with the regressor
// frozen.
SurrogateModel train_surrogate(const SnapshotSet& snapshots,
                               const SurrogateTrainingOptions& options);

// Mixed closure loss of a trained surrogate on a snapshot set; exposed
// for studies and tests.
double closure_loss(const SurrogateModel& rom, const SnapshotSet& snapshots,
                    double xi, GeometryCache* geometry);

void save_surrogate(const SurrogateModel& rom, const std::string& path);
SurrogateModel load_surrogate(const std::string& path);

}  // namespace mfuq
