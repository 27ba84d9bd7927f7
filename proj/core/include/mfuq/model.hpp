#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mfuq/rng.hpp"

namespace mfuq {

// Generative coordinates of a random vascular layout. Opaque to the
// estimator pipeline; the testbed regenerates the geometry from them.
struct NetworkDescriptor {
  double density_sv = 6000.0;   // vessel surface per tissue volume, 1/m
  double seeds_fraction = 0.0;  // clustering control in [0, 1)
  std::uint64_t seed = 0;       // layout substream seed
};

// One sampled model input: physical coefficients plus network geometry.
struct ParameterSample {
  std::int64_t id = 0;
  std::vector<double> physical;
  NetworkDescriptor network;
  std::string stream_label;
};

// Uniform vertex-centered grid on the unit square.
struct GridSpec {
  std::int32_t nx = 40;
  std::int32_t ny = 40;
  double spacing = 1.0 / 39.0;

  std::int64_t num_nodes() const {
    return static_cast<std::int64_t>(nx) * ny;
  }
  double x(std::int32_t i) const { return spacing * i; }
  double y(std::int32_t j) const { return spacing * j; }
  std::int64_t index(std::int32_t i, std::int32_t j) const {
    return static_cast<std::int64_t>(j) * nx + i;
  }
  bool operator==(const GridSpec& other) const = default;
};

void validate(const GridSpec& grid);

// Scalar field on a grid, row-major storage values[j * nx + i].
struct FieldSolution {
  GridSpec grid;
  std::vector<double> values;
};

// Throws unless the value count matches the grid and every entry is finite
// and no more negative than the positivity tolerance.
void validate(const FieldSolution& field);

// Parameter-field pairs with provenance; fields share one grid and ids
// strictly increase.
struct SnapshotSet {
  GridSpec grid;
  std::vector<ParameterSample> params;
  std::vector<std::vector<double>> fields;
  std::uint64_t seed = 0;
  std::string solver_version;
};

void validate(const SnapshotSet& set);

// Named scalar functional of a field solution.
struct QoiFunctional {
  std::string name;
  std::function<double(const FieldSolution&)> evaluate;
};

// Full-order forward model seam used by the campaign pipeline.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual GridSpec grid() const = 0;
  // Throws DomainError when mu lies outside the validated parameter domain.
  virtual void validate_parameters(const ParameterSample& mu) const = 0;
  virtual ParameterSample sample_parameters(RngStream& rng) const = 0;
  virtual FieldSolution solve(const ParameterSample& mu) const = 0;
};

// Thread-safe declared-cost accounting against a fixed budget. Charges
// that would push the grand total past the budget throw BudgetError.
class CostLedger {
 public:
  explicit CostLedger(double budget);

  void charge(std::string_view component, double amount);
  double total(std::string_view component) const;
  double grand_total() const;
  double budget() const { return budget_; }
  std::map<std::string, double> totals() const;

 private:
  double budget_;
  mutable std::mutex mutex_;
  std::map<std::string, double, std::less<>> totals_;
};

// Solves mu with the model and charges the declared solve cost w0 to the
// ledger's "fom" component.
FieldSolution forward_model_solve(const ForwardModel& model,
                                  const ParameterSample& mu,
                                  CostLedger& ledger, double w0);

// Binary snapshot container (magic "MFUQSNAP", version 1, little-endian,
// row-major f64 fields, each preceded by its parameter record).
void save_snapshots(const SnapshotSet& set, const std::filesystem::path& path);
SnapshotSet load_snapshots(const std::filesystem::path& path);

inline constexpr std::uint32_t kSnapshotFormatVersion = 1;

}  // namespace mfuq
