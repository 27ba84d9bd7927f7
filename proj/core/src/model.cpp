#include "mfuq/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "mfuq/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "snapshot container assumes a little-endian host");

namespace mfuq {

void validate(const GridSpec& grid) {
  if (grid.nx < 2 || grid.ny < 2) {
    throw DomainError("GridSpec: nx and ny must be at least 2");
  }
  if (!(grid.spacing > 0.0)) {
    throw DomainError("GridSpec: spacing must be positive");
  }
}

void validate(const FieldSolution& field) {
  validate(field.grid);
  if (static_cast<std::int64_t>(field.values.size()) !=
      field.grid.num_nodes()) {
    throw DomainError("FieldSolution: value count does not match grid");
  }
  for (double v : field.values) {
    if (!std::isfinite(v)) {
      throw DomainError("FieldSolution: non-finite value");
    }
    if (v < -1e-10) {
      throw DomainError("FieldSolution: negative concentration");
    }
  }
}

void validate(const SnapshotSet& set) {
  validate(set.grid);
  if (set.params.size() != set.fields.size()) {
    throw DomainError("SnapshotSet: params and fields misaligned");
  }
  for (std::size_t i = 0; i < set.fields.size(); ++i) {
    if (static_cast<std::int64_t>(set.fields[i].size()) !=
        set.grid.num_nodes()) {
      throw DomainError("SnapshotSet: field size does not match grid");
    }
    if (i > 0 && set.params[i].id <= set.params[i - 1].id) {
      throw DomainError("SnapshotSet: ids must be strictly increasing");
    }
  }
}

CostLedger::CostLedger(double budget) : budget_(budget) {
  if (!(budget > 0.0)) throw DomainError("CostLedger: budget must be positive");
}

void CostLedger::charge(std::string_view component, double amount) {
  if (amount < 0.0) throw DomainError("CostLedger: negative charge");
  std::lock_guard<std::mutex> lock(mutex_);
  double grand = 0.0;
  for (const auto& [name, value] : totals_) grand += value;
  if (grand + amount > budget_ * (1.0 + 1e-12) + 1e-12) {
    throw BudgetError("CostLedger: charge would exceed declared budget");
  }
  auto it = totals_.find(component);
  if (it == totals_.end()) {
    totals_.emplace(std::string(component), amount);
  } else {
    it->second += amount;
  }
}

double CostLedger::total(std::string_view component) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = totals_.find(component);
  return it == totals_.end() ? 0.0 : it->second;
}

double CostLedger::grand_total() const {
  std::lock_guard<std::mutex> lock(mutex_);
  double grand = 0.0;
  for (const auto& [name, value] : totals_) grand += value;
  return grand;
}

std::map<std::string, double> CostLedger::totals() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return {totals_.begin(), totals_.end()};
}

FieldSolution forward_model_solve(const ForwardModel& model,
                                  const ParameterSample& mu,
                                  CostLedger& ledger, double w0) {
  model.validate_parameters(mu);
  ledger.charge("fom", w0);
  return model.solve(mu);
}

namespace {

constexpr char kMagic[8] = {'M', 'F', 'U', 'Q', 'S', 'N', 'A', 'P'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void write_string(std::ostream& out, const std::string& s) {
  const auto len = static_cast<std::uint32_t>(s.size());
  write_pod(out, len);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path,
           const char* what) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw IoError("snapshot file " + path.string() + ": truncated reading " +
                  what);
  }
  return value;
}

std::string read_string(std::istream& in, const std::filesystem::path& path,
                        const char* what) {
  const auto len = read_pod<std::uint32_t>(in, path, what);
  if (len > (1u << 20)) {
    throw IoError("snapshot file " + path.string() + ": corrupt string length");
  }
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) {
    throw IoError("snapshot file " + path.string() + ": truncated reading " +
                  what);
  }
  return s;
}

}  // namespace

void save_snapshots(const SnapshotSet& set,
                    const std::filesystem::path& path) {
  validate(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("snapshot file " + path.string() + ": cannot open for write");
  }
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kSnapshotFormatVersion);
  write_pod(out, static_cast<std::uint32_t>(set.grid.num_nodes()));
  write_pod(out, static_cast<std::uint32_t>(set.params.size()));
  write_pod(out, set.grid.nx);
  write_pod(out, set.grid.ny);
  write_pod(out, set.grid.spacing);
  write_pod(out, set.seed);
  write_string(out, set.solver_version);
  for (std::size_t k = 0; k < set.params.size(); ++k) {
    const ParameterSample& mu = set.params[k];
    write_pod(out, mu.id);
    write_string(out, mu.stream_label);
    write_pod(out, static_cast<std::uint32_t>(mu.physical.size()));
    for (double v : mu.physical) write_pod(out, v);
    write_pod(out, mu.network.density_sv);
    write_pod(out, mu.network.seeds_fraction);
    write_pod(out, mu.network.seed);
    out.write(reinterpret_cast<const char*>(set.fields[k].data()),
              static_cast<std::streamsize>(set.fields[k].size() *
                                           sizeof(double)));
  }
  if (!out) {
    throw IoError("snapshot file " + path.string() + ": write failed");
  }
}

SnapshotSet load_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("snapshot file " + path.string() + ": cannot open");
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("snapshot file " + path.string() + ": bad magic");
  }
  const auto version = read_pod<std::uint32_t>(in, path, "version");
  if (version != kSnapshotFormatVersion) {
    throw IoError("snapshot file " + path.string() +
                  ": format version mismatch (found " +
                  std::to_string(version) + ", expected " +
                  std::to_string(kSnapshotFormatVersion) + ")");
  }
  const auto n_h = read_pod<std::uint32_t>(in, path, "node count");
  const auto count = read_pod<std::uint32_t>(in, path, "record count");
  SnapshotSet set;
  set.grid.nx = read_pod<std::int32_t>(in, path, "grid nx");
  set.grid.ny = read_pod<std::int32_t>(in, path, "grid ny");
  set.grid.spacing = read_pod<double>(in, path, "grid spacing");
  validate(set.grid);
  if (set.grid.num_nodes() != static_cast<std::int64_t>(n_h)) {
    throw IoError("snapshot file " + path.string() +
                  ": grid does not match declared node count");
  }
  set.seed = read_pod<std::uint64_t>(in, path, "seed");
  set.solver_version = read_string(in, path, "solver version");
  set.params.resize(count);
  set.fields.resize(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    ParameterSample& mu = set.params[k];
    mu.id = read_pod<std::int64_t>(in, path, "sample id");
    mu.stream_label = read_string(in, path, "stream label");
    const auto n_phys = read_pod<std::uint32_t>(in, path, "physical count");
    if (n_phys > 1024) {
      throw IoError("snapshot file " + path.string() +
                    ": corrupt physical parameter count");
    }
    mu.physical.resize(n_phys);
    for (auto& v : mu.physical) v = read_pod<double>(in, path, "physical");
    mu.network.density_sv = read_pod<double>(in, path, "density");
    mu.network.seeds_fraction = read_pod<double>(in, path, "seeds fraction");
    mu.network.seed = read_pod<std::uint64_t>(in, path, "network seed");
    set.fields[k].resize(n_h);
    in.read(reinterpret_cast<char*>(set.fields[k].data()),
            static_cast<std::streamsize>(n_h * sizeof(double)));
    if (!in) {
      throw IoError("snapshot file " + path.string() +
                    ": truncated reading field " + std::to_string(k));
    }
  }
  validate(set);
  return set;
}

}  // namespace mfuq
