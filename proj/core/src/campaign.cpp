#include "mfuq/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mfuq/errors.hpp"
#include "mfuq/stats.hpp"

namespace mfuq {

namespace {

using nlohmann::ordered_json;

constexpr const char* kSolverTag = "campaign-fom-1";

class PhaseClock {
 public:
  PhaseClock(bool enabled, std::vector<PhaseTiming>* out)
      : enabled_(enabled), out_(out) {}

  template <typename F>
  void run(const std::string& phase, F&& body) {
    if (!enabled_) {
      body();
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    out_->push_back({phase, std::chrono::duration<double>(t1 - t0).count()});
  }

 private:
  bool enabled_;
  std::vector<PhaseTiming>* out_;
};

// Solves every sample, optionally across worker threads. Slots are
// preallocated and indexed by position, so the result is independent of
// scheduling order; the first captured exception is rethrown.
std::vector<FieldSolution> solve_batch(const ForwardModel& model,
                                       const std::vector<ParameterSample>& mus,
                                       std::int32_t workers) {
  std::vector<FieldSolution> fields(mus.size());
  if (workers <= 1 || mus.size() <= 1) {
    for (std::size_t i = 0; i < mus.size(); ++i) {
      fields[i] = model.solve(mus[i]);
    }
    return fields;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= mus.size()) return;
      try {
        fields[i] = model.solve(mus[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count =
      std::min<std::size_t>(static_cast<std::size_t>(workers), mus.size());
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return fields;
}

std::vector<ParameterSample> draw_inputs(const ForwardModel& model,
                                         RngStream& rng, std::int64_t count,
                                         std::int64_t first_id,
                                         const std::string& label) {
  std::vector<ParameterSample> mus;
  mus.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    ParameterSample mu = model.sample_parameters(rng);
    mu.id = first_id + i;
    mu.stream_label = label + "/" + std::to_string(mu.id);
    mus.push_back(std::move(mu));
  }
  return mus;
}

SurrogateModel train_capped(const CampaignConfig& config,
                            const SnapshotSet& snapshots,
                            GeometryCache* geometry) {
  SurrogateTrainingOptions opt;
  const auto n = static_cast<std::int32_t>(snapshots.fields.size());
  opt.pod_rank = std::max(1, std::min(config.pod_rank, n - 1));
  opt.xi = config.xi;
  opt.closure_epochs = config.closure_epochs;
  opt.ridge_floor = config.ridge_floor;
  opt.geometry = geometry;
  return train_surrogate(snapshots, opt);
}

// Per-run state threaded through the phases. fom_values_seen accumulates
// every full-model QoI evaluation already paid for, so the fallback path
// can always assemble a valid plain Monte Carlo estimate.
struct CampaignScratch {
  QoiFunctional qoi;
  GeometryCache local_geometry;
  GeometryCache* geometry = nullptr;
  CostLedger ledger;
  RngStream root;
  std::vector<double> fom_values_seen;

  CampaignScratch(const CampaignConfig& config, GeometryCache* shared)
      : qoi(make_qoi(config.qoi, config.tissue, config.radio)),
        geometry(shared ? shared : &local_geometry),
        ledger(config.budget),
        root(config.master_seed, "campaign") {}
};

double rom_qoi(const CampaignScratch& scratch, const SurrogateModel& rom,
               const ParameterSample& mu, GeometryCache& cache) {
  const GeometryFields& geom = cached_geometry(cache, mu, rom.grid());
  return scratch.qoi.evaluate(rom.evaluate_with_geometry(mu, geom));
}

void append_rows(CampaignReport& report,
                 const std::vector<ParameterSample>& mus,
                 const std::vector<double>& values, const char* fidelity) {
  for (std::size_t i = 0; i < mus.size(); ++i) {
    report.rows.push_back({mus[i].id, fidelity, values[i]});
  }
}

// Training collection: inputs, solved fields, and full-model QoI values,
// extended in place as the campaign tops the collection up.
struct TrainingCollection {
  std::vector<ParameterSample> inputs;
  std::vector<std::vector<double>> fields;
  std::vector<double> fom_values;
};

SnapshotSet snapshots_from(const CampaignConfig& config, const GridSpec& grid,
                           const TrainingCollection& coll,
                           std::int64_t count) {
  SnapshotSet set;
  set.grid = grid;
  set.seed = config.master_seed;
  set.solver_version = kSolverTag;
  for (std::int64_t i = 0; i < count; ++i) {
    set.params.push_back(coll.inputs[static_cast<std::size_t>(i)]);
    set.fields.push_back(coll.fields[static_cast<std::size_t>(i)]);
  }
  return set;
}

// Step 2: draw and solve the n0 preliminary full-model samples, charging
// generation and solve costs.
TrainingCollection collect_preliminary(const CampaignConfig& config,
                                       const ForwardModel& model,
                                       CampaignScratch& scratch,
                                       CampaignReport& report,
                                       PhaseClock& clock) {
  TrainingCollection coll;
  const GridSpec grid = model.grid();
  clock.run("preliminary_fom", [&] {
    RngStream rng = scratch.root.split("preliminary-inputs");
    coll.inputs = draw_inputs(model, rng, config.n0, 0, "preliminary");
    scratch.ledger.charge("generation",
                          config.cost.g * static_cast<double>(config.n0));
    scratch.ledger.charge("fom",
                          config.cost.w0 * static_cast<double>(config.n0));
    std::vector<FieldSolution> solved =
        solve_batch(model, coll.inputs, config.workers);
    for (auto& f : solved) coll.fields.push_back(std::move(f.values));
    for (const auto& field : coll.fields) {
      coll.fom_values.push_back(scratch.qoi.evaluate({grid, field}));
    }
  });
  append_rows(report, coll.inputs, coll.fom_values, "fom");
  scratch.fom_values_seen = coll.fom_values;
  return coll;
}

struct TrainingDecision {
  double sigma0 = 0.0;
  std::int64_t n_star = 0;
};

// Steps 3-5: subset trainings with held-out correlations, trend fits, and
// the training-size decision. Subset trainings are recorded, not charged;
// only the final training at n_star costs budget.
TrainingDecision study_and_decide(const CampaignConfig& config,
                                  const ForwardModel& model,
                                  const TrainingCollection& coll,
                                  CampaignScratch& scratch,
                                  CampaignReport& report, PhaseClock& clock) {
  const GridSpec grid = model.grid();

  clock.run("subset_trainings", [&] {
    const std::int64_t held_from = config.subset_sizes.back();
    for (std::int64_t n_j : config.subset_sizes) {
      const SnapshotSet subset = snapshots_from(config, grid, coll, n_j);
      const SurrogateModel rom =
          train_capped(config, subset, scratch.geometry);
      std::vector<double> fom_held, rom_held;
      for (std::int64_t i = held_from; i < config.n0; ++i) {
        fom_held.push_back(coll.fom_values[static_cast<std::size_t>(i)]);
        rom_held.push_back(rom_qoi(scratch, rom,
                                   coll.inputs[static_cast<std::size_t>(i)],
                                   *scratch.geometry));
      }
      report.rho_points.push_back(
          {static_cast<double>(n_j), sample_correlation(fom_held, rom_held)});
      report.time_points.push_back(
          {static_cast<double>(n_j), training_cost(config.training_cost, n_j)});
    }
  });

  clock.run("trend_fits", [&] {
    const CorrelationTrendFit corr = fit_correlation_trend(report.rho_points);
    const TimeTrendFit time = fit_training_time_trend(report.time_points);
    report.trends =
        TrendCoefficients{corr.zeta, corr.c1, corr.c2, time.c3, time.c4};
    report.trend_rss = corr.rss;
  });

  TrainingDecision decision;
  clock.run("training_size_decision", [&] {
    decision.sigma0 = std::sqrt(sample_moments(coll.fom_values).variance);
    try {
      decision.n_star =
          optimal_training_size(report.trends, config.budget, config.cost,
                                decision.sigma0, config.n0);
    } catch (const BudgetError& e) {
      throw BudgetError(std::string("training-size decision: ") + e.what());
    }
    report.predicted_mse_bound =
        mse_upper_bound(static_cast<double>(decision.n_star), report.trends,
                        config.budget, config.cost, decision.sigma0);
  });
  report.n_star = decision.n_star;
  report.sigma0_pre = decision.sigma0;
  return decision;
}

void finish_report(const CampaignConfig& config, CampaignScratch& scratch,
                   CampaignReport& report) {
  report.ledger_totals = scratch.ledger.totals();
  report.budget = config.budget;
  report.leftover = config.budget - scratch.ledger.grand_total();
  report.estimate.cost = report.ledger_totals;
}

// Plain Monte Carlo on the full model when the surrogate route is
// abandoned: every full-model QoI value already paid for is kept (they
// are all draws from the same input law on independent streams) and the
// remaining budget buys as many fresh solves as it can, so a valid
// estimate always comes out.
void fallback_to_mc(const CampaignConfig& config, const ForwardModel& model,
                    CampaignScratch& scratch, CampaignReport& report,
                    const std::string& reason, PhaseClock& clock) {
  report.fallback = true;
  report.fallback_reason = reason;
  clock.run("fallback_mc", [&] {
    const double remaining = config.budget - scratch.ledger.grand_total();
    const double unit = config.cost.g + config.cost.w0;
    const auto fresh = static_cast<std::int64_t>(std::floor(remaining / unit));
    std::vector<double> values = scratch.fom_values_seen;
    if (fresh > 0) {
      RngStream rng = scratch.root.split("fallback-inputs");
      const std::vector<ParameterSample> mus =
          draw_inputs(model, rng, fresh, 1'000'000'000, "fallback");
      scratch.ledger.charge("generation",
                            config.cost.g * static_cast<double>(fresh));
      scratch.ledger.charge("fom",
                            config.cost.w0 * static_cast<double>(fresh));
      const std::vector<FieldSolution> solved =
          solve_batch(model, mus, config.workers);
      std::vector<double> fresh_values;
      fresh_values.reserve(solved.size());
      for (const auto& f : solved) {
        fresh_values.push_back(scratch.qoi.evaluate(f));
      }
      append_rows(report, mus, fresh_values, "fom");
      values.insert(values.end(), fresh_values.begin(), fresh_values.end());
    }
    report.estimate = mc_fom_estimate(values, config.gamma);
  });
}

CampaignConfig finalized_copy(const CampaignConfig& config) {
  CampaignConfig copy = config;
  finalize(copy);
  return copy;
}

}  // namespace

double training_cost(const TrainingCostModel& model, std::int64_t n) {
  return model.per_sample * static_cast<double>(n) + model.fixed;
}

std::vector<std::int64_t> default_subset_sizes(std::int64_t n0) {
  std::vector<std::int64_t> sizes;
  const double lo = 0.2 * static_cast<double>(n0);
  const double hi = 0.67 * static_cast<double>(n0);
  for (int j = 0; j < 6; ++j) {
    const double frac = static_cast<double>(j) / 5.0;
    const auto n = std::max<std::int64_t>(
        2, std::llround(lo + frac * (hi - lo)));
    if (sizes.empty() || n > sizes.back()) sizes.push_back(n);
  }
  return sizes;
}

namespace {

void check_range(double lo, double hi, const char* what) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw ConfigError(std::string("ranges.") + what +
                      " must satisfy low < high with finite bounds");
  }
}

}  // namespace

void finalize(CampaignConfig& config) {
  try {
    validate(config.cost);
    validate(config.tissue);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(config.budget > 0.0) || !std::isfinite(config.budget)) {
    throw ConfigError("budget must be positive and finite");
  }
  if (!(config.gamma > 0.0) || !(config.gamma < 1.0)) {
    throw ConfigError("gamma must lie strictly inside (0, 1)");
  }
  if (config.qoi != "avg_po2" && config.qoi != "delta_po2" &&
      config.qoi != "tcp") {
    throw ConfigError("unknown qoi name: " + config.qoi);
  }
  if (config.n0 < 6) {
    throw ConfigError("preliminary collection needs n0 >= 6");
  }
  if (config.subset_sizes.empty()) {
    config.subset_sizes = default_subset_sizes(config.n0);
  }
  if (config.subset_sizes.size() < 3) {
    throw ConfigError("need at least 3 subset sizes to fit the trend");
  }
  for (std::size_t i = 0; i < config.subset_sizes.size(); ++i) {
    if (config.subset_sizes[i] < 2) {
      throw ConfigError("subset sizes must be at least 2");
    }
    if (i > 0 && config.subset_sizes[i] <= config.subset_sizes[i - 1]) {
      throw ConfigError("subset sizes must be strictly increasing");
    }
  }
  if (config.subset_sizes.back() > config.n0 - 2) {
    throw ConfigError(
        "largest subset must leave at least 2 held-out preliminary samples");
  }
  if (!(config.budget >
        static_cast<double>(config.n0) * (config.cost.g + config.cost.w0))) {
    throw ConfigError(
        "budget cannot cover the preliminary full-model collection");
  }
  if (config.pod_rank < 1) throw ConfigError("pod rank must be positive");
  if (!(config.xi >= 0.0 && config.xi <= 1.0)) {
    throw ConfigError("closure mix weight must lie in [0, 1]");
  }
  if (config.closure_epochs < 0) {
    throw ConfigError("closure epochs must be nonnegative");
  }
  if (!(config.ridge_floor > 0.0)) {
    throw ConfigError("ridge floor must be positive");
  }
  if (config.training_cost.per_sample < 0.0 ||
      config.training_cost.fixed < 0.0) {
    throw ConfigError("training cost coefficients must be nonnegative");
  }
  if (config.grid_n < 3) throw ConfigError("grid must be at least 3x3");
  if (config.workers < 1) throw ConfigError("workers must be at least 1");
  check_range(config.ranges.v_max_lo, config.ranges.v_max_hi, "v_max");
  check_range(config.ranges.c_in_lo, config.ranges.c_in_hi, "c_in");
  check_range(config.ranges.wall_permeability_lo,
              config.ranges.wall_permeability_hi, "wall_permeability");
  check_range(config.ranges.seeds_fraction_lo,
              config.ranges.seeds_fraction_hi, "seeds_fraction");
  check_range(config.ranges.density_sv_lo, config.ranges.density_sv_hi,
              "density_sv");
}

namespace {

void require_keys(const ordered_json& object, const char* where,
                  const std::set<std::string>& allowed) {
  for (const auto& item : object.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(std::string("unknown config key '") + item.key() +
                        "' in " + where);
    }
  }
}

double json_number(const ordered_json& j, const char* what) {
  if (!j.is_number()) {
    throw ConfigError(std::string(what) + " must be a number");
  }
  return j.get<double>();
}

std::int64_t json_integer(const ordered_json& j, const char* what) {
  if (!j.is_number_integer()) {
    throw ConfigError(std::string(what) + " must be an integer");
  }
  return j.get<std::int64_t>();
}

void read_range(const ordered_json& j, const char* what, double& lo,
                double& hi) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError(std::string(what) + " must be a [low, high] pair");
  }
  lo = json_number(j[0], what);
  hi = json_number(j[1], what);
}

}  // namespace

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  ordered_json root;
  try {
    root = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  require_keys(root, "the config root",
               {"budget", "gamma", "qoi", "seed", "cost", "training_cost",
                "preliminary", "surrogate", "grid_n", "tissue", "radiobiology",
                "ranges", "output_dir", "workers", "measure"});

  CampaignConfig config;
  if (root.contains("budget")) {
    config.budget = json_number(root["budget"], "budget");
  }
  if (root.contains("gamma")) {
    config.gamma = json_number(root["gamma"], "gamma");
  }
  if (root.contains("qoi")) {
    if (!root["qoi"].is_string()) throw ConfigError("qoi must be a string");
    config.qoi = root["qoi"].get<std::string>();
  }
  if (root.contains("seed")) {
    config.master_seed =
        static_cast<std::uint64_t>(json_integer(root["seed"], "seed"));
  }
  if (root.contains("cost")) {
    const auto& cost = root["cost"];
    require_keys(cost, "cost",
                 {"generation", "fom_solve", "rom_eval", "unit"});
    if (cost.contains("generation")) {
      config.cost.g = json_number(cost["generation"], "cost.generation");
    }
    if (cost.contains("fom_solve")) {
      config.cost.w0 = json_number(cost["fom_solve"], "cost.fom_solve");
    }
    if (cost.contains("rom_eval")) {
      config.cost.w1 = json_number(cost["rom_eval"], "cost.rom_eval");
    }
    if (cost.contains("unit")) {
      if (!cost["unit"].is_string()) {
        throw ConfigError("cost.unit must be a string");
      }
      config.cost.unit = cost["unit"].get<std::string>();
    }
  }
  if (root.contains("training_cost")) {
    const auto& tc = root["training_cost"];
    require_keys(tc, "training_cost", {"per_sample", "fixed"});
    if (tc.contains("per_sample")) {
      config.training_cost.per_sample =
          json_number(tc["per_sample"], "training_cost.per_sample");
    }
    if (tc.contains("fixed")) {
      config.training_cost.fixed =
          json_number(tc["fixed"], "training_cost.fixed");
    }
  }
  if (root.contains("preliminary")) {
    const auto& pre = root["preliminary"];
    require_keys(pre, "preliminary", {"n0", "subset_sizes"});
    if (pre.contains("n0")) {
      config.n0 = json_integer(pre["n0"], "preliminary.n0");
    }
    if (pre.contains("subset_sizes")) {
      if (!pre["subset_sizes"].is_array()) {
        throw ConfigError("preliminary.subset_sizes must be an array");
      }
      config.subset_sizes.clear();
      for (const auto& v : pre["subset_sizes"]) {
        config.subset_sizes.push_back(
            json_integer(v, "preliminary.subset_sizes entry"));
      }
    }
  }
  if (root.contains("surrogate")) {
    const auto& sur = root["surrogate"];
    require_keys(sur, "surrogate",
                 {"pod_rank", "xi", "closure_epochs", "ridge_floor"});
    if (sur.contains("pod_rank")) {
      config.pod_rank = static_cast<std::int32_t>(
          json_integer(sur["pod_rank"], "surrogate.pod_rank"));
    }
    if (sur.contains("xi")) {
      config.xi = json_number(sur["xi"], "surrogate.xi");
    }
    if (sur.contains("closure_epochs")) {
      config.closure_epochs = static_cast<std::int32_t>(
          json_integer(sur["closure_epochs"], "surrogate.closure_epochs"));
    }
    if (sur.contains("ridge_floor")) {
      config.ridge_floor =
          json_number(sur["ridge_floor"], "surrogate.ridge_floor");
    }
  }
  if (root.contains("grid_n")) {
    config.grid_n =
        static_cast<std::int32_t>(json_integer(root["grid_n"], "grid_n"));
  }
  if (root.contains("tissue")) {
    const auto& t = root["tissue"];
    require_keys(t, "tissue",
                 {"diffusivity", "v_max", "michaelis_p50", "alpha_ox",
                  "vessel_radius", "wall_permeability", "c_in", "tau_boundary",
                  "c_far_field", "domain_side", "slab_thickness"});
    auto field = [&](const char* key, double& out) {
      if (t.contains(key)) out = json_number(t[key], key);
    };
    field("diffusivity", config.tissue.diffusivity);
    field("v_max", config.tissue.v_max);
    field("michaelis_p50", config.tissue.michaelis_p50);
    field("alpha_ox", config.tissue.alpha_ox);
    field("vessel_radius", config.tissue.vessel_radius);
    field("wall_permeability", config.tissue.wall_permeability);
    field("c_in", config.tissue.c_in);
    field("tau_boundary", config.tissue.tau_boundary);
    field("c_far_field", config.tissue.c_far_field);
    field("domain_side", config.tissue.domain_side);
    field("slab_thickness", config.tissue.slab_thickness);
  }
  if (root.contains("radiobiology")) {
    const auto& r = root["radiobiology"];
    require_keys(r, "radiobiology",
                 {"dose", "alpha", "beta", "delta", "oer_max", "let_scale",
                  "p_half", "n_clonogens", "let"});
    auto field = [&](const char* key, double& out) {
      if (r.contains(key)) out = json_number(r[key], key);
    };
    field("dose", config.radio.dose);
    field("alpha", config.radio.alpha);
    field("beta", config.radio.beta);
    field("delta", config.radio.delta);
    field("oer_max", config.radio.oer_max);
    field("let_scale", config.radio.let_scale);
    field("p_half", config.radio.p_half);
    field("n_clonogens", config.radio.n_clonogens);
    field("let", config.radio.let);
  }
  if (root.contains("ranges")) {
    const auto& r = root["ranges"];
    require_keys(r, "ranges",
                 {"v_max", "c_in", "wall_permeability", "seeds_fraction",
                  "density_sv"});
    if (r.contains("v_max")) {
      read_range(r["v_max"], "ranges.v_max", config.ranges.v_max_lo,
                 config.ranges.v_max_hi);
    }
    if (r.contains("c_in")) {
      read_range(r["c_in"], "ranges.c_in", config.ranges.c_in_lo,
                 config.ranges.c_in_hi);
    }
    if (r.contains("wall_permeability")) {
      read_range(r["wall_permeability"], "ranges.wall_permeability",
                 config.ranges.wall_permeability_lo,
                 config.ranges.wall_permeability_hi);
    }
    if (r.contains("seeds_fraction")) {
      read_range(r["seeds_fraction"], "ranges.seeds_fraction",
                 config.ranges.seeds_fraction_lo,
                 config.ranges.seeds_fraction_hi);
    }
    if (r.contains("density_sv")) {
      read_range(r["density_sv"], "ranges.density_sv",
                 config.ranges.density_sv_lo, config.ranges.density_sv_hi);
    }
  }
  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string()) {
      throw ConfigError("output_dir must be a string");
    }
    config.output_dir = root["output_dir"].get<std::string>();
  }
  if (root.contains("workers")) {
    config.workers =
        static_cast<std::int32_t>(json_integer(root["workers"], "workers"));
  }
  if (root.contains("measure")) {
    if (!root["measure"].is_boolean()) {
      throw ConfigError("measure must be a boolean");
    }
    config.measure = root["measure"].get<bool>();
  }

  finalize(config);
  return config;
}

CampaignReport run_campaign(const CampaignConfig& raw_config,
                            const ForwardModel& model,
                            GeometryCache* geometry) {
  const CampaignConfig config = finalized_copy(raw_config);
  const GridSpec grid = model.grid();

  CampaignReport report;
  report.config = config;
  CampaignScratch scratch(config, geometry);
  PhaseClock clock(config.measure, &report.timings);

  TrainingCollection coll =
      collect_preliminary(config, model, scratch, report, clock);

  try {
    const TrainingDecision decision =
        study_and_decide(config, model, coll, scratch, report, clock);

    // Step 6: top the training collection up to n_star samples.
    const std::int64_t extra = decision.n_star - config.n0;
    clock.run("extra_fom", [&] {
      if (extra <= 0) return;
      RngStream rng = scratch.root.split("extra-inputs");
      const std::vector<ParameterSample> mus =
          draw_inputs(model, rng, extra, config.n0, "extra");
      scratch.ledger.charge("generation",
                            config.cost.g * static_cast<double>(extra));
      scratch.ledger.charge("fom",
                            config.cost.w0 * static_cast<double>(extra));
      std::vector<FieldSolution> solved =
          solve_batch(model, mus, config.workers);
      std::vector<double> values;
      for (std::size_t i = 0; i < mus.size(); ++i) {
        coll.inputs.push_back(mus[i]);
        coll.fields.push_back(std::move(solved[i].values));
        values.push_back(scratch.qoi.evaluate({grid, coll.fields.back()}));
        coll.fom_values.push_back(values.back());
        scratch.fom_values_seen.push_back(values.back());
      }
      append_rows(report, mus, values, "fom");
    });

    // Step 7: final surrogate, charged at the declared training cost;
    // correlation and spreads pre-estimated on the training samples.
    const double t_star = training_cost(config.training_cost, decision.n_star);
    SurrogateModel rom;
    clock.run("final_training", [&] {
      scratch.ledger.charge("training", t_star);
      const SnapshotSet all =
          snapshots_from(config, grid, coll, decision.n_star);
      rom = train_capped(config, all, scratch.geometry);
      std::vector<double> rom_values;
      for (std::int64_t i = 0; i < decision.n_star; ++i) {
        rom_values.push_back(
            rom_qoi(scratch, rom, coll.inputs[static_cast<std::size_t>(i)],
                    *scratch.geometry));
      }
      report.rho_pre = sample_correlation(coll.fom_values, rom_values);
      report.sigma1_pre = std::sqrt(sample_moments(rom_values).variance);
    });

    // Step 8: sampling policy, then fresh estimation inputs on their own
    // stream so they are independent of every training draw.
    report.policy =
        compute_policy(decision.n_star, report.rho_pre, decision.sigma0,
                       report.sigma1_pre, config.budget, config.cost, t_star);

    std::vector<double> fom_est, rom_est;
    std::vector<std::int64_t> pair_ids;
    clock.run("estimation_sampling", [&] {
      RngStream rng = scratch.root.split("estimation-inputs");
      const std::vector<ParameterSample> mus = draw_inputs(
          model, rng, report.policy.m1_star, decision.n_star, "estimation");
      scratch.ledger.charge(
          "generation",
          config.cost.g * static_cast<double>(report.policy.m1_star));
      for (const auto& mu : mus) {
        rom_est.push_back(rom_qoi(scratch, rom, mu, *scratch.geometry));
        pair_ids.push_back(mu.id);
      }
      append_rows(report, mus, rom_est, "rom");

      const std::vector<ParameterSample> shared(
          mus.begin(),
          mus.begin() + static_cast<std::size_t>(report.policy.m0_star));
      scratch.ledger.charge(
          "fom", config.cost.w0 * static_cast<double>(report.policy.m0_star));
      const std::vector<FieldSolution> solved =
          solve_batch(model, shared, config.workers);
      for (const auto& f : solved) {
        fom_est.push_back(scratch.qoi.evaluate(f));
        scratch.fom_values_seen.push_back(fom_est.back());
      }
      append_rows(report, shared, fom_est, "fom");
    });

    // Step 9: the estimate and interval re-derive rho, sigma0, sigma1,
    // and lambda from the fresh samples.
    clock.run("estimate", [&] {
      const QoiSamplePair pair(fom_est, rom_est, pair_ids);
      report.estimate = dl_mfmc_confidence_interval(pair, config.gamma);
    });
  } catch (const PolicyError& e) {
    fallback_to_mc(config, model, scratch, report, e.what(), clock);
  } catch (const DegenerateDataError& e) {
    fallback_to_mc(config, model, scratch, report, e.what(), clock);
  }

  finish_report(config, scratch, report);
  return report;
}

CampaignReport plan_campaign(const CampaignConfig& raw_config,
                             const ForwardModel& model,
                             GeometryCache* geometry) {
  const CampaignConfig config = finalized_copy(raw_config);
  CampaignReport report;
  report.config = config;
  CampaignScratch scratch(config, geometry);
  PhaseClock clock(config.measure, &report.timings);
  const TrainingCollection coll =
      collect_preliminary(config, model, scratch, report, clock);
  study_and_decide(config, model, coll, scratch, report, clock);
  report.estimate.method = "none";
  finish_report(config, scratch, report);
  return report;
}

CampaignReport run_mc_baseline(const CampaignConfig& raw_config,
                               const ForwardModel& model) {
  const CampaignConfig config = finalized_copy(raw_config);
  const double unit = config.cost.g + config.cost.w0;
  if (!(config.budget >= 2.0 * unit)) {
    throw BudgetError("baseline: budget below two full-model samples");
  }
  const auto count =
      static_cast<std::int64_t>(std::floor(config.budget / unit));

  CampaignReport report;
  report.config = config;
  CampaignScratch scratch(config, nullptr);
  PhaseClock clock(config.measure, &report.timings);

  clock.run("baseline_fom", [&] {
    RngStream rng = scratch.root.split("baseline-inputs");
    const std::vector<ParameterSample> mus =
        draw_inputs(model, rng, count, 0, "baseline");
    scratch.ledger.charge("generation",
                          config.cost.g * static_cast<double>(count));
    scratch.ledger.charge("fom",
                          config.cost.w0 * static_cast<double>(count));
    const std::vector<FieldSolution> solved =
        solve_batch(model, mus, config.workers);
    std::vector<double> values;
    values.reserve(solved.size());
    for (const auto& f : solved) values.push_back(scratch.qoi.evaluate(f));
    report.estimate = mc_fom_estimate(values, config.gamma);
    append_rows(report, mus, values, "fom");
  });

  finish_report(config, scratch, report);
  return report;
}

namespace {

OxygenModel oxygen_from_config(const CampaignConfig& config) {
  const GridSpec grid{config.grid_n, config.grid_n,
                      1.0 / static_cast<double>(config.grid_n - 1)};
  return OxygenModel(grid, config.tissue, config.radio, config.ranges);
}

}  // namespace

CampaignReport run_campaign(const CampaignConfig& config) {
  const CampaignConfig ready = finalized_copy(config);
  const OxygenModel model = oxygen_from_config(ready);
  return run_campaign(ready, model, nullptr);
}

CampaignReport plan_campaign(const CampaignConfig& config) {
  const CampaignConfig ready = finalized_copy(config);
  const OxygenModel model = oxygen_from_config(ready);
  return plan_campaign(ready, model, nullptr);
}

CampaignReport run_mc_baseline(const CampaignConfig& config) {
  const CampaignConfig ready = finalized_copy(config);
  const OxygenModel model = oxygen_from_config(ready);
  return run_mc_baseline(ready, model);
}

CampaignReport fit_trends_from_snapshots(const CampaignConfig& raw_config,
                                         const std::filesystem::path& path) {
  const CampaignConfig config = finalized_copy(raw_config);
  const SnapshotSet stored = load_snapshots(path);
  if (static_cast<std::int64_t>(stored.fields.size()) < config.n0) {
    throw ConfigError("snapshot file holds fewer fields than n0");
  }

  CampaignReport report;
  report.config = config;
  CampaignScratch scratch(config, nullptr);
  PhaseClock clock(config.measure, &report.timings);

  TrainingCollection coll;
  for (std::int64_t i = 0; i < config.n0; ++i) {
    coll.inputs.push_back(stored.params[static_cast<std::size_t>(i)]);
    coll.fields.push_back(stored.fields[static_cast<std::size_t>(i)]);
    coll.fom_values.push_back(
        scratch.qoi.evaluate({stored.grid, coll.fields.back()}));
  }

  clock.run("subset_trainings", [&] {
    const std::int64_t held_from = config.subset_sizes.back();
    for (std::int64_t n_j : config.subset_sizes) {
      SnapshotSet subset = snapshots_from(config, stored.grid, coll, n_j);
      subset.seed = stored.seed;
      subset.solver_version = stored.solver_version;
      const SurrogateModel rom =
          train_capped(config, subset, scratch.geometry);
      std::vector<double> fom_held, rom_held;
      for (std::int64_t i = held_from; i < config.n0; ++i) {
        fom_held.push_back(coll.fom_values[static_cast<std::size_t>(i)]);
        rom_held.push_back(rom_qoi(scratch, rom,
                                   coll.inputs[static_cast<std::size_t>(i)],
                                   *scratch.geometry));
      }
      report.rho_points.push_back(
          {static_cast<double>(n_j), sample_correlation(fom_held, rom_held)});
      report.time_points.push_back(
          {static_cast<double>(n_j), training_cost(config.training_cost, n_j)});
    }
  });

  clock.run("trend_fits", [&] {
    const CorrelationTrendFit corr = fit_correlation_trend(report.rho_points);
    const TimeTrendFit time = fit_training_time_trend(report.time_points);
    report.trends =
        TrendCoefficients{corr.zeta, corr.c1, corr.c2, time.c3, time.c4};
    report.trend_rss = corr.rss;
  });

  report.estimate.method = "none";
  finish_report(config, scratch, report);
  return report;
}

ReplicationSummary replication_study(const ReplicationConfig& config) {
  if (config.replications < 100) {
    throw ConfigError("replication study needs at least 100 replications");
  }
  if (config.m0 < 2 || config.m1 < config.m0) {
    throw ConfigError("replication study needs 2 <= m0 <= m1");
  }
  if (!(config.gamma > 0.0) || !(config.gamma < 1.0)) {
    throw ConfigError("gamma must lie strictly inside (0, 1)");
  }

  // Three weight modes: an explicit override runs the fixed-weight
  // estimator at that value; otherwise use_optimal_lambda picks between
  // the full estimator (weight re-estimated each replication) and the
  // fixed weight at the true-moment optimum.
  const bool fixed_lambda =
      std::isfinite(config.lambda_override) || !config.use_optimal_lambda;
  const double lambda =
      std::isfinite(config.lambda_override)
          ? config.lambda_override
          : optimal_lambda(config.model.sigma0, config.model.sigma1,
                           config.model.rho);

  RngStream root(config.master_seed, "replication-study");
  std::vector<double> points;
  points.reserve(static_cast<std::size_t>(config.replications));
  std::int64_t covered = 0;
  double width_sum = 0.0;
  const double z = normal_quantile(0.5 * (1.0 - config.gamma));

  for (std::int64_t r = 0; r < config.replications; ++r) {
    RngStream rng = root.split("rep-" + std::to_string(r));
    const QoiSamplePair pair = config.model.draw(config.m0, config.m1, rng);

    double point = 0.0, lo = 0.0, hi = 0.0;
    if (fixed_lambda) {
      // Fixed control-variate weight: plug the sample moments into the
      // closed-form estimator variance for the interval.
      point = mfmc_point_estimate(pair, lambda);
      const SampleMoments fom_m = sample_moments(pair.fom_values());
      const SampleMoments rom_m = sample_moments(pair.rom_values());
      const std::span<const double> rom_all(pair.rom_values());
      double rho_hat = sample_correlation(
          pair.fom_values(), rom_all.first(static_cast<std::size_t>(config.m0)));
      rho_hat = std::clamp(rho_hat, -kRhoClipBound, kRhoClipBound);
      const double var_est = mfmc_mse_theoretical(
          std::sqrt(fom_m.variance), std::sqrt(rom_m.variance), rho_hat,
          lambda, config.m0, config.m1);
      const double half = z * std::sqrt(std::max(var_est, 0.0));
      lo = point - half;
      hi = point + half;
    } else {
      const EstimateReport est =
          dl_mfmc_confidence_interval(pair, config.gamma);
      point = est.point;
      lo = est.ci_low;
      hi = est.ci_high;
    }
    points.push_back(point);
    if (config.model.mean0 >= lo && config.model.mean0 <= hi) ++covered;
    width_sum += 0.5 * (hi - lo);
  }

  const SampleMoments moments = sample_moments(points);
  ReplicationSummary summary;
  summary.replications = config.replications;
  summary.lambda = lambda;
  summary.empirical_mean = moments.mean;
  summary.empirical_variance = moments.variance;
  summary.theoretical_mse =
      mfmc_mse_theoretical(config.model.sigma0, config.model.sigma1,
                           config.model.rho, lambda, config.m0, config.m1);
  summary.coverage =
      static_cast<double>(covered) / static_cast<double>(config.replications);
  summary.mean_ci_half_width =
      width_sum / static_cast<double>(config.replications);
  return summary;
}

namespace {

// Execution-only settings (workers, output_dir, measure) are omitted:
// they do not affect any reported number, so reports stay byte-identical
// across machines and thread counts.
ordered_json config_json(const CampaignConfig& config) {
  ordered_json j;
  j["budget"] = config.budget;
  j["gamma"] = config.gamma;
  j["qoi"] = config.qoi;
  j["seed"] = config.master_seed;
  j["cost"] = {{"generation", config.cost.g},
               {"fom_solve", config.cost.w0},
               {"rom_eval", config.cost.w1},
               {"unit", config.cost.unit}};
  j["training_cost"] = {{"per_sample", config.training_cost.per_sample},
                        {"fixed", config.training_cost.fixed}};
  j["preliminary"] = {{"n0", config.n0}, {"subset_sizes", config.subset_sizes}};
  j["surrogate"] = {{"pod_rank", config.pod_rank},
                    {"xi", config.xi},
                    {"closure_epochs", config.closure_epochs},
                    {"ridge_floor", config.ridge_floor}};
  j["grid_n"] = config.grid_n;
  j["tissue"] = {{"diffusivity", config.tissue.diffusivity},
                 {"v_max", config.tissue.v_max},
                 {"michaelis_p50", config.tissue.michaelis_p50},
                 {"alpha_ox", config.tissue.alpha_ox},
                 {"vessel_radius", config.tissue.vessel_radius},
                 {"wall_permeability", config.tissue.wall_permeability},
                 {"c_in", config.tissue.c_in},
                 {"tau_boundary", config.tissue.tau_boundary},
                 {"c_far_field", config.tissue.c_far_field},
                 {"domain_side", config.tissue.domain_side},
                 {"slab_thickness", config.tissue.slab_thickness}};
  j["radiobiology"] = {{"dose", config.radio.dose},
                       {"alpha", config.radio.alpha},
                       {"beta", config.radio.beta},
                       {"delta", config.radio.delta},
                       {"oer_max", config.radio.oer_max},
                       {"let_scale", config.radio.let_scale},
                       {"p_half", config.radio.p_half},
                       {"n_clonogens", config.radio.n_clonogens},
                       {"let", config.radio.let}};
  j["ranges"] = {
      {"v_max", {config.ranges.v_max_lo, config.ranges.v_max_hi}},
      {"c_in", {config.ranges.c_in_lo, config.ranges.c_in_hi}},
      {"wall_permeability",
       {config.ranges.wall_permeability_lo,
        config.ranges.wall_permeability_hi}},
      {"seeds_fraction",
       {config.ranges.seeds_fraction_lo, config.ranges.seeds_fraction_hi}},
      {"density_sv",
       {config.ranges.density_sv_lo, config.ranges.density_sv_hi}}};
  return j;
}

ordered_json trend_points_json(const std::vector<TrendPoint>& points) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : points) {
    arr.push_back({{"n", p.n}, {"value", p.value}});
  }
  return arr;
}

ordered_json estimate_json(const EstimateReport& est) {
  ordered_json j;
  j["method"] = est.method;
  j["point"] = est.point;
  j["variance_estimate"] = est.variance_estimate;
  j["ci_low"] = est.ci_low;
  j["ci_high"] = est.ci_high;
  j["confidence_level"] = est.confidence_level;
  j["cost"] = est.cost;
  return j;
}

}  // namespace

std::string report_json(const CampaignReport& report) {
  ordered_json j;
  j["config"] = config_json(report.config);
  j["preliminary_study"] = {
      {"rho_points", trend_points_json(report.rho_points)},
      {"time_points", trend_points_json(report.time_points)},
      {"trends",
       {{"zeta", report.trends.zeta},
        {"c1", report.trends.c1},
        {"c2", report.trends.c2},
        {"c3", report.trends.c3},
        {"c4", report.trends.c4}}},
      {"trend_rss", report.trend_rss}};
  j["training_decision"] = {
      {"n_star", report.n_star},
      {"predicted_mse_bound", report.predicted_mse_bound},
      {"rho_pre", report.rho_pre},
      {"sigma0_pre", report.sigma0_pre},
      {"sigma1_pre", report.sigma1_pre}};
  j["policy"] = {{"n_star", report.policy.n_star},
                 {"m0_star", report.policy.m0_star},
                 {"m1_star", report.policy.m1_star},
                 {"r", report.policy.r},
                 {"lambda_star", report.policy.lambda_star},
                 {"remaining_budget_after_training",
                  report.policy.remaining_budget_after_training},
                 {"predicted_mse_bound", report.policy.predicted_mse_bound}};
  j["estimate"] = estimate_json(report.estimate);
  j["fallback"] = report.fallback;
  j["fallback_reason"] = report.fallback_reason;
  j["ledger"] = {{"totals", report.ledger_totals},
                 {"budget", report.budget},
                 {"leftover", report.leftover}};
  if (report.config.measure) {
    ordered_json timings = ordered_json::array();
    for (const auto& t : report.timings) {
      timings.push_back({{"phase", t.phase}, {"seconds", t.seconds}});
    }
    j["timings"] = timings;
  }
  return j.dump(2) + "\n";
}

namespace {

void text_line(std::ostringstream& out, const std::string& key,
               const std::string& value) {
  out << "  " << key;
  for (std::size_t i = key.size(); i < 34; ++i) out << ' ';
  out << value << "\n";
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string report_text(const CampaignReport& report) {
  std::ostringstream out;
  out << "estimation campaign summary\n";
  out << "---------------------------\n";
  text_line(out, "qoi", report.config.qoi);
  text_line(out, "budget", format_double(report.config.budget));
  text_line(out, "master seed", std::to_string(report.config.master_seed));
  text_line(out, "method", report.estimate.method);
  if (report.fallback) {
    text_line(out, "fallback", report.fallback_reason);
  }
  if (!report.rho_points.empty()) {
    std::string rho;
    for (const auto& p : report.rho_points) {
      rho += "(" + format_double(p.n) + ", " + format_double(p.value) + ") ";
    }
    text_line(out, "rho(n) study", rho);
    text_line(out, "zeta", format_double(report.trends.zeta));
    text_line(out, "c1, c2",
              format_double(report.trends.c1) + ", " +
                  format_double(report.trends.c2));
    text_line(out, "c3, c4",
              format_double(report.trends.c3) + ", " +
                  format_double(report.trends.c4));
  }
  if (report.n_star > 0) {
    text_line(out, "n_star", std::to_string(report.n_star));
    text_line(out, "predicted mse bound",
              format_double(report.predicted_mse_bound));
  }
  if (report.policy.m0_star > 0) {
    text_line(out, "rho_pre", format_double(report.rho_pre));
    text_line(out, "m0, m1",
              std::to_string(report.policy.m0_star) + ", " +
                  std::to_string(report.policy.m1_star));
    text_line(out, "lambda_star", format_double(report.policy.lambda_star));
  }
  if (report.estimate.method != "none" && !report.estimate.method.empty()) {
    text_line(out, "point estimate", format_double(report.estimate.point));
    text_line(out, "confidence level",
              format_double(report.estimate.confidence_level));
    text_line(out, "interval",
              "[" + format_double(report.estimate.ci_low) + ", " +
                  format_double(report.estimate.ci_high) + "]");
    text_line(out, "half width",
              format_double(
                  0.5 * (report.estimate.ci_high - report.estimate.ci_low)));
  }
  for (const auto& [name, total] : report.ledger_totals) {
    text_line(out, "cost: " + name, format_double(total));
  }
  text_line(out, "cost: total", format_double(report.budget - report.leftover));
  text_line(out, "leftover budget", format_double(report.leftover));
  for (const auto& t : report.timings) {
    text_line(out, "time: " + t.phase, format_double(t.seconds) + " s");
  }
  return out.str();
}

std::string samples_csv(const CampaignReport& report) {
  std::string out = "sample_id,fidelity,qoi_value\n";
  char buf[96];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%.17g\n",
                  static_cast<long long>(row.sample_id), row.fidelity.c_str(),
                  row.value);
    out += buf;
  }
  return out;
}

void write_report_files(const CampaignReport& report,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& content) {
    const std::filesystem::path path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open report file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing report file: " + path.string());
  };
  write("report.json", report_json(report));
  write("report.txt", report_text(report));
  write("samples.csv", samples_csv(report));
}

}  // namespace mfuq
