#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mfuq/cost_policy.hpp"
#include "mfuq/estimators.hpp"
#include "mfuq/model.hpp"
#include "mfuq/oxygen.hpp"
#include "mfuq/pod_rom.hpp"
#include "mfuq/synthetic.hpp"

namespace mfuq {

// Declared surrogate training cost t(n) = per_sample * n + fixed, in the
// same abstract unit as the budget. Declared rather than measured so
// reports are a pure function of (config, seed); wall-clock is recorded
// separately when measurement is requested.
struct TrainingCostModel {
  double per_sample = 0.5;
  double fixed = 5.0;
};

double training_cost(const TrainingCostModel& model, std::int64_t n);

// Everything a campaign needs; reports echo it verbatim. Training-set
// sizes below pod_rank + 1 are handled by capping the basis rank at
// n - 1 for that training.
struct CampaignConfig {
  double budget = 2.0e4;
  CostModel cost;                  // g, w0; w1 is reporting-only
  TrainingCostModel training_cost;
  double gamma = 0.99;
  std::string qoi = "avg_po2";

  std::int64_t n0 = 30;            // preliminary FOM collection
  std::vector<std::int64_t> subset_sizes;  // empty: 6 uniform in [0.2, 0.67] n0

  std::int32_t pod_rank = 10;
  double xi = 0.75;
  std::int32_t closure_epochs = 10;
  double ridge_floor = 1e-8;

  std::uint64_t master_seed = 0;
  std::int32_t grid_n = 40;        // testbed grid is grid_n x grid_n
  TissueProblem tissue;
  RadiobiologyParams radio;
  ParameterRanges ranges;

  std::string output_dir;          // empty: nothing written
  std::int32_t workers = 1;
  bool measure = false;            // include wall-clock phase timings
};

// Up to six sizes, evenly spaced across [0.2 n0, 0.67 n0], each at least
// 2, deduplicated.
std::vector<std::int64_t> default_subset_sizes(std::int64_t n0);

// Fills defaults that depend on other fields and checks invariants:
// budget > n0 (g + w0), at least 3 subset sizes strictly increasing with
// max <= n0 - 2, gamma in (0, 1), a known QoI name, n0 >= 6, workers >= 1.
void finalize(CampaignConfig& config);

// Strict JSON reader: unknown keys anywhere are a ConfigError. Missing
// keys keep their defaults. finalize() is applied before returning.
CampaignConfig load_campaign_config(const std::filesystem::path& path);

struct PhaseTiming {
  std::string phase;
  double seconds = 0.0;
};

// One QoI evaluation row for the CSV dump.
struct QoiRow {
  std::int64_t sample_id = 0;
  std::string fidelity;  // "fom" or "rom"
  double value = 0.0;
};

struct CampaignReport {
  CampaignConfig config;

  // Preliminary study (steps 2-4).
  std::vector<TrendPoint> rho_points;
  std::vector<TrendPoint> time_points;
  TrendCoefficients trends;
  double trend_rss = 0.0;

  // Training-size decision and final training (steps 5-7).
  std::int64_t n_star = 0;
  double predicted_mse_bound = 0.0;
  double rho_pre = 0.0;
  double sigma0_pre = 0.0;
  double sigma1_pre = 0.0;

  // Sampling policy and estimate (steps 8-9).
  SamplingPolicy policy;
  EstimateReport estimate;
  bool fallback = false;
  std::string fallback_reason;

  std::map<std::string, double> ledger_totals;
  double budget = 0.0;
  double leftover = 0.0;

  std::vector<PhaseTiming> timings;  // populated only when measuring
  std::vector<QoiRow> rows;
};

// Steps 1-9 against an arbitrary forward model. The geometry cache is
// optional and shared across phases (and across calls when provided),
// since surrogate features reuse per-network distance fields.
CampaignReport run_campaign(const CampaignConfig& config,
                            const ForwardModel& model,
                            GeometryCache* geometry = nullptr);

// Convenience: builds the oxygen testbed model from the config.
CampaignReport run_campaign(const CampaignConfig& config);

// Steps 1-5 only: stops after the training-size decision; the report
// carries trends, n_star, and the predicted bound, with an empty
// estimate.
CampaignReport plan_campaign(const CampaignConfig& config,
                             const ForwardModel& model,
                             GeometryCache* geometry = nullptr);
CampaignReport plan_campaign(const CampaignConfig& config);

// Plain Monte Carlo on the full model with N = floor(p / (g + w0)).
CampaignReport run_mc_baseline(const CampaignConfig& config,
                               const ForwardModel& model);
CampaignReport run_mc_baseline(const CampaignConfig& config);

// Fits the preliminary trends from an existing snapshot collection
// (steps 3-4 on stored data): trains at each subset size, measures
// held-out correlation against the trailing snapshots, and fits both
// trend laws. The snapshot file must hold at least n0 fields.
CampaignReport fit_trends_from_snapshots(const CampaignConfig& config,
                                         const std::filesystem::path& path);

// Replication study on the bivariate Gaussian pair model with known
// moments: R independent estimator replications at fixed (m0, m1).
struct ReplicationConfig {
  GaussianPairModel model;
  std::int64_t m0 = 50;
  std::int64_t m1 = 500;
  double lambda_override = std::numeric_limits<double>::quiet_NaN();
  bool use_optimal_lambda = true;  // ignored when lambda_override is set
  double gamma = 0.99;
  std::int64_t replications = 1000;
  std::uint64_t master_seed = 0;
};

struct ReplicationSummary {
  std::int64_t replications = 0;
  double lambda = 0.0;
  double empirical_mean = 0.0;
  double empirical_variance = 0.0;
  double theoretical_mse = 0.0;
  double coverage = 0.0;
  double mean_ci_half_width = 0.0;
};

ReplicationSummary replication_study(const ReplicationConfig& config);

// Report serialization. JSON carries every field; the text form is an
// aligned human summary; the CSV holds one row per QoI evaluation.
std::string report_json(const CampaignReport& report);
std::string report_text(const CampaignReport& report);
std::string samples_csv(const CampaignReport& report);

// Writes report.json, report.txt, and samples.csv under dir.
void write_report_files(const CampaignReport& report,
                        const std::filesystem::path& dir);

}  // namespace mfuq
