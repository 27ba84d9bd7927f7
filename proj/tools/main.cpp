// Command-line front end: plan / run / baseline / replicate / fit-trends.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfuq/campaign.hpp"
#include "mfuq/errors.hpp"

namespace {

struct SharedFlags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> budget;
  std::optional<std::string> qoi;
  std::optional<double> gamma;
  std::optional<std::string> out;
  std::optional<int> workers;
  bool measure = false;
};

void add_shared_flags(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "JSON config file (defaults used when omitted)");
  cmd->add_option("--seed", flags.seed, "master seed override");
  cmd->add_option("--budget", flags.budget, "total budget override");
  cmd->add_option("--qoi", flags.qoi,
                  "quantity of interest: avg_po2, delta_po2, or tcp");
  cmd->add_option("--gamma", flags.gamma, "confidence level override");
  cmd->add_option("--out", flags.out, "report output directory");
  cmd->add_option("--workers", flags.workers,
                  "concurrent full-model solves");
  cmd->add_flag("--measure", flags.measure,
                "record wall-clock phase timings in the JSON report");
}

mfuq::CampaignConfig build_config(const SharedFlags& flags) {
  mfuq::CampaignConfig config;
  if (flags.config_path) {
    config = mfuq::load_campaign_config(*flags.config_path);
  }
  if (flags.seed) config.master_seed = *flags.seed;
  if (flags.budget) config.budget = *flags.budget;
  if (flags.qoi) config.qoi = *flags.qoi;
  if (flags.gamma) config.gamma = *flags.gamma;
  if (flags.out) config.output_dir = *flags.out;
  if (flags.workers) config.workers = *flags.workers;
  if (flags.measure) config.measure = true;
  mfuq::finalize(config);
  return config;
}

// Prints the text summary and writes the report files when an output
// directory is configured. Returns 5 on a policy fallback, 0 otherwise.
int emit(const mfuq::CampaignReport& report) {
  std::cout << mfuq::report_text(report);
  if (!report.config.output_dir.empty()) {
    mfuq::write_report_files(report, report.config.output_dir);
    std::cout << "report written to " << report.config.output_dir << "\n";
  }
  return report.fallback ? 5 : 0;
}

int run_replicate(const mfuq::ReplicationConfig& config,
                  const std::string& out_dir) {
  const mfuq::ReplicationSummary s = mfuq::replication_study(config);
  const char* fmt = "%-24s %.10g\n";
  std::printf("replication study summary\n");
  std::printf("-------------------------\n");
  std::printf("%-24s %lld\n", "replications",
              static_cast<long long>(s.replications));
  std::printf(fmt, "lambda", s.lambda);
  std::printf(fmt, "empirical mean", s.empirical_mean);
  std::printf(fmt, "empirical variance", s.empirical_variance);
  std::printf(fmt, "theoretical mse", s.theoretical_mse);
  std::printf(fmt, "coverage", s.coverage);
  std::printf(fmt, "mean ci half width", s.mean_ci_half_width);
  if (!out_dir.empty()) {
    nlohmann::ordered_json j;
    j["replications"] = s.replications;
    j["lambda"] = s.lambda;
    j["empirical_mean"] = s.empirical_mean;
    j["empirical_variance"] = s.empirical_variance;
    j["theoretical_mse"] = s.theoretical_mse;
    j["coverage"] = s.coverage;
    j["mean_ci_half_width"] = s.mean_ci_half_width;
    std::filesystem::create_directories(out_dir);
    const auto path = std::filesystem::path(out_dir) / "replication.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw mfuq::IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    std::cout << "summary written to " << path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Cost-aware multi-fidelity Monte Carlo estimation on an "
      "oxygen-transport testbed"};
  app.require_subcommand(1);

  SharedFlags plan_flags, run_flags, baseline_flags, trends_flags;
  std::string snapshot_path;

  CLI::App* plan = app.add_subcommand(
      "plan", "preliminary study and training-size decision only");
  add_shared_flags(plan, plan_flags);

  CLI::App* run = app.add_subcommand(
      "run", "full estimation campaign with confidence interval");
  add_shared_flags(run, run_flags);

  CLI::App* baseline = app.add_subcommand(
      "baseline", "single-fidelity Monte Carlo at the same budget");
  add_shared_flags(baseline, baseline_flags);

  CLI::App* trends = app.add_subcommand(
      "fit-trends", "correlation and time trends from stored snapshots");
  add_shared_flags(trends, trends_flags);
  trends->add_option("--snapshots", snapshot_path, "snapshot file")
      ->required();

  mfuq::ReplicationConfig rep;
  std::string rep_out;
  bool fixed_lambda = false;
  CLI::App* replicate = app.add_subcommand(
      "replicate", "estimator variance and coverage on a synthetic model");
  replicate->add_option("--replications", rep.replications,
                        "number of replications (>= 100)");
  replicate->add_option("--m0", rep.m0, "paired two-fidelity samples");
  replicate->add_option("--m1", rep.m1, "surrogate-only samples");
  replicate->add_option("--lambda", rep.lambda_override,
                        "fixed control-variate weight");
  replicate->add_flag("--fixed-lambda", fixed_lambda,
                      "use the true-moment optimal weight instead of "
                      "re-estimating per replication");
  replicate->add_option("--gamma", rep.gamma, "confidence level");
  replicate->add_option("--seed", rep.master_seed, "master seed");
  replicate->add_option("--mean0", rep.model.mean0, "full-model mean");
  replicate->add_option("--sigma0", rep.model.sigma0, "full-model st.dev.");
  replicate->add_option("--mean1", rep.model.mean1, "surrogate mean");
  replicate->add_option("--sigma1", rep.model.sigma1, "surrogate st.dev.");
  replicate->add_option("--rho", rep.model.rho, "fidelity correlation");
  replicate->add_option("--out", rep_out, "summary output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) {
      const auto report = mfuq::plan_campaign(build_config(plan_flags));
      return emit(report);
    }
    if (run->parsed()) {
      const auto report = mfuq::run_campaign(build_config(run_flags));
      return emit(report);
    }
    if (baseline->parsed()) {
      const auto report = mfuq::run_mc_baseline(build_config(baseline_flags));
      return emit(report);
    }
    if (trends->parsed()) {
      const auto report = mfuq::fit_trends_from_snapshots(
          build_config(trends_flags), snapshot_path);
      return emit(report);
    }
    if (replicate->parsed()) {
      rep.use_optimal_lambda = !fixed_lambda;
      return run_replicate(rep, rep_out);
    }
  } catch (const mfuq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mfuq::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const mfuq::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mfuq::BudgetError& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return 3;
  } catch (const mfuq::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const mfuq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
