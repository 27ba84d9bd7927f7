#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "mfuq/estimators.hpp"
#include "mfuq/oxygen.hpp"
#include "mfuq/pod_rom.hpp"
#include "mfuq/rng.hpp"
#include "mfuq/stats.hpp"
#include "mfuq/synthetic.hpp"

namespace {

mfuq::OxygenModel make_model(std::int32_t n) {
  const mfuq::GridSpec grid{n, n, 1.0 / static_cast<double>(n - 1)};
  return mfuq::OxygenModel(grid, mfuq::TissueProblem{},
                           mfuq::RadiobiologyParams{},
                           mfuq::ParameterRanges{});
}

mfuq::SnapshotSet make_snapshots(const mfuq::OxygenModel& model,
                                 std::int64_t count) {
  mfuq::RngStream rng(11, "bench-snapshots");
  mfuq::SnapshotSet set;
  set.grid = model.grid();
  set.seed = 11;
  set.solver_version = "bench";
  for (std::int64_t i = 0; i < count; ++i) {
    mfuq::ParameterSample mu = model.sample_parameters(rng);
    mu.id = i;
    set.params.push_back(mu);
    set.fields.push_back(model.solve(set.params.back()).values);
  }
  return set;
}

void fom_solve(benchmark::State& state) {
  const auto model = make_model(static_cast<std::int32_t>(state.range(0)));
  mfuq::RngStream rng(1, "bench-fom");
  const mfuq::ParameterSample mu = model.sample_parameters(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.solve(mu));
  }
}
BENCHMARK(fom_solve)->Arg(9)->Arg(20)->Arg(40)->Unit(benchmark::kMicrosecond);

void rom_evaluate_cached_geometry(benchmark::State& state) {
  static const auto model = make_model(40);
  static mfuq::GeometryCache cache;
  static const auto rom = [] {
    mfuq::SurrogateTrainingOptions opt;
    opt.geometry = &cache;
    return train_surrogate(make_snapshots(model, 20), opt);
  }();
  mfuq::RngStream rng(2, "bench-rom");
  const mfuq::ParameterSample mu = model.sample_parameters(rng);
  const mfuq::GeometryFields& geom = cached_geometry(cache, mu, rom.grid());
  for (auto _ : state) {
    benchmark::DoNotOptimize(rom.evaluate_with_geometry(mu, geom));
  }
}
BENCHMARK(rom_evaluate_cached_geometry)->Unit(benchmark::kMicrosecond);

void rom_evaluate_fresh_geometry(benchmark::State& state) {
  static const auto model = make_model(40);
  static const auto rom =
      train_surrogate(make_snapshots(model, 20), mfuq::SurrogateTrainingOptions{});
  mfuq::RngStream rng(3, "bench-rom-fresh");
  const mfuq::ParameterSample mu = model.sample_parameters(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rom.evaluate(mu));
  }
}
BENCHMARK(rom_evaluate_fresh_geometry)->Unit(benchmark::kMicrosecond);

void surrogate_train(benchmark::State& state) {
  static const auto model = make_model(40);
  static const auto snapshots =
      make_snapshots(model, static_cast<std::int64_t>(30));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        train_surrogate(snapshots, mfuq::SurrogateTrainingOptions{}));
  }
}
BENCHMARK(surrogate_train)->Unit(benchmark::kMillisecond);

void estimator_interval(benchmark::State& state) {
  const mfuq::GaussianPairModel model{10.0, 2.0, 9.0, 1.8, 0.9};
  mfuq::RngStream rng(4, "bench-estimator");
  const mfuq::QoiSamplePair pair = model.draw(100, state.range(0), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfuq::dl_mfmc_confidence_interval(pair, 0.99));
  }
}
BENCHMARK(estimator_interval)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void quantiles(benchmark::State& state) {
  double alpha = 0.004;
  for (auto _ : state) {
    alpha = alpha < 0.006 ? alpha + 1e-7 : 0.004;
    benchmark::DoNotOptimize(mfuq::normal_quantile(alpha));
    benchmark::DoNotOptimize(mfuq::t_quantile(alpha, 100));
  }
}
BENCHMARK(quantiles);

}  // namespace

BENCHMARK_MAIN();
