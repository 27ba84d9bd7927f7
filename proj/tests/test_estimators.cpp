#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "mfuq/errors.hpp"
#include "mfuq/estimators.hpp"
#include "mfuq/rng.hpp"
#include "mfuq/stats.hpp"
#include "mfuq/synthetic.hpp"

using namespace mfuq;

TEST_CASE("mc_fom_estimate on 1..10 matches hand formula") {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 1.0);
  const auto r = mc_fom_estimate(v, 0.95);
  CHECK(r.point == doctest::Approx(5.5).epsilon(1e-14));
  // Unbiased variance of 1..10 is 9.1666..., df equals the sample count.
  const double s2 = 82.5 / 9.0;
  CHECK(r.variance_estimate == doctest::Approx(s2 / 10.0).epsilon(1e-13));
  const double half = 2.2281388519862747 * std::sqrt(s2 / 10.0);
  CHECK(r.ci_high - r.point == doctest::Approx(half).epsilon(1e-7));
  CHECK(r.point - r.ci_low == doctest::Approx(half).epsilon(1e-7));
  CHECK(r.method == "mc_fom");
  CHECK(r.confidence_level == 0.95);
}

TEST_CASE("mc_fom_estimate errors") {
  std::vector<double> one{3.0};
  CHECK_THROWS_AS(mc_fom_estimate(one, 0.95), InsufficientDataError);
  std::vector<double> two{3.0, 4.0};
  CHECK_THROWS_AS(mc_fom_estimate(two, 0.0), DomainError);
  CHECK_THROWS_AS(mc_fom_estimate(two, 1.0), DomainError);
}

TEST_CASE("mc_fom_estimate coverage at 99 percent") {
  RngStream rng(11, "mc-coverage");
  const int reps = 4000;
  int covered = 0;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> v(50);
    for (auto& x : v) x = rng.normal(3.0, 1.7);
    const auto r = mc_fom_estimate(v, 0.99);
    if (r.ci_low <= 3.0 && 3.0 <= r.ci_high) ++covered;
  }
  const double coverage = static_cast<double>(covered) / reps;
  CHECK(coverage > 0.975);
  CHECK(coverage < 0.999);
}

TEST_CASE("QoiSamplePair validates shape") {
  CHECK_THROWS_AS(QoiSamplePair({1.0, 2.0, 3.0}, {1.0, 2.0}), DomainError);
  CHECK_THROWS_AS(QoiSamplePair({1.0}, {1.0, 2.0}, {7}), DomainError);
  const QoiSamplePair ok({1.0}, {1.0, 2.0}, {7, 8});
  CHECK(ok.m0() == 1);
  CHECK(ok.m1() == 2);
}

TEST_CASE("mfmc_point_estimate matches brute-force on random fixtures") {
  RngStream rng(21, "mfmc-brute");
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t m0 = 1 + static_cast<std::int64_t>(rng.uniform_index(40));
    const std::int64_t m1 = m0 + static_cast<std::int64_t>(rng.uniform_index(200));
    std::vector<double> fom, rom;
    for (std::int64_t i = 0; i < m1; ++i) {
      rom.push_back(rng.uniform(-5.0, 5.0));
      if (i < m0) fom.push_back(rng.uniform(-5.0, 5.0));
    }
    const double lambda = rng.uniform(-2.0, 2.0);
    long double sf = 0.0L, sr_all = 0.0L, sr_m0 = 0.0L;
    for (std::int64_t i = 0; i < m0; ++i) sf += fom[i];
    for (std::int64_t i = 0; i < m1; ++i) sr_all += rom[i];
    for (std::int64_t i = 0; i < m0; ++i) sr_m0 += rom[i];
    const double expected = static_cast<double>(
        sf / m0 + static_cast<long double>(lambda) * (sr_all / m1 - sr_m0 / m0));
    const QoiSamplePair pair(fom, rom);
    const double got = mfmc_point_estimate(pair, lambda);
    CHECK(std::fabs(got - expected) <=
          1e-12 * std::max(1.0, std::fabs(expected)));
  }
}

TEST_CASE("mfmc_point_estimate with m0 == m1 equals the FOM mean exactly") {
  RngStream rng(22, "mfmc-collapse");
  std::vector<double> fom, rom;
  for (int i = 0; i < 17; ++i) {
    fom.push_back(rng.normal(2.0, 1.0));
    rom.push_back(rng.normal(1.0, 0.5));
  }
  const QoiSamplePair pair(fom, rom);
  double mean = 0.0;
  for (double x : fom) mean += x;
  mean /= static_cast<double>(fom.size());
  CHECK(mfmc_point_estimate(pair, 0.73) == mean);
}

TEST_CASE("mfmc_point_estimate requires a shared sample") {
  const QoiSamplePair pair(std::vector<double>{}, {1.0, 2.0});
  CHECK_THROWS_AS(mfmc_point_estimate(pair, 1.0), InsufficientDataError);
}

TEST_CASE("mfmc estimator is unbiased over replications") {
  GaussianPairModel model{4.0, 2.0, 3.0, 1.5, 0.9};
  RngStream rng(31, "unbiased");
  const int reps = 2000;
  const std::int64_t m0 = 8, m1 = 64;
  const double lambda = optimal_lambda(model.sigma0, model.sigma1, model.rho);
  double sum = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    sum += mfmc_point_estimate(model.draw(m0, m1, rng), lambda);
  }
  const double avg = sum / reps;
  const double se = std::sqrt(
      mfmc_mse_theoretical(model.sigma0, model.sigma1, model.rho, lambda, m0,
                           m1) /
      reps);
  CHECK(std::fabs(avg - model.mean0) < 4.0 * se);
}

TEST_CASE("empirical estimator variance matches closed form within 10 pct") {
  GaussianPairModel model{1.0, 2.0, 0.5, 1.2, 0.95};
  RngStream rng(32, "mse-consistency");
  const std::int64_t m0 = 10, m1 = 100;
  const double lambda = optimal_lambda(model.sigma0, model.sigma1, model.rho);
  const int reps = 10000;
  std::vector<double> est(reps);
  for (int rep = 0; rep < reps; ++rep) {
    est[rep] = mfmc_point_estimate(model.draw(m0, m1, rng), lambda);
  }
  const auto m = sample_moments(est);
  const double theory =
      mfmc_mse_theoretical(model.sigma0, model.sigma1, model.rho, lambda, m0,
                           m1);
  CHECK(std::fabs(m.variance - theory) < 0.10 * theory);
}

TEST_CASE("variance reduction at equal declared budget") {
  // rho^2 >= 0.9 fixture; equal budget p split as N = p/w0 for plain MC
  // versus (m0, m1) chosen by the optimal cost ratio.
  GaussianPairModel model{0.0, 1.0, 0.0, 1.0, 0.98};
  RngStream rng(33, "var-reduction");
  const double w0 = 100.0, g = 1.0, p = 2000.0;
  const std::int64_t n_mc = static_cast<std::int64_t>(p / w0);
  const double rho2 = model.rho * model.rho;
  const double r = std::sqrt(w0 * rho2 / (g * (1.0 - rho2)));
  const auto m0 = static_cast<std::int64_t>(p / (w0 + g * r));
  const auto m1 = static_cast<std::int64_t>(r * static_cast<double>(m0));
  REQUIRE(static_cast<double>(m0) * w0 + static_cast<double>(m1) * g <= p);
  const double lambda = optimal_lambda(model.sigma0, model.sigma1, model.rho);
  const int reps = 5000;
  std::vector<double> mfmc(reps), mc(reps);
  for (int rep = 0; rep < reps; ++rep) {
    mfmc[rep] = mfmc_point_estimate(model.draw(m0, m1, rng), lambda);
    std::vector<double> v(n_mc);
    for (auto& x : v) x = model.mean0 + model.sigma0 * rng.normal();
    mc[rep] = sample_moments(v).mean;
  }
  const double var_mfmc = sample_moments(mfmc).variance;
  const double var_mc = sample_moments(mc).variance;
  CHECK(var_mfmc < 0.9 * var_mc);
}

TEST_CASE("mfmc_mse_theoretical validates input") {
  CHECK_THROWS_AS(mfmc_mse_theoretical(1.0, 1.0, 0.5, 1.0, 0, 5), DomainError);
  CHECK_THROWS_AS(mfmc_mse_theoretical(1.0, 1.0, 0.5, 1.0, 6, 5), DomainError);
  CHECK_THROWS_AS(mfmc_mse_theoretical(1.0, 1.0, 1.5, 1.0, 2, 5), DomainError);
  CHECK_THROWS_AS(mfmc_mse_theoretical(-1.0, 1.0, 0.5, 1.0, 2, 5),
                  DomainError);
}

TEST_CASE("optimal_lambda minimizes closed-form MSE over a grid") {
  const double sigma0 = 2.0, sigma1 = 0.8, rho = 0.9;
  const std::int64_t m0 = 10, m1 = 200;
  const double star = optimal_lambda(sigma0, sigma1, rho);
  double best = star;
  double best_val = mfmc_mse_theoretical(sigma0, sigma1, rho, star, m0, m1);
  for (double lam = star - 1.0; lam <= star + 1.0; lam += 0.001) {
    const double v = mfmc_mse_theoretical(sigma0, sigma1, rho, lam, m0, m1);
    if (v < best_val) {
      best_val = v;
      best = lam;
    }
  }
  CHECK(std::fabs(best - star) <= 0.001 + 1e-12);
}

TEST_CASE("optimal_lambda rejects degenerate surrogate") {
  CHECK_THROWS_AS(optimal_lambda(1.0, 0.0, 0.5), DegenerateDataError);
}

TEST_CASE("dl_mfmc_mse_given_n closed form and errors") {
  const double p = 10000.0, g = 1.0, w0 = 100.0, sigma0 = 2.0;
  const double n = 50.0, t_n = 130.0, rho = 0.95;
  const double remaining = p - (g + w0) * n - t_n;
  const double rho2 = rho * rho;
  const double s = std::sqrt(w0 * (1.0 - rho2)) + std::sqrt(g * rho2);
  const double expected = sigma0 * sigma0 / remaining * s * s;
  CHECK(dl_mfmc_mse_given_n(n, p, g, w0, t_n, rho, sigma0) ==
        doctest::Approx(expected).epsilon(1e-14));

  CHECK_THROWS_AS(dl_mfmc_mse_given_n(100.0, p, g, w0, 0.0, rho, sigma0),
                  BudgetError);
  // Efficiency condition: w0 rho^2 must exceed g (1 - rho^2).
  CHECK_THROWS_AS(dl_mfmc_mse_given_n(n, p, g, w0, t_n, 0.05, sigma0),
                  PolicyError);
}

TEST_CASE("dl_mfmc_mse_given_n decreasing in rho and in p") {
  const double p = 10000.0, g = 1.0, w0 = 100.0, sigma0 = 1.0;
  const double rho_floor = std::sqrt(g / (w0 + g));
  double prev = std::numeric_limits<double>::infinity();
  for (double rho = rho_floor + 0.02; rho < 0.999; rho += 0.02) {
    const double v = dl_mfmc_mse_given_n(40.0, p, g, w0, 100.0, rho, sigma0);
    CHECK(v < prev);
    prev = v;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double budget : {6000.0, 8000.0, 12000.0, 20000.0}) {
    const double v =
        dl_mfmc_mse_given_n(40.0, budget, g, w0, 100.0, 0.95, sigma0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("dl_mfmc interval coverage at 99 percent") {
  GaussianPairModel model{2.0, 1.3, 2.5, 1.0, 0.92};
  RngStream rng(34, "dl-coverage");
  const int reps = 4000;
  int covered = 0;
  for (int rep = 0; rep < reps; ++rep) {
    const auto r = dl_mfmc_confidence_interval(model.draw(30, 300, rng), 0.99);
    if (r.ci_low <= model.mean0 && model.mean0 <= r.ci_high) ++covered;
  }
  const double coverage = static_cast<double>(covered) / reps;
  CHECK(std::fabs(coverage - 0.99) <= 0.015);
}

TEST_CASE("dl_mfmc interval with perfect surrogate degrades gracefully") {
  RngStream rng(35, "perfect-surrogate");
  const std::int64_t m0 = 30, m1 = 600;
  std::vector<double> fom, rom;
  for (std::int64_t i = 0; i < m1; ++i) {
    const double q = rng.normal(5.0, 2.0);
    rom.push_back(q);
    if (i < m0) fom.push_back(q);
  }
  const QoiSamplePair pair(fom, rom);
  const auto r = dl_mfmc_confidence_interval(pair, 0.95);
  // rho clips to just below 1; the width floor is the m1-limited term.
  const double s0 = std::sqrt(sample_moments(pair.fom_values()).variance);
  const double floor_half =
      normal_quantile(0.025) * s0 / std::sqrt(static_cast<double>(m1));
  CHECK(r.ci_high - r.point ==
        doctest::Approx(floor_half).epsilon(0.01));
  CHECK(r.ci_high > r.ci_low);
}

TEST_CASE("dl_mfmc interval errors") {
  const QoiSamplePair tiny({1.0}, {1.0, 2.0});
  CHECK_THROWS_AS(dl_mfmc_confidence_interval(tiny, 0.95),
                  InsufficientDataError);
  const QoiSamplePair flat_rom({1.0, 2.0, 3.0}, {4.0, 4.0, 4.0, 4.0});
  CHECK_THROWS_AS(dl_mfmc_confidence_interval(flat_rom, 0.95),
                  DegenerateDataError);
}

TEST_CASE("dl_mfmc interval widens as gamma rises") {
  GaussianPairModel model{0.0, 1.0, 0.0, 1.0, 0.9};
  RngStream rng(36, "width-monotone");
  const auto pair = model.draw(20, 100, rng);
  double prev = 0.0;
  for (double gamma : {0.5, 0.8, 0.95, 0.99}) {
    const auto r = dl_mfmc_confidence_interval(pair, gamma);
    const double width = r.ci_high - r.ci_low;
    CHECK(width > prev);
    prev = width;
  }
}
