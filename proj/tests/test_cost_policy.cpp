#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mfuq/cost_policy.hpp"
#include "mfuq/errors.hpp"
#include "mfuq/rng.hpp"

using namespace mfuq;

namespace {

std::vector<TrendPoint> correlation_points(double zeta, double c1, double c2,
                                           const std::vector<double>& sizes) {
  std::vector<TrendPoint> pts;
  for (double n : sizes) {
    const double y = c1 * std::pow(n, -zeta) + c2;
    pts.push_back({n, std::sqrt(1.0 - y)});
  }
  return pts;
}

}  // namespace

TEST_CASE("correlation trend recovers exact decay law") {
  const std::vector<double> sizes{40, 72, 104, 136, 168, 200};
  const auto pts = correlation_points(2.0, 5.0, 0.126, sizes);
  const auto fit = fit_correlation_trend(pts);
  CHECK(std::fabs(fit.zeta - 2.0) < 0.05 * 2.0);
  CHECK(std::fabs(fit.c1 - 5.0) < 0.05 * 5.0);
  CHECK(std::fabs(fit.c2 - 0.126) < 0.05 * 0.126);
  CHECK(fit.rss < 1e-10);
}

TEST_CASE("correlation trend recovers slow decay law") {
  const std::vector<double> sizes{40, 72, 104, 136, 168, 200};
  const auto pts = correlation_points(0.5, 2.0, 0.003, sizes);
  const auto fit = fit_correlation_trend(pts);
  CHECK(std::fabs(fit.zeta - 0.5) < 0.05 * 0.5);
  CHECK(std::fabs(fit.c1 - 2.0) < 0.05 * 2.0);
}

TEST_CASE("correlation trend recovers zeta under relative noise") {
  // Five replicate records per size, mirroring repeated trainings at each
  // subset size; the size grids keep the decay term resolvable above the
  // noise floor at the small end (the flat tail identifies c2).
  struct Fixture {
    std::vector<double> sizes;
    double zeta, c1, c2;
  };
  const std::vector<Fixture> fixtures{
      {{20, 40, 80, 160, 320, 640}, 0.5, 2.0, 0.003},
      {{5, 10, 20, 40, 80}, 2.0, 5.0, 0.126},
  };
  for (const auto& fx : fixtures) {
    RngStream rng(101, "noisy-trend");
    int within = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
      std::vector<TrendPoint> pts;
      for (double n : fx.sizes) {
        for (int rep = 0; rep < 5; ++rep) {
          double y = (fx.c1 * std::pow(n, -fx.zeta) + fx.c2) *
                     (1.0 + 0.05 * rng.normal());
          y = std::min(std::max(y, 1e-12), 1.0);
          pts.push_back({n, std::sqrt(1.0 - y)});
        }
      }
      const auto fit = fit_correlation_trend(pts);
      if (fit.zeta >= 0.7 * fx.zeta && fit.zeta <= 1.3 * fx.zeta) ++within;
    }
    CHECK(within == trials);
  }
}

TEST_CASE("correlation trend beats a coarse grid-search oracle") {
  RngStream rng(102, "grid-oracle");
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<TrendPoint> pts;
    std::vector<double> ns{30, 60, 90, 140, 190, 240};
    std::vector<double> y;
    for (double n : ns) {
      const double v = rng.uniform(0.2, 0.9) * std::pow(n / 30.0, -0.8) +
                       rng.uniform(0.0, 0.05);
      y.push_back(std::min(v, 0.999));
      pts.push_back({n, std::sqrt(1.0 - y.back())});
    }
    const auto fit = fit_correlation_trend(pts);

    double ymax = 0.0;
    for (double v : y) ymax = std::max(ymax, v);
    double oracle = std::numeric_limits<double>::infinity();
    for (double zeta = 0.05; zeta <= 8.0; zeta += 0.01) {
      std::vector<double> x(ns.size());
      double sxx = 0.0;
      for (std::size_t i = 0; i < ns.size(); ++i) {
        x[i] = std::pow(ns[i], -zeta);
        sxx += x[i] * x[i];
      }
      for (int k = 0; k <= 100; ++k) {
        const double c2 = ymax * 0.01 * k;
        double sxy = 0.0;
        for (std::size_t i = 0; i < ns.size(); ++i) {
          sxy += (y[i] - c2) * x[i];
        }
        const double c1 = std::max(0.0, sxy / sxx);
        double rss = 0.0;
        for (std::size_t i = 0; i < ns.size(); ++i) {
          const double r = y[i] - c1 * x[i] - c2;
          rss += r * r;
        }
        oracle = std::min(oracle, rss);
      }
    }
    CHECK(fit.rss <= oracle + 1e-12);
  }
}

TEST_CASE("correlation trend degenerate constant data") {
  std::vector<TrendPoint> pts{{40, 0.9}, {80, 0.9}, {120, 0.9}};
  const auto fit = fit_correlation_trend(pts);
  CHECK(fit.zeta == 1.0);
  CHECK(fit.c1 == 0.0);
  CHECK(fit.c2 == doctest::Approx(1.0 - 0.81).epsilon(1e-12));
}

TEST_CASE("correlation trend input validation") {
  std::vector<TrendPoint> two{{40, 0.9}, {80, 0.95}};
  CHECK_THROWS_AS(fit_correlation_trend(two), InsufficientDataError);
  std::vector<TrendPoint> dup{{40, 0.9}, {40, 0.91}, {40, 0.92}};
  CHECK_THROWS_AS(fit_correlation_trend(dup), InsufficientDataError);
  std::vector<TrendPoint> bad{{40, 0.9}, {80, 1.5}, {120, 0.92}};
  CHECK_THROWS_AS(fit_correlation_trend(bad), DomainError);
}

TEST_CASE("time trend interpolates an exact line") {
  std::vector<TrendPoint> pts;
  for (double n : {40.0, 80.0, 120.0, 160.0, 200.0}) {
    pts.push_back({n, 2.0 * n + 30.0});
  }
  const auto fit = fit_training_time_trend(pts);
  CHECK(fit.c3 == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.c4 == doctest::Approx(30.0).epsilon(1e-9));
}

TEST_CASE("time trend clips to nonnegative coefficients") {
  // Decreasing times force slope to the boundary, intercept refit to mean.
  std::vector<TrendPoint> dec{{40, 100.0}, {80, 60.0}, {120, 20.0}};
  const auto fit = fit_training_time_trend(dec);
  CHECK(fit.c3 == 0.0);
  CHECK(fit.c4 == doctest::Approx(60.0).epsilon(1e-12));
  // Steep line through a negative intercept refits through the origin.
  std::vector<TrendPoint> steep{{10, 5.0}, {20, 45.0}, {30, 85.0}};
  const auto fit2 = fit_training_time_trend(steep);
  CHECK(fit2.c4 == 0.0);
  CHECK(fit2.c3 > 0.0);
  std::vector<TrendPoint> one{{40, 10.0}, {40, 12.0}};
  CHECK_THROWS_AS(fit_training_time_trend(one), InsufficientDataError);
  std::vector<TrendPoint> neg{{40, 10.0}, {80, -1.0}};
  CHECK_THROWS_AS(fit_training_time_trend(neg), DomainError);
}

TEST_CASE("mse_upper_bound closed form and domain") {
  const TrendCoefficients coeffs{1.0, 10.0, 0.01, 2.0, 30.0};
  const CostModel cost{1.0, 100.0, 0.0};
  const double p = 1e4, sigma0 = 1.5;
  const double n = 50.0;
  const double numer = 10.0 * 100.0 / n + 0.01 * 100.0 + 1.0;
  const double denom = p - 101.0 * n - 2.0 * n - 30.0;
  CHECK(mse_upper_bound(n, coeffs, p, cost, sigma0) ==
        doctest::Approx(2.0 * sigma0 * sigma0 * numer / denom)
            .epsilon(1e-14));
  const double n_max = feasible_n_max(coeffs, p, cost);
  CHECK(n_max == doctest::Approx((p - 30.0) / 103.0).epsilon(1e-14));
  CHECK_THROWS_AS(mse_upper_bound(0.0, coeffs, p, cost, sigma0), DomainError);
  CHECK_THROWS_AS(mse_upper_bound(n_max, coeffs, p, cost, sigma0),
                  DomainError);
  TrendCoefficients bad = coeffs;
  bad.zeta = 0.0;
  CHECK_THROWS_AS(mse_upper_bound(n, bad, p, cost, sigma0), DomainError);
}

TEST_CASE("mse_upper_bound is convex at interior integers") {
  RngStream rng(103, "convexity");
  for (int trial = 0; trial < 20; ++trial) {
    TrendCoefficients coeffs;
    coeffs.zeta = rng.uniform(0.2, 3.0);
    coeffs.c1 = rng.uniform(0.5, 50.0);
    coeffs.c2 = rng.uniform(0.0, 0.05);
    coeffs.c3 = rng.uniform(0.0, 5.0);
    coeffs.c4 = rng.uniform(0.0, 200.0);
    const CostModel cost{rng.uniform(0.1, 5.0), rng.uniform(20.0, 300.0), 0.0};
    const double p = rng.uniform(5e3, 3e4);
    const double n_max = feasible_n_max(coeffs, p, cost);
    if (n_max < 10.0) continue;
    const auto f = [&](double n) {
      return mse_upper_bound(n, coeffs, p, cost, 1.0);
    };
    for (int k = 0; k < 50; ++k) {
      const double n = 2.0 + rng.uniform() * (n_max - 4.0);
      const double second = f(n - 1.0) - 2.0 * f(n) + f(n + 1.0);
      CHECK(second >= -1e-9 * std::max(1.0, std::fabs(f(n))));
    }
  }
}

TEST_CASE("optimal_training_size matches exhaustive search on the fixture") {
  const TrendCoefficients coeffs{1.0, 10.0, 0.01, 2.0, 30.0};
  const CostModel cost{1.0, 100.0, 0.0};
  const double p = 1e4, sigma0 = 1.0;
  const std::int64_t n_min = 2;
  const std::int64_t got =
      optimal_training_size(coeffs, p, cost, sigma0, n_min);
  const auto top =
      static_cast<std::int64_t>(std::floor(feasible_n_max(coeffs, p, cost))) -
      1;
  std::int64_t best = n_min;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::int64_t n = n_min; n <= top; ++n) {
    const double v =
        mse_upper_bound(static_cast<double>(n), coeffs, p, cost, sigma0);
    if (v < best_val) {
      best_val = v;
      best = n;
    }
  }
  CHECK(got == best);
}

TEST_CASE("optimal_training_size within one of brute force on random sets") {
  RngStream rng(104, "opt-n-oracle");
  int tested = 0;
  while (tested < 100) {
    TrendCoefficients coeffs;
    coeffs.zeta = rng.uniform(0.2, 3.0);
    coeffs.c1 = rng.uniform(0.5, 50.0);
    coeffs.c2 = rng.uniform(1e-4, 0.05);
    coeffs.c3 = rng.uniform(0.0, 5.0);
    coeffs.c4 = rng.uniform(0.0, 200.0);
    const CostModel cost{rng.uniform(0.1, 5.0), rng.uniform(20.0, 300.0), 0.0};
    const double p = rng.uniform(2e3, 3e4);
    const std::int64_t n_min = 1 + static_cast<std::int64_t>(rng.uniform_index(10));
    const auto top = static_cast<std::int64_t>(
                         std::floor(feasible_n_max(coeffs, p, cost))) -
                     1;
    if (top < n_min) continue;
    ++tested;
    const std::int64_t got =
        optimal_training_size(coeffs, p, cost, 1.0, n_min);
    std::int64_t best = n_min;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::int64_t n = n_min; n <= top; ++n) {
      const double v =
          mse_upper_bound(static_cast<double>(n), coeffs, p, cost, 1.0);
      if (v < best_val) {
        best_val = v;
        best = n;
      }
    }
    CHECK(std::llabs(got - best) <= 1);
  }
}

TEST_CASE("optimal_training_size rejects impossible budgets") {
  const TrendCoefficients coeffs{1.0, 10.0, 0.01, 0.0, 0.0};
  const CostModel cost{1.0, 100.0, 0.0};
  CHECK_THROWS_AS(optimal_training_size(coeffs, 100.0, cost, 1.0, 1),
                  BudgetError);
}

TEST_CASE("efficiency_check strict boundary") {
  const CostModel cost{1.0, 100.0, 0.0};
  const double boundary = std::sqrt(1.0 / 101.0);
  CHECK_FALSE(efficiency_check(boundary, cost));
  CHECK(efficiency_check(boundary + 1e-6, cost));
  CHECK_FALSE(efficiency_check(0.0, cost));
  CHECK(efficiency_check(-0.5, cost));  // sign does not matter
}

TEST_CASE("compute_policy hand-checked fixture") {
  const CostModel cost{1.0, 100.0, 0.0};
  const auto policy =
      compute_policy(100, 0.95, 2.0, 1.9, 30000.0, cost, 230.0);
  CHECK(policy.remaining_budget_after_training ==
        doctest::Approx(19670.0).epsilon(1e-14));
  CHECK(policy.m0_star == 150);
  CHECK(policy.m1_star == 4563);
  CHECK(policy.lambda_star == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(policy.r * policy.r ==
        doctest::Approx(100.0 * 0.9025 / 0.0975).epsilon(1e-12));
  // Budget conservation.
  CHECK(static_cast<double>(policy.m0_star) * cost.w0 +
            static_cast<double>(policy.m1_star) * cost.g <=
        policy.remaining_budget_after_training);
  CHECK(policy.m1_star >= policy.m0_star);
  CHECK(policy.predicted_mse_bound > 0.0);
}

TEST_CASE("compute_policy budget conservation on random configs") {
  RngStream rng(105, "policy-conservation");
  int tested = 0;
  while (tested < 200) {
    const CostModel cost{rng.uniform(0.1, 5.0), rng.uniform(20.0, 500.0), 0.0};
    const double rho = rng.uniform(0.6, 0.999);
    if (!efficiency_check(rho, cost)) continue;
    const auto n_star = static_cast<std::int64_t>(20 + rng.uniform_index(200));
    const double t_n = rng.uniform(0.0, 500.0);
    const double p =
        (cost.g + cost.w0) * static_cast<double>(n_star) + t_n +
        rng.uniform(10.0, 1e5);
    SamplingPolicy policy;
    try {
      policy = compute_policy(n_star, rho, 1.0, 0.9, p, cost, t_n);
    } catch (const PolicyError&) {
      continue;
    } catch (const BudgetError&) {
      continue;
    }
    ++tested;
    const double total =
        static_cast<double>(policy.n_star) * (cost.g + cost.w0) + t_n +
        static_cast<double>(policy.m0_star) * cost.w0 +
        static_cast<double>(policy.m1_star) * cost.g;
    CHECK(total <= p + 1e-9 * p);
    CHECK(policy.m1_star >= policy.m0_star);
    CHECK(policy.m0_star >= 2);
  }
}

TEST_CASE("compute_policy scale invariance") {
  const CostModel base{1.0, 120.0, 0.0};
  const auto p0 = compute_policy(80, 0.93, 1.4, 1.2, 40000.0, base, 190.0);
  for (double kappa : {0.5, 3.0, 10.0}) {
    const CostModel scaled{base.g * kappa, base.w0 * kappa, 0.0};
    const auto pk = compute_policy(80, 0.93, 1.4, 1.2, 40000.0 * kappa,
                                   scaled, 190.0 * kappa);
    CHECK(pk.m0_star == p0.m0_star);
    CHECK(pk.m1_star == p0.m1_star);
    CHECK(pk.r == doctest::Approx(p0.r).epsilon(1e-12));
    CHECK(pk.remaining_budget_after_training ==
          doctest::Approx(p0.remaining_budget_after_training * kappa)
              .epsilon(1e-12));
  }
}

TEST_CASE("compute_policy error paths") {
  const CostModel cost{1.0, 100.0, 0.0};
  // Inefficient surrogate.
  CHECK_THROWS_AS(compute_policy(50, 0.05, 1.0, 1.0, 1e5, cost, 0.0),
                  PolicyError);
  // Budget consumed by training.
  CHECK_THROWS_AS(compute_policy(50, 0.95, 1.0, 1.0, 5100.0, cost, 0.0),
                  BudgetError);
  // Perfect correlation clips, then degenerates to m0 < 2.
  CHECK_THROWS_AS(compute_policy(10, 1.0, 1.0, 1.0, 1e4 + 1011.0, cost, 1.0),
                  PolicyError);
  // Degenerate surrogate spread.
  CHECK_THROWS_AS(compute_policy(50, 0.95, 1.0, 0.0, 1e5, cost, 0.0),
                  DegenerateDataError);
}
