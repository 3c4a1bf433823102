#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "agesched/optimizer.hpp"
#include "oracles.hpp"

namespace agesched {
namespace {

SystemSpec det_system(std::vector<double> w, std::vector<double> s, std::vector<double> p) {
  std::vector<RawSource> raw;
  for (std::size_t n = 0; n < w.size(); ++n) raw.push_back({w[n], ServiceDistribution::deterministic(s[n]), p[n]});
  return validate_system(raw);
}

double sum(const std::vector<double>& v) {
  double t = 0;
  for (double x : v) t += x;
  return t;
}

TEST(PaoiFrequencies, Examples) {
  auto f = paoi_frequencies(det_system({0.5, 0.5}, {1, 1}, {0, 0.75})).frequency;
  EXPECT_NEAR(f[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(f[1], 2.0 / 3, 1e-12);

  f = paoi_frequencies(det_system({0.5, 0.25, 0.25}, {1, 1, 1}, {0, 0, 0})).frequency;
  EXPECT_NEAR(f[0], 0.4142, 1e-4);
  EXPECT_NEAR(f[1], 0.2929, 1e-4);
  EXPECT_NEAR(f[2], 0.2929, 1e-4);

  f = paoi_frequencies(unit_system(5)).frequency;
  for (double v : f) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(PaoiFrequencies, FrequenciesConsistentWithUtilizations) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto sys = oracle::random_system(1 + i % 8, rng);
    const auto plan = paoi_frequencies(sys);
    EXPECT_NEAR(sum(plan.utilization), 1.0, 1e-10);
    const auto f = frequencies_from_utilization(plan.utilization, sys);
    for (std::size_t n = 0; n < sys.size(); ++n) EXPECT_NEAR(f[n], plan.frequency[n], 1e-10);
  }
}

TEST(PaoiFrequencies, InvariantUnderWeightScaling) {
  std::mt19937_64 rng(6);
  const auto sys = oracle::random_system(4, rng);
  auto raw = sys.raw();
  for (auto& r : raw) r.weight *= 37.5;
  const auto a = paoi_frequencies(sys).frequency;
  const auto b = paoi_frequencies(validate_system(raw)).frequency;
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(a[n], b[n], 1e-14);
}

TEST(PaoiObjective, Examples) {
  const std::vector<double> one{1.0}, half{0.5, 0.5};
  EXPECT_DOUBLE_EQ(paoi_objective(unit_system(1), one), 2.0);
  EXPECT_DOUBLE_EQ(paoi_objective(unit_system(2), half), 3.0);
  const std::vector<double> bad{1.0, 0.0};
  EXPECT_THROW(paoi_objective(unit_system(2), bad), InputError);
}

TEST(PaoiObjective, OptimumBeatsPerturbationsAndRandomPoints) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t N = 2 + trial % 5;
    const auto sys = oracle::random_system(N, rng);
    const auto tau = paoi_frequencies(sys).utilization;
    const double best = paoi_objective(sys, tau);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        if (i == j) continue;
        for (double d : {1e-3, -1e-3}) {
          auto t = tau;
          t[i] += d;
          t[j] -= d;
          if (t[i] <= 0 || t[j] <= 0) continue;
          EXPECT_LE(best, paoi_objective(sys, t));
        }
      }
    }
    for (int k = 0; k < 100; ++k) EXPECT_LE(best, paoi_objective(sys, oracle::simplex_point(N, rng)));
  }
}

TEST(AoiCoefficients, Examples) {
  const std::vector<double> zero{0, 0};
  auto c = aoi_coefficients(det_system({0.5, 0.5}, {1, 1}, {0, 0}), zero);
  EXPECT_EQ(c.a, (std::vector<double>{0, 0}));
  EXPECT_EQ(c.b, (std::vector<double>{0.5, 0.5}));

  const std::vector<double> ct{0, 0.5};
  c = aoi_coefficients(det_system({0.5, 0.5}, {1, 1}, {0, 0.5}), ct);
  EXPECT_DOUBLE_EQ(c.a[0], 0.0);
  EXPECT_DOUBLE_EQ(c.a[1], 0.125);
  EXPECT_DOUBLE_EQ(c.b[0], 0.5);
  EXPECT_DOUBLE_EQ(c.b[1], 1.5);
  EXPECT_DOUBLE_EQ(c.a_min, 0.0);

  const auto exp_sys = validate_system({{0.3, ServiceDistribution::exponential(2), 0},
                                        {0.7, ServiceDistribution::exponential(5), 0}});
  c = aoi_coefficients(exp_sys, zero);
  for (std::size_t n = 0; n < 2; ++n) {
    EXPECT_DOUBLE_EQ(c.a[n], exp_sys[n].weight * exp_sys[n].mean);
    EXPECT_DOUBLE_EQ(c.b[n], exp_sys[n].weight * exp_sys[n].mean);
  }

  const std::vector<double> neg{0, -0.1};
  EXPECT_THROW(aoi_coefficients(unit_system(2), neg), InputError);
}

TEST(SolveAoiFixedPoint, Examples) {
  auto sol = solve_aoi_fixed_point(AoiProgramCoefficients::from({0}, {1}));
  EXPECT_NEAR(sol.x, -1.0, 1e-12);
  EXPECT_NEAR(sol.utilization[0], 1.0, 1e-12);

  sol = solve_aoi_fixed_point(AoiProgramCoefficients::from({0, 0}, {0.5, 0.5}));
  EXPECT_NEAR(sol.x, -2.0, 1e-12);
  EXPECT_NEAR(sol.utilization[0], 0.5, 1e-12);
  EXPECT_NEAR(sol.utilization[1], 0.5, 1e-12);
}

void expect_kkt(const AoiProgramCoefficients& c, const AoiSolution& sol) {
  EXPECT_LE(std::abs(sol.residual), 1e-10);
  EXPECT_NEAR(sum(sol.utilization), 1.0, 1e-9);
  EXPECT_LT(sol.x, c.a_min);
  double lo = 1e300, hi = -1e300, scale = 0;
  for (std::size_t n = 0; n < c.a.size(); ++n) {
    const double g = c.a[n] - c.b[n] / (sol.utilization[n] * sol.utilization[n]);
    lo = std::min(lo, g);
    hi = std::max(hi, g);
    scale = std::max(scale, std::abs(g));
  }
  EXPECT_LE(hi - lo, 1e-6 * std::max(1.0, scale));
}

TEST(SolveAoiFixedPoint, KktStationarity) {
  const auto c = AoiProgramCoefficients::from({0, 0.125}, {0.5, 1.5});
  const auto sol = solve_aoi_fixed_point(c);
  expect_kkt(c, sol);
  // independent check of the root
  EXPECT_NEAR(std::sqrt(0.5 / -sol.x) + std::sqrt(1.5 / (0.125 - sol.x)), 1.0, 1e-12);
}

TEST(SolveAoiFixedPoint, RandomProgramsSatisfyKkt) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ua(0.0, 5.0), ub(1e-4, 3.0), e(-6, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t N = 1 + trial % 12;
    std::vector<double> a(N), b(N);
    for (std::size_t n = 0; n < N; ++n) {
      a[n] = trial % 3 == 0 ? 0.0 : ua(rng) * std::pow(10.0, e(rng));
      b[n] = ub(rng) * std::pow(10.0, e(rng));
    }
    const auto c = AoiProgramCoefficients::from(a, b);
    expect_kkt(c, solve_aoi_fixed_point(c));
  }
}

TEST(SolveAoiFixedPoint, FunctionIncreasingBelowMinimum) {
  const auto c = AoiProgramCoefficients::from({0.3, 0.1, 2.0}, {0.2, 0.4, 0.1});
  double prev = -1e300;
  for (double x = -100; x < c.a_min; x += 0.01) {
    const double v = fixed_point_function(c, x);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(AoiFrequencies, ErrorFreeDeterministicMatchesSquareRootLaw) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> w(0.1, 2), s(0.2, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RawSource> raw;
    const std::size_t N = 1 + trial % 6;
    for (std::size_t n = 0; n < N; ++n) raw.push_back({w(rng), ServiceDistribution::deterministic(s(rng)), 0.0});
    const auto sys = validate_system(raw);
    const std::vector<double> zero(N, 0.0);
    const auto a = aoi_frequencies(sys, zero);
    const auto b = paoi_frequencies(sys);
    for (std::size_t n = 0; n < N; ++n) {
      EXPECT_NEAR(a.utilization[n], b.utilization[n], 1e-9);
      EXPECT_NEAR(a.frequency[n], b.frequency[n], 1e-9);
    }
    EXPECT_EQ(a.origin, FrequencyOrigin::aoi_fixed_point);
  }
}

TEST(FrequencyPlan, PeriodsAreServiceOverUtilization) {
  const auto sys = det_system({1, 1}, {2, 4}, {0, 0});
  const auto plan = paoi_frequencies(sys);
  const auto T = plan.periods(sys);
  EXPECT_NEAR(T[0], 2 / plan.utilization[0], 1e-12);
  EXPECT_NEAR(T[1], 4 / plan.utilization[1], 1e-12);
}

}  // namespace
}  // namespace agesched
