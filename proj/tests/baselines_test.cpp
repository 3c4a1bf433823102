#include <gtest/gtest.h>

#include <random>

#include "agesched/baselines.hpp"
#include "oracles.hpp"

namespace agesched {
namespace {

SystemSpec fig2_system(double s3) {
  return validate_system({{25, ServiceDistribution::deterministic(5), 0},
                          {5, ServiceDistribution::deterministic(2.5), 0},
                          {1, ServiceDistribution::deterministic(s3), 0}});
}

TEST(RoundRobin, Patterns) {
  EXPECT_EQ(round_robin(1), Pattern::from_one_based({1}));
  EXPECT_EQ(round_robin(3), Pattern::from_one_based({1, 2, 3}));
  EXPECT_THROW(round_robin(0), InputError);
}

TEST(InsertionSearch, SymmetricPairKeepsRoundRobin) {
  const auto r = insertion_search(unit_system(2), {8, false});
  EXPECT_EQ(r.pattern, Pattern::from_one_based({1, 2}));
  EXPECT_NEAR(r.report.system_aoi, 2.0, 1e-12);
}

TEST(InsertionSearch, EvaluationCount) {
  // rounds grow the pattern from size 3 to 20: sum_{i=3}^{19} 3 (i + 1)
  const auto r = insertion_search(fig2_system(2.5), {20, false});
  EXPECT_EQ(r.insertion_evaluations, 612u);
  EXPECT_EQ(r.rounds, 17u);
}

TEST(InsertionSearch, NeverWorseThanRoundRobin) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t N = 2 + trial % 4;
    const auto sys = oracle::random_system(N, rng);
    const auto r = insertion_search(sys, {N + 6, trial % 2 == 0});
    EXPECT_LE(r.report.system_aoi, evaluate_pattern(round_robin(N), sys).system_aoi);
    EXPECT_NEAR(r.report.system_aoi, system_aoi(r.pattern, sys), 1e-12);
  }
}

TEST(InsertionSearch, StopEarlyResultIsLocallyOptimalForPairs) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = oracle::random_system(2, rng);
    const auto r = insertion_search(sys, {40, true});
    if (r.pattern.size() + 1 >= 40) continue;  // limit reached, not a stop
    const double v = r.report.system_aoi;
    for (std::size_t src = 0; src < 2; ++src)
      for (std::size_t pos = 0; pos <= r.pattern.size(); ++pos)
        EXPECT_GE(system_aoi(r.pattern.with_insertion(pos, src), sys), v * (1 - 1e-12));
  }
}

TEST(InsertionSearch, RejectsSmallLimit) { EXPECT_THROW(insertion_search(unit_system(3), {2, false}), InputError); }

TEST(PgawMoments, Examples) {
  const std::vector<double> half{0.5, 0.5};
  auto [s, q] = pgaw_tilde_moments(unit_system(2), half, 0);
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_NEAR(q, 3.0, 1e-12);
  const auto rep = evaluate_probabilistic(unit_system(2), half);
  EXPECT_NEAR(rep.sources[0].aoi, 2.5, 1e-12);
  EXPECT_NEAR(rep.sources[0].paoi, 3.0, 1e-12);

  const std::vector<double> one{1.0};
  std::tie(s, q) = pgaw_tilde_moments(unit_system(1), one, 0);
  EXPECT_EQ(s, 0.0);
  EXPECT_EQ(q, 0.0);
}

// Brute-force compound sum: the gap is a sum of G ~ Geom slots each carrying
// an independent mixture draw; moments by conditioning on G with a series.
std::pair<double, double> compound_by_series(const SystemSpec& sys, const std::vector<double>& r, std::size_t n) {
  const double beta = r[n] * sys[n].success_prob;
  double mu = 0, m2 = 0;
  for (std::size_t m = 0; m < sys.size(); ++m) {
    const double w = (m == n ? r[m] * sys[m].drop_prob : r[m]) / (1 - beta);
    mu += w * sys[m].mean;
    m2 += w * sys[m].second_moment;
  }
  const double var = m2 - mu * mu;
  double first = 0, second = 0, prob = beta;
  for (int g = 0; g < 100000 && prob > 1e-20; ++g) {
    first += prob * g * mu;
    second += prob * (g * var + g * g * mu * mu);
    prob *= 1 - beta;
  }
  return {first, second};
}

TEST(PgawMoments, MatchCompoundSeries) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t N = 2 + trial % 5;
    const auto sys = oracle::random_system(N, rng);
    const auto r = oracle::simplex_point(N, rng);
    for (std::size_t n = 0; n < N; ++n) {
      if (r[n] * sys[n].success_prob < 1e-3) continue;
      const auto [s, q] = pgaw_tilde_moments(sys, r, n);
      const auto [s2, q2] = compound_by_series(sys, r, n);
      EXPECT_NEAR(s, s2, 1e-9 * std::max(1.0, s2));
      EXPECT_NEAR(q, q2, 1e-8 * std::max(1.0, q2));
    }
  }
}

TEST(PgawMoments, PeakAgeMatchesUtilizationForm) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t N = 1 + trial % 6;
    const auto sys = oracle::random_system(N, rng);
    const auto r = oracle::simplex_point(N, rng);
    double busy = 0;
    for (std::size_t n = 0; n < N; ++n) busy += r[n] * sys[n].mean;
    std::vector<double> tau(N);
    for (std::size_t n = 0; n < N; ++n) tau[n] = r[n] * sys[n].mean / busy;
    const auto rep = evaluate_probabilistic(sys, r);
    EXPECT_NEAR(rep.system_paoi, paoi_objective(sys, tau), 1e-9 * rep.system_paoi);
  }
}

TEST(PgawMoments, Rejections) {
  const std::vector<double> bad{0.0, 1.0};
  EXPECT_THROW(TransmissionProbabilities::validated(bad), InputError);
  EXPECT_THROW(TransmissionProbabilities::validated({0.5, 0.6}), InputError);
  EXPECT_THROW(evaluate_probabilistic(unit_system(3), std::vector<double>{0.5, 0.5}), InputError);
}

TEST(PgawStar, SymmetricAoiIsUniform) {
  for (std::size_t N : {2u, 3u, 4u}) {
    const auto r = pgaw_star(unit_system(N), Metric::aoi, 0.02);
    for (double v : r.probabilities.r) EXPECT_NEAR(v, 1.0 / N, 2e-3);
  }
}

TEST(PgawStar, PaoiIsSquareRootLaw) {
  const auto sys = validate_system({{0.5, ServiceDistribution::deterministic(1), 0},
                                    {0.5, ServiceDistribution::deterministic(1), 0.75}});
  const auto r = pgaw_star(sys, Metric::paoi);
  EXPECT_NEAR(r.probabilities.r[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(r.probabilities.r[1], 2.0 / 3, 1e-12);
  EXPECT_NEAR(r.report.system_paoi, paoi_objective(sys, paoi_frequencies(sys).utilization), 1e-9);
}

TEST(PgawStar, GridOptimumBeatsRandomPoints) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 5; ++trial) {
    const auto sys = oracle::random_system(3, rng);
    const auto best = pgaw_star(sys, Metric::aoi, 0.02);
    for (int k = 0; k < 200; ++k)
      EXPECT_LE(best.report.system_aoi, evaluate_probabilistic(sys, oracle::simplex_point(3, rng)).system_aoi * (1 + 1e-4));
  }
}

TEST(PgawStar, Guards) {
  EXPECT_THROW(pgaw_star(unit_system(5), Metric::aoi), InputError);
  EXPECT_THROW(pgaw_star(unit_system(3), Metric::aoi, 0.0), InputError);
  EXPECT_THROW(pgaw_star(unit_system(3), Metric::aoi, 0.2), InputError);
  EXPECT_NO_THROW(pgaw_star(unit_system(8), Metric::paoi));
}

TEST(Fig2Ordering, InsertionSearchBelowProbabilisticOptimum) {
  for (double s3 : {0.5, 2.5, 8.0}) {
    const auto sys = fig2_system(s3);
    const double is = insertion_search(sys, {20, false}).report.system_aoi;
    const double pg = pgaw_star(sys, Metric::aoi, 0.02).report.system_aoi;
    EXPECT_LT(is, pg) << "s3 = " << s3;
  }
}

}  // namespace
}  // namespace agesched
