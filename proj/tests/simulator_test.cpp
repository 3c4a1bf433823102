#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "agesched/simulator.hpp"
#include "oracles.hpp"

namespace agesched {
namespace {

SimConfig short_run(std::uint64_t target = 200'000, std::uint64_t seed = 1) {
  SimConfig c;
  c.target = target;
  c.seed = seed;
  return c;
}

SystemSpec single(ServiceDistribution d, double p = 0) { return validate_system({{1.0, d, p}}); }

TEST(SimConfig, Validation) {
  SimConfig c;
  c.target = 10;
  c.warmup = 10;
  EXPECT_THROW(c.validate(), InputError);
  c.target = 100;
  c.batches = 1;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(SimulateCyclic, DeterministicSingleSource) {
  const auto est = simulate_cyclic(unit_system(1), Pattern::from_one_based({1}), short_run(50'000));
  EXPECT_DOUBLE_EQ(est.sources[0].aoi.mean, 1.5);
  EXPECT_DOUBLE_EQ(est.sources[0].paoi.mean, 2.0);
  EXPECT_NEAR(est.sources[0].aoi.std_error, 0.0, 1e-12);
  const auto a = agreement(est, evaluate_pattern(Pattern::from_one_based({1}), unit_system(1)));
  EXPECT_EQ(a.aoi_z[0], 0.0);
  EXPECT_EQ(a.paoi_z[0], 0.0);
  EXPECT_EQ(a.flagged, 0u);
}

TEST(SimulateCyclic, DeterministicPair) {
  const auto P = Pattern::from_one_based({1, 2});
  const auto est = simulate_cyclic(unit_system(2), P, short_run(50'000));
  for (const auto& s : est.sources) {
    EXPECT_NEAR(s.aoi.mean, 2.0, 1e-9);
    EXPECT_NEAR(s.paoi.mean, 3.0, 1e-9);
  }
  EXPECT_EQ(agreement(est, evaluate_pattern(P, unit_system(2))).flagged, 0u);
}

TEST(SimulateCyclic, ExponentialSingleSource) {
  const auto est = simulate_cyclic(single(ServiceDistribution::exponential(1)), Pattern::from_one_based({1}), SimConfig{});
  EXPECT_LE(std::abs(z_score(est.sources[0].aoi, 2.0)), 4.0);
  EXPECT_GT(est.sources[0].aoi.std_error, 0.0);
}

TEST(SimulateCyclic, WeightedExampleMatchesAnalysis) {
  const auto sys = validate_system({{1, ServiceDistribution::exponential(5), 0},
                                    {1, ServiceDistribution::exponential(2.5), 0},
                                    {1, ServiceDistribution::exponential(2.5), 0}});
  const auto P = Pattern::from_one_based({1, 2, 3, 2});
  const auto est = simulate_cyclic(sys, P, SimConfig{});
  const auto rep = evaluate_pattern(P, sys);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_LE(std::abs(z_score(est.sources[n].aoi, rep.sources[n].aoi)), 3.0) << n;
    EXPECT_LE(std::abs(z_score(est.sources[n].paoi, rep.sources[n].paoi)), 3.0) << n;
  }
}

TEST(SimulateCyclic, RetriesMatchAnalysis) {
  const auto sys = single(ServiceDistribution::deterministic(1), 0.5);
  const auto est = simulate_cyclic(sys, Pattern::from_one_based({1}), short_run());
  EXPECT_LE(std::abs(z_score(est.sources[0].aoi, 2.5)), 4.0);
  EXPECT_LE(std::abs(z_score(est.sources[0].paoi, 3.0)), 4.0);
}

TEST(SimulateCyclic, Reproducible) {
  std::mt19937_64 rng(41);
  const auto sys = oracle::random_system(3, rng);
  const auto P = oracle::random_pattern(3, 6, rng);
  const auto a = simulate_cyclic(sys, P, short_run(20'000, 42));
  const auto b = simulate_cyclic(sys, P, short_run(20'000, 42));
  const auto c = simulate_cyclic(sys, P, short_run(20'000, 43));
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_EQ(a.sources[n].aoi.mean, b.sources[n].aoi.mean);
    EXPECT_EQ(a.sources[n].paoi.std_error, b.sources[n].paoi.std_error);
    EXPECT_EQ(a.sources[n].attempts, b.sources[n].attempts);
  }
  EXPECT_EQ(a.slots, b.slots);
  EXPECT_NE(a.system_aoi.mean, c.system_aoi.mean);
}

TEST(SimulateCyclic, PeakSamplesDecompose) {
  const auto sys = validate_system({{1, ServiceDistribution::gamma(2, 0.5), 0.3},
                                    {1, ServiceDistribution::exponential(1), 0.6}});
  const auto P = Pattern::from_one_based({1, 2, 2});
  SimConfig c = short_run(20'000);
  c.record_samples = 500;
  const auto est = simulate_cyclic(sys, P, c);
  for (const auto& s : est.sources) {
    ASSERT_EQ(s.samples.size(), 500u);
    for (const auto& x : s.samples) {
      EXPECT_EQ(x.peak, x.reset + x.elapsed);
      EXPECT_GT(x.reset, 0.0);
      EXPECT_GT(x.elapsed, 0.0);
    }
  }
  std::ostringstream os;
  write_peak_samples_csv(os, est);
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("source,sample,reset,elapsed,peak\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1001);
}

TEST(SimulateCyclic, SuccessThinningAndSlotShares) {
  const auto sys = validate_system({{1, ServiceDistribution::deterministic(1), 0.2},
                                    {1, ServiceDistribution::exponential(2), 0.7},
                                    {1, ServiceDistribution::gamma(1, 2), 0.0}});
  const auto P = Pattern::from_one_based({1, 2, 1, 3, 2, 2});
  const auto est = simulate_cyclic(sys, P, short_run());
  std::uint64_t attempts = 0;
  for (std::size_t n = 0; n < 3; ++n) {
    const auto& s = est.sources[n];
    const double u = sys[n].success_prob;
    const double rate = static_cast<double>(s.successes) / static_cast<double>(s.attempts);
    const double se = std::sqrt(u * (1 - u) / static_cast<double>(s.attempts));
    EXPECT_LE(std::abs(rate - u), 4 * se + 1e-15) << n;
    attempts += s.attempts;
  }
  EXPECT_EQ(attempts, est.slots);
  // slots are handed out cyclically, so shares match counts up to one partial cycle
  const auto alpha = P.counts(3);
  for (std::size_t n = 0; n < 3; ++n) {
    const double expected = static_cast<double>(est.slots) * alpha[n] / P.size();
    EXPECT_LE(std::abs(static_cast<double>(est.sources[n].attempts) - expected), static_cast<double>(alpha[n]));
  }
}

TEST(SimulateCyclic, StandardErrorShrinksWithRunLength) {
  std::mt19937_64 rng(44);
  double ratio_sum = 0;
  int count = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const auto sys = oracle::random_system(3, rng, 0.5);
    const auto P = oracle::random_pattern(3, 5, rng);
    const auto a = simulate_cyclic(sys, P, short_run(100'000, 7 + trial));
    const auto b = simulate_cyclic(sys, P, short_run(200'000, 7 + trial));
    for (std::size_t n = 0; n < 3; ++n) {
      if (a.sources[n].aoi.std_error <= 0) continue;
      ratio_sum += a.sources[n].aoi.std_error / b.sources[n].aoi.std_error;
      ++count;
    }
  }
  EXPECT_NEAR(ratio_sum / count, std::sqrt(2.0), 0.15 * std::sqrt(2.0));
}

TEST(SimulateCyclic, DetectsCorruptedGapSecondMoment) {
  const auto sys = validate_system({{1, ServiceDistribution::exponential(1), 0.4},
                                    {1, ServiceDistribution::exponential(1), 0.2}});
  const auto P = Pattern::from_one_based({1, 2});
  const auto est = simulate_cyclic(sys, P, SimConfig{});
  auto rep = evaluate_pattern(P, sys);
  EXPECT_EQ(agreement(est, rep).flagged, 0u);
  for (std::size_t n = 0; n < 2; ++n) {
    auto& m = rep.sources[n];
    m = make_metrics(sys[n], m.s_tilde, 1.1 * m.q_tilde);
  }
  const auto bad = agreement(est, rep);
  double worst = 0;
  for (double z : bad.aoi_z) worst = std::max(worst, std::abs(z));
  EXPECT_GT(worst, 4.0);
}

TEST(SimulateProbabilistic, UniformPairMatchesClosedForm) {
  const std::vector<double> r{0.5, 0.5};
  const auto est = simulate_probabilistic(unit_system(2), r, short_run());
  const auto rep = evaluate_probabilistic(unit_system(2), r);
  for (std::size_t n = 0; n < 2; ++n) {
    EXPECT_LE(std::abs(z_score(est.sources[n].aoi, 2.5)), 4.0);
    EXPECT_LE(std::abs(z_score(est.sources[n].paoi, 3.0)), 4.0);
  }
  EXPECT_EQ(agreement(est, rep).flagged, 0u);
}

TEST(SimulateProbabilistic, SingleSourceIsCyclic) {
  const auto sys = single(ServiceDistribution::exponential(2), 0.3);
  const std::vector<double> one{1.0};
  const auto a = simulate_probabilistic(sys, one, short_run());
  const auto b = simulate_cyclic(sys, Pattern::from_one_based({1}), short_run());
  const double se = std::hypot(a.sources[0].aoi.std_error, b.sources[0].aoi.std_error);
  EXPECT_LE(std::abs(a.sources[0].aoi.mean - b.sources[0].aoi.mean), 4 * se);
}

TEST(SimulateProbabilistic, PeakAgeAtOptimalFrequenciesMatchesObjective) {
  const auto sys = validate_system({{2, ServiceDistribution::exponential(10), 0.1},
                                    {5, ServiceDistribution::exponential(1), 0.5},
                                    {4, ServiceDistribution::exponential(1), 0.6}});
  const auto plan = paoi_frequencies(sys);
  const auto est = simulate_probabilistic(sys, plan.frequency, short_run(300'000));
  EXPECT_LE(std::abs(z_score(est.system_paoi, paoi_objective(sys, plan.utilization))), 4.0);
}

TEST(Replication, PoolsByMeasuredCycles) {
  const auto sys = single(ServiceDistribution::exponential(1));
  const auto P = Pattern::from_one_based({1});
  const auto pooled = simulate_cyclic_replicated(sys, P, short_run(50'000, 3), 4);
  std::vector<SimEstimates> reps;
  for (std::uint64_t s = 3; s < 7; ++s) reps.push_back(simulate_cyclic(sys, P, short_run(50'000, s)));
  double mean = 0;
  for (const auto& r : reps) mean += r.sources[0].aoi.mean / 4;
  EXPECT_NEAR(pooled.sources[0].aoi.mean, mean, 1e-12);
  EXPECT_NEAR(pooled.sources[0].aoi.std_error, reps[0].sources[0].aoi.std_error / 2, 0.5 * reps[0].sources[0].aoi.std_error);
  EXPECT_EQ(pooled.sources[0].measured_cycles, 4 * reps[0].sources[0].measured_cycles);
}

TEST(ZScore, Conventions) {
  EXPECT_EQ(z_score({1.5, 0.0}, 1.5), 0.0);
  EXPECT_TRUE(std::isinf(z_score({1.6, 0.0}, 1.5)));
  EXPECT_DOUBLE_EQ(z_score({2.2, 0.1}, 2.0), 2.0);
}

}  // namespace
}  // namespace agesched
