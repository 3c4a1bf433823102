#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agesched/analysis.hpp"
#include "agesched/errors.hpp"
#include "agesched/model.hpp"
#include "agesched/optimizer.hpp"
#include "agesched/pattern.hpp"

namespace agesched {

inline Pattern round_robin(std::size_t n_sources) {
  if (n_sources == 0) throw InputError("round robin needs at least one source");
  std::vector<std::size_t> e(n_sources);
  for (std::size_t n = 0; n < n_sources; ++n) e[n] = n;
  return Pattern(std::move(e));
}

// ---------------------------------------------------------------------------
// Insertion search
// ---------------------------------------------------------------------------

struct IsConfig {
  std::size_t max_size = 0;  // I
  bool stop_early = false;   // stop at the first round without improvement
};

struct IsResult {
  Pattern pattern;
  PatternReport report;
  std::size_t rounds = 0;
  std::size_t insertion_evaluations = 0;
};

/// Greedy pattern growth from round robin: each round adopts the single
/// insertion (source, position) with the lowest system AoI. Returns the best
/// pattern seen over all rounds.
inline IsResult insertion_search(const SystemSpec& system, const IsConfig& cfg) {
  const std::size_t N = system.size();
  if (cfg.max_size < N) throw InputError("insertion search size limit must be >= number of sources");

  Pattern current = round_robin(N);
  double current_aoi = system_aoi(current, system);
  Pattern best = current;
  double best_aoi = current_aoi;

  IsResult result;
  for (std::size_t size = N; size < cfg.max_size; ++size) {
    std::optional<Pattern> round_pattern;
    double round_aoi = std::numeric_limits<double>::infinity();
    for (std::size_t src = 0; src < N; ++src) {
      for (std::size_t pos = 0; pos <= size; ++pos) {
        Pattern candidate = current.with_insertion(pos, src);
        const double aoi = system_aoi(candidate, system);
        ++result.insertion_evaluations;
        if (!round_pattern || aoi < round_aoi) {
          round_aoi = aoi;
          round_pattern = std::move(candidate);
        }
      }
    }
    ++result.rounds;
    if (cfg.stop_early && !(round_aoi < current_aoi)) break;
    current = std::move(*round_pattern);
    current_aoi = round_aoi;
    if (current_aoi < best_aoi) {
      best = current;
      best_aoi = current_aoi;
    }
  }
  result.report = evaluate_pattern(best, system);
  result.pattern = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Probabilistic (i.i.d. slot) schedulers
// ---------------------------------------------------------------------------

/// Per-slot selection probabilities, strictly positive and summing to one.
struct TransmissionProbabilities {
  std::vector<double> r;

  static TransmissionProbabilities validated(std::vector<double> r) {
    if (r.empty()) throw InputError("probability vector is empty");
    double total = 0.0;
    for (std::size_t n = 0; n < r.size(); ++n) {
      if (!(r[n] > 0.0)) throw InputError(n, "transmission probability must be > 0");
      total += r[n];
    }
    if (std::abs(total - 1.0) > 1e-10) throw InputError("transmission probabilities must sum to 1");
    return {std::move(r)};
  }
};

/// Mean and second moment of the gap between successes of source n when
/// each slot picks source m with probability r_m.
///
/// Successes form a Bernoulli(beta = r_n u_n) thinning of the slots, so the
/// number of slots in a gap is geometric with mean (1-beta)/beta, and each of
/// those slots carries a service drawn from the mixture conditioned on "not a
/// success of n".
inline std::pair<double, double> pgaw_tilde_moments(const SystemSpec& system, std::span<const double> r,
                                                    std::size_t n) {
  if (r.size() != system.size()) throw InputError("probability vector has wrong length");
  const double beta = r[n] * system[n].success_prob;
  if (!(beta > 0.0)) throw InputError(n, "source can never succeed (r_n u_n = 0)");
  const double miss = 1.0 - beta;
  if (miss <= 0.0) return {0.0, 0.0};

  double mean_mass = 0.0, second_mass = 0.0;
  for (std::size_t m = 0; m < system.size(); ++m) {
    const double mass = m == n ? r[m] * system[m].drop_prob : r[m];
    mean_mass += mass * system[m].mean;
    second_mass += mass * system[m].second_moment;
  }
  const double mu = mean_mass / miss;
  const double second = second_mass / miss;
  const double slots = miss / beta;
  return {slots * mu, slots * second + 2.0 * slots * slots * mu * mu};
}

inline Report evaluate_probabilistic(const SystemSpec& system, std::span<const double> r) {
  std::vector<SourceMetrics> metrics(system.size());
  for (std::size_t n = 0; n < system.size(); ++n) {
    const auto [s_tilde, q_tilde] = pgaw_tilde_moments(system, r, n);
    metrics[n] = make_metrics(system[n], s_tilde, q_tilde);
  }
  return aggregate(system, std::move(metrics));
}

enum class Metric { aoi, paoi };

struct PgawStarResult {
  TransmissionProbabilities probabilities;
  Report report;
  std::size_t evaluations = 0;
};

namespace detail {

// Calls visit(r) for every grid point with coordinates in `lo + step * k`
// (k integer, k_i in [k_lo, k_hi]) over the first N-1 coordinates, the last
// taking the remainder; only strictly positive points are visited.
inline void for_each_simplex_point(std::size_t N, std::span<const double> centre, double step, long k_lo,
                                   long k_hi, const std::function<void(const std::vector<double>&)>& visit) {
  std::vector<double> r(N);
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double used) {
    if (i + 1 == N) {
      r[i] = 1.0 - used;
      if (r[i] > 1e-12) visit(r);
      return;
    }
    for (long k = k_lo; k <= k_hi; ++k) {
      const double v = centre[i] + step * static_cast<double>(k);
      if (v <= 1e-12 || used + v >= 1.0 - 1e-12) continue;
      r[i] = v;
      rec(i + 1, used + v);
    }
  };
  rec(0, 0.0);
}

}  // namespace detail

/// Optimized probabilistic scheduler. PAoI uses the closed-form square-root
/// law; AoI is a two-pass grid search (coarse at `resolution`, then a local
/// pass at a tenth of it around the incumbent).
inline PgawStarResult pgaw_star(const SystemSpec& system, Metric metric, double resolution = 0.02) {
  const std::size_t N = system.size();
  PgawStarResult out;
  if (metric == Metric::paoi) {
    out.probabilities = TransmissionProbabilities::validated(paoi_frequencies(system).frequency);
    out.report = evaluate_probabilistic(system, out.probabilities.r);
    out.evaluations = 1;
    return out;
  }
  if (!(resolution > 0.0 && resolution <= 0.1)) throw InputError("grid resolution must be in (0, 0.1]");
  if (N > 4)
    throw InputError("grid search supports at most 4 sources; use a coarser resolution on a reduced "
                     "system or estimate by simulation");
  if (N == 1) {
    out.probabilities = TransmissionProbabilities::validated({1.0});
    out.report = evaluate_probabilistic(system, out.probabilities.r);
    out.evaluations = 1;
    return out;
  }

  std::vector<double> best_r;
  double best_value = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<double>& r) {
    ++out.evaluations;
    const double v = evaluate_probabilistic(system, r).system_aoi;
    if (v < best_value) {
      best_value = v;
      best_r = r;
    }
  };

  const long steps = std::lround(1.0 / resolution);
  const std::vector<double> zero(N, 0.0);
  detail::for_each_simplex_point(N, zero, 1.0 / static_cast<double>(steps), 1, steps - 1, consider);
  const std::vector<double> centre = best_r;
  detail::for_each_simplex_point(N, centre, resolution / 10.0, -10, 10, consider);

  double total = 0.0;
  for (double v : best_r) total += v;
  for (double& v : best_r) v /= total;
  out.probabilities = TransmissionProbabilities::validated(best_r);
  out.report = evaluate_probabilistic(system, out.probabilities.r);
  return out;
}

}  // namespace agesched
