#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agesched/analysis.hpp"
#include "agesched/errors.hpp"
#include "agesched/model.hpp"
#include "agesched/optimizer.hpp"
#include "agesched/pattern.hpp"

namespace agesched {

// ---------------------------------------------------------------------------
// Frequency quantization
// ---------------------------------------------------------------------------

/// Integer appearance counts approximating a frequency vector.
struct QuantizedPlan {
  std::vector<std::size_t> counts;  // K_n
  std::size_t size = 0;             // K
  double epsilon = 0.0;
  std::size_t floor_sum = 0;        // R = sum floor(K f_n)
};

namespace detail {

// Products like 3 / 0.3 land a few ulps above the integer they denote.
inline double snap_integer(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

}  // namespace detail

inline QuantizedPlan quantize_frequencies(std::span<const double> frequency, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InputError("epsilon must be >= 0");
  if (frequency.empty()) throw InputError("frequency vector is empty");
  double total = 0.0;
  for (std::size_t n = 0; n < frequency.size(); ++n) {
    if (!(frequency[n] > 0.0)) throw InputError(n, "frequency must be > 0");
    total += frequency[n];
  }
  std::vector<double> f(frequency.begin(), frequency.end());
  for (double& v : f) v /= total;
  const double f_min = *std::min_element(f.begin(), f.end());

  QuantizedPlan plan;
  plan.epsilon = epsilon;
  plan.size = static_cast<std::size_t>(std::ceil(detail::snap_integer((1.0 + epsilon) / f_min)));

  const std::size_t N = f.size();
  const double K = static_cast<double>(plan.size);
  std::vector<double> frac(N);
  plan.counts.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    const double kf = detail::snap_integer(K * f[n]);
    const double fl = std::floor(kf);
    plan.counts[n] = static_cast<std::size_t>(fl);
    frac[n] = kf - fl;
    plan.floor_sum += plan.counts[n];
  }

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return frac[x] > frac[y]; });
  const std::size_t extra = plan.size > plan.floor_sum ? std::min(plan.size - plan.floor_sum, N) : 0;
  for (std::size_t i = 0; i < extra; ++i) ++plan.counts[order[i]];

  // K follows the counts if normalization rounding left a mismatch.
  plan.size = std::accumulate(plan.counts.begin(), plan.counts.end(), std::size_t{0});
  for (std::size_t n = 0; n < N; ++n)
    if (plan.counts[n] == 0) throw InternalError("quantization produced a zero count for source " + std::to_string(n + 1));
  return plan;
}

// ---------------------------------------------------------------------------
// Deficit round robin spreading
// ---------------------------------------------------------------------------

enum class TieBreak {
  deterministic,  // skip the source inserted last round if possible, then lowest index
  random,         // uniform among the tied sources
};

struct SpreadOptions {
  TieBreak tie_break = TieBreak::deterministic;
  std::uint64_t seed = 0;
};

/// Deficit-counter spreading with a per-round quantum that brings exactly one
/// source to a full counter.
///
/// Counters are kept exactly: after the selected source reaches its c-th
/// appearance every counter equals  c K_n / K_sel - c_n,  so selection is an
/// integer comparison of (c_n + 1) / K_n and ties are exact.
class DrrSpreader {
public:
  explicit DrrSpreader(const QuantizedPlan& plan, SpreadOptions options = {})
      : quotas_(plan.counts), appeared_(plan.counts.size(), 0), options_(options), rng_(options.seed) {
    total_ = std::accumulate(quotas_.begin(), quotas_.end(), std::size_t{0});
    if (total_ == 0 || total_ != plan.size) throw InputError("quantized plan counts do not sum to its size");
    for (std::size_t n = 0; n < quotas_.size(); ++n) {
      if (quotas_[n] == 0) throw InputError(n, "appearance count must be >= 1");
      heap_.push(Entry{1, quotas_[n], n});
    }
  }

  std::size_t rounds_done() const noexcept { return round_; }
  bool done() const noexcept { return round_ >= total_; }
  std::optional<std::size_t> last() const noexcept { return last_; }

  /// Counter of source n at the current point (after the last reset).
  double deficit(std::size_t n) const {
    if (!last_) return 0.0;
    const double t = static_cast<double>(appeared_[*last_]) / static_cast<double>(quotas_[*last_]);
    return t * static_cast<double>(quotas_[n]) - static_cast<double>(appeared_[n]);
  }

  std::vector<double> deficits() const {
    std::vector<double> out(quotas_.size());
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = deficit(n);
    return out;
  }

  /// Counters as they stand after the last round's increment, before the
  /// selected source is reset; the selected entry is 1.
  std::vector<double> deficits_before_reset() const {
    std::vector<double> out = deficits();
    if (last_) {
      const double t = static_cast<double>(appeared_[*last_]) / static_cast<double>(quotas_[*last_]);
      out[*last_] = t * static_cast<double>(quotas_[*last_]) - static_cast<double>(appeared_[*last_] - 1);
    }
    return out;
  }

  /// Runs one round and returns the inserted source.
  std::size_t step() {
    if (done()) throw InputError("spreading already produced every entry");
    Entry chosen = heap_.top();
    heap_.pop();
    if (options_.tie_break == TieBreak::deterministic) {
      if (last_ && chosen.source == *last_ && !heap_.empty() && tied(heap_.top(), chosen)) {
        Entry other = heap_.top();
        heap_.pop();
        heap_.push(chosen);
        chosen = other;
      }
    } else {
      std::vector<Entry> ties{chosen};
      while (!heap_.empty() && tied(heap_.top(), chosen)) {
        ties.push_back(heap_.top());
        heap_.pop();
      }
      std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
      const std::size_t i = pick(rng_);
      chosen = ties[i];
      for (std::size_t j = 0; j < ties.size(); ++j)
        if (j != i) heap_.push(ties[j]);
    }

    const std::size_t m = chosen.source;
    ++appeared_[m];
    heap_.push(Entry{appeared_[m] + 1, quotas_[m], m});
    last_ = m;
    ++round_;
    return m;
  }

private:
  struct Entry {
    std::size_t next;   // appearance number it fires at
    std::size_t quota;  // K_n
    std::size_t source;
  };
  // next / quota compared by cross multiplication; exact while K < 2^32
  static bool earlier(const Entry& x, const Entry& y) {
    const std::uint64_t lhs = static_cast<std::uint64_t>(x.next) * y.quota;
    const std::uint64_t rhs = static_cast<std::uint64_t>(y.next) * x.quota;
    if (lhs != rhs) return lhs < rhs;
    return x.source < y.source;
  }
  static bool tied(const Entry& x, const Entry& y) {
    return static_cast<std::uint64_t>(x.next) * y.quota == static_cast<std::uint64_t>(y.next) * x.quota;
  }
  struct Later {
    bool operator()(const Entry& x, const Entry& y) const { return earlier(y, x); }
  };

  std::vector<std::size_t> quotas_;
  std::vector<std::size_t> appeared_;
  std::size_t total_ = 0;
  std::size_t round_ = 0;
  std::optional<std::size_t> last_;
  SpreadOptions options_;
  std::mt19937_64 rng_;
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
};

inline Pattern spread_pattern(const QuantizedPlan& plan, SpreadOptions options = {}) {
  DrrSpreader drr(plan, options);
  std::vector<std::size_t> entries;
  entries.reserve(plan.size);
  while (!drr.done()) entries.push_back(drr.step());
  return Pattern(std::move(entries));
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

struct SynthesisResult {
  Pattern pattern;
  PatternReport report;
  FrequencyPlan plan;
  QuantizedPlan quantized;

  std::vector<double> realized_frequency() const {
    std::vector<double> out(quantized.counts.size());
    for (std::size_t n = 0; n < out.size(); ++n)
      out[n] = static_cast<double>(quantized.counts[n]) / static_cast<double>(quantized.size);
    return out;
  }
};

inline SynthesisResult synthesize_from_plan(const SystemSpec& system, FrequencyPlan plan, double epsilon,
                                            SpreadOptions options = {}) {
  SynthesisResult r;
  r.quantized = quantize_frequencies(plan.frequency, epsilon);
  r.pattern = spread_pattern(r.quantized, options);
  r.report = evaluate_pattern(r.pattern, system);
  r.plan = std::move(plan);
  return r;
}

/// Peak-AoI scheduler: square-root-law frequencies, quantized and spread.
inline SynthesisResult spms(const SystemSpec& system, double epsilon, SpreadOptions options = {}) {
  return synthesize_from_plan(system, paoi_frequencies(system), epsilon, options);
}

struct SamsConfig {
  std::vector<double> epsilons;
  std::size_t iterations = 1;

  /// {0, step, 2 step, ..., hi}
  static std::vector<double> epsilon_grid(double hi, double step) {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor(hi / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(static_cast<double>(i) * step);
    return out;
  }
  static SamsConfig sams1() { return {{0.0}, 1}; }
  static SamsConfig sams2() { return {epsilon_grid(2.0, 0.2), 1}; }
  static SamsConfig sams3() { return {epsilon_grid(2.0, 0.2), 3}; }

  void validate() const {
    if (epsilons.empty()) throw InputError("epsilon set must be non-empty");
    for (double e : epsilons)
      if (!(e >= 0.0)) throw InputError("epsilon values must be >= 0");
    if (iterations < 1) throw InputError("iteration count must be >= 1");
  }
};

struct SamsCandidate {
  std::size_t iteration;  // one-based
  double epsilon;
  std::size_t size;
  double system_aoi;
  double system_paoi;
  bool chosen_in_round = false;
};

struct SamsResult {
  Pattern pattern;
  PatternReport report;
  FrequencyPlan plan;  // targets of the iteration that produced `pattern`
  std::size_t best_iteration = 0;
  double best_epsilon = 0.0;
  std::vector<SamsCandidate> trace;
};

namespace detail {

// Total order used to pick among candidates: AoI, then smaller K, then pattern.
inline bool better_candidate(const PatternReport& x, const PatternReport& y) {
  if (x.system_aoi != y.system_aoi) return x.system_aoi < y.system_aoi;
  if (x.pattern.size() != y.pattern.size()) return x.pattern.size() < y.pattern.size();
  return x.pattern < y.pattern;
}

}  // namespace detail

/// AoI scheduler: alternate the convex frequency program with the gap scovs
/// of the best pattern found in each round.
inline SamsResult sams(const SystemSpec& system, const SamsConfig& config, SpreadOptions options = {}) {
  config.validate();
  std::vector<double> c_tilde(system.size());
  for (std::size_t n = 0; n < system.size(); ++n) c_tilde[n] = system[n].drop_prob;

  SamsResult result;
  std::optional<PatternReport> best;
  for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
    const FrequencyPlan plan = aoi_frequencies(system, c_tilde);
    std::optional<PatternReport> round_best;
    std::size_t round_best_index = 0;
    double round_epsilon = 0.0;
    for (double eps : config.epsilons) {
      const QuantizedPlan q = quantize_frequencies(plan.frequency, eps);
      PatternReport rep = evaluate_pattern(spread_pattern(q, options), system);
      result.trace.push_back({iter, eps, q.size, rep.system_aoi, rep.system_paoi, false});
      if (!round_best || detail::better_candidate(rep, *round_best)) {
        round_best = std::move(rep);
        round_best_index = result.trace.size() - 1;
        round_epsilon = eps;
      }
    }
    result.trace[round_best_index].chosen_in_round = true;
    c_tilde = round_best->c_tilde();
    if (!best || detail::better_candidate(*round_best, *best)) {
      best = *round_best;
      result.plan = plan;
      result.best_iteration = iter;
      result.best_epsilon = round_epsilon;
    }
  }
  result.report = std::move(*best);
  result.pattern = result.report.pattern;
  return result;
}

}  // namespace agesched
