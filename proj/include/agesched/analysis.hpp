#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "agesched/errors.hpp"
#include "agesched/model.hpp"
#include "agesched/pattern.hpp"
#include "agesched/truncated_mgf.hpp"

namespace agesched {

// ---------------------------------------------------------------------------
// Sub-patterns
// ---------------------------------------------------------------------------

/// Entries strictly between two cyclically consecutive appearances of a source.
struct Subpattern {
  std::vector<std::size_t> counts;  // appearances of each source inside the gap
  double mean = 0.0;
  double variance = 0.0;
  double second_moment = 0.0;
};

/// `sources[n][k]` is the gap that follows the k-th appearance of source n.
struct SubpatternMoments {
  std::vector<std::vector<Subpattern>> sources;

  const std::vector<Subpattern>& operator[](std::size_t n) const { return sources[n]; }
};

/// Explicit per-gap source counts. Memory is O(N K); the evaluation path uses
/// gap_moments() instead.
inline SubpatternMoments extract_subpatterns(const Pattern& pattern, const SystemSpec& system) {
  const std::size_t n_sources = system.size();
  check_feasible(pattern, n_sources);
  const std::size_t K = pattern.size();

  SubpatternMoments out;
  out.sources.resize(n_sources);
  for (std::size_t n = 0; n < n_sources; ++n) {
    std::vector<std::size_t> positions;
    for (std::size_t k = 0; k < K; ++k)
      if (pattern[k] == n) positions.push_back(k);
    for (std::size_t start : positions) {
      Subpattern gap;
      gap.counts.assign(n_sources, 0);
      for (std::size_t step = 1; step < K; ++step) {
        const std::size_t m = pattern[(start + step) % K];
        if (m == n) break;
        ++gap.counts[m];
        gap.mean += system[m].mean;
        gap.variance += system[m].variance;
      }
      gap.second_moment = gap.variance + gap.mean * gap.mean;
      out.sources[n].push_back(std::move(gap));
    }
  }
  return out;
}

/// Means and variances of the gaps of one source, indexed by appearance.
struct GapMoments {
  std::vector<std::size_t> positions;
  std::vector<double> mean;
  std::vector<double> variance;

  std::size_t appearances() const noexcept { return positions.size(); }
};

/// Gap moments of every source from prefix sums over the pattern, O(K) total.
inline std::vector<GapMoments> gap_moments(const Pattern& pattern, const SystemSpec& system) {
  const std::size_t n_sources = system.size();
  check_feasible(pattern, n_sources);
  const std::size_t K = pattern.size();

  std::vector<long double> mean_prefix(K + 1, 0.0L), var_prefix(K + 1, 0.0L);
  for (std::size_t k = 0; k < K; ++k) {
    mean_prefix[k + 1] = mean_prefix[k] + system[pattern[k]].mean;
    var_prefix[k + 1] = var_prefix[k] + system[pattern[k]].variance;
  }

  std::vector<GapMoments> gaps(n_sources);
  for (std::size_t k = 0; k < K; ++k) gaps[pattern[k]].positions.push_back(k);

  auto between = [&](const std::vector<long double>& prefix, std::size_t from, std::size_t to) {
    // sum over positions strictly between `from` and the next `to`, cyclically
    if (to > from) return static_cast<double>(prefix[to] - prefix[from + 1]);
    return static_cast<double>((prefix[K] - prefix[from + 1]) + prefix[to]);
  };

  for (auto& g : gaps) {
    const std::size_t alpha = g.positions.size();
    g.mean.resize(alpha);
    g.variance.resize(alpha);
    for (std::size_t k = 0; k < alpha; ++k) {
      const std::size_t from = g.positions[k];
      const std::size_t to = g.positions[(k + 1) % alpha];
      g.mean[k] = std::max(0.0, between(mean_prefix, from, to));
      g.variance[k] = std::max(0.0, between(var_prefix, from, to));
    }
  }
  return gaps;
}

// ---------------------------------------------------------------------------
// Moments of the inter-success gap
// ---------------------------------------------------------------------------

/// Second-order expansions of the numerator and denominator of the
/// conditional gap MGF, one numerator per appearance. The denominator does
/// not depend on the appearance.
struct SecondOrderTerms {
  double numerator0 = 0.0;  // common value of every numerator at s = 0
  double denominator0 = 0.0;
  std::vector<double> a;  // numerator s coefficients
  std::vector<double> b;  // numerator s^2 coefficients
  double c = 0.0;         // denominator s coefficient
  double d = 0.0;         // denominator s^2 coefficient
};

/// Expands every conditional gap MGF to second order in O(alpha) work:
/// the numerators obey M_k = G_k (D + p G M_{k+1}) cyclically, so one forward
/// pass for M_0 and one backward pass give all of them.
inline SecondOrderTerms second_order_terms(const SourceSpec& src, const GapMoments& gaps) {
  const std::size_t alpha = gaps.appearances();
  const double p = src.drop_prob;
  const double u = src.success_prob;
  const TruncatedMgf retry = p * TruncatedMgf::from_moments(src.mean, src.second_moment);

  std::vector<TruncatedMgf> gap_mgf(alpha);
  for (std::size_t k = 0; k < alpha; ++k)
    gap_mgf[k] = TruncatedMgf::from_moments(gaps.mean[k], gaps.variance[k] + gaps.mean[k] * gaps.mean[k]);

  TruncatedMgf run = gap_mgf[0];
  TruncatedMgf m0 = run;
  for (std::size_t j = 1; j < alpha; ++j) {
    run = run * retry * gap_mgf[j];
    m0 += run;
  }
  const TruncatedMgf denominator = TruncatedMgf::constant(1.0) - run * retry;

  std::vector<TruncatedMgf> numer(alpha);
  numer[0] = m0;
  TruncatedMgf next = m0;
  for (std::size_t k = alpha; k-- > 1;) {
    next = gap_mgf[k] * (denominator + retry * next);
    numer[k] = next;
  }

  SecondOrderTerms t;
  t.denominator0 = denominator.g0;
  t.c = denominator.g1;
  t.d = denominator.g2;
  t.a.resize(alpha);
  t.b.resize(alpha);
  const double expected0 = 1.0 - std::pow(p, static_cast<double>(alpha));
  t.numerator0 = u * numer[0].g0;
  for (std::size_t k = 0; k < alpha; ++k) {
    const double n0 = u * numer[k].g0;
    if (std::abs(n0 - expected0) > 1e-9 || std::abs(t.denominator0 - expected0) > 1e-9) {
      std::ostringstream msg;
      msg << "gap expansion inconsistent: N_" << k << "(0)=" << n0 << " D(0)=" << t.denominator0
          << " expected " << expected0 << " (p=" << p << ", alpha=" << alpha << ")";
      throw InternalError(msg.str());
    }
    t.a[k] = u * numer[k].g1;
    t.b[k] = u * numer[k].g2;
  }
  return t;
}

/// Closed-form mean of the inter-success gap.
inline double tilde_mean_from_gaps(const SourceSpec& src, const GapMoments& gaps) {
  double total = 0.0;
  for (double m : gaps.mean) total += m;
  const double avg = total / static_cast<double>(gaps.appearances());
  return (src.drop_prob * src.mean + avg) / src.success_prob;
}

/// Second moment of the gap by the quotient rule, averaged over appearances.
inline double tilde_second_moment_from_terms(const SecondOrderTerms& t) {
  const double d0 = t.denominator0;
  double total = 0.0;
  for (std::size_t k = 0; k < t.a.size(); ++k)
    total += 2.0 * t.c * (t.c - t.a[k]) / (d0 * d0) + 2.0 * (t.b[k] - t.d) / d0;
  return total / static_cast<double>(t.a.size());
}

inline double tilde_mean(const Pattern& pattern, const SystemSpec& system, std::size_t n) {
  const auto gaps = gap_moments(pattern, system);
  return tilde_mean_from_gaps(system[n], gaps[n]);
}

inline double tilde_second_moment(const Pattern& pattern, const SystemSpec& system, std::size_t n) {
  const auto gaps = gap_moments(pattern, system);
  return tilde_second_moment_from_terms(second_order_terms(system[n], gaps[n]));
}

// ---------------------------------------------------------------------------
// Per-source and system metrics
// ---------------------------------------------------------------------------

/// Mean AoI from the first two moments of the service time and the gap.
inline double source_aoi(double s, double q, double s_tilde, double q_tilde) {
  return (2.0 * s * s + 4.0 * s * s_tilde + q + q_tilde) / (2.0 * (s + s_tilde));
}

inline double source_paoi(double s, double s_tilde) { return 2.0 * s + s_tilde; }

struct SourceMetrics {
  double s_tilde = 0.0;
  double q_tilde = 0.0;
  double c_tilde = 0.0;
  double aoi = 0.0;
  double paoi = 0.0;
};

inline SourceMetrics make_metrics(const SourceSpec& src, double s_tilde, double q_tilde) {
  SourceMetrics m;
  m.s_tilde = s_tilde;
  m.q_tilde = q_tilde;
  m.c_tilde = s_tilde > 0.0 ? std::max(0.0, (q_tilde - s_tilde * s_tilde) / (s_tilde * s_tilde)) : 0.0;
  m.aoi = source_aoi(src.mean, src.second_moment, s_tilde, q_tilde);
  m.paoi = source_paoi(src.mean, s_tilde);
  return m;
}

/// Per-source metrics and their weighted sums.
struct Report {
  std::vector<SourceMetrics> sources;
  double system_aoi = 0.0;
  double system_paoi = 0.0;

  std::vector<double> c_tilde() const {
    std::vector<double> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(s.c_tilde);
    return out;
  }
};

inline Report aggregate(const SystemSpec& system, std::vector<SourceMetrics> per_source) {
  Report r;
  r.sources = std::move(per_source);
  for (std::size_t n = 0; n < system.size(); ++n) {
    r.system_aoi += system[n].weight * r.sources[n].aoi;
    r.system_paoi += system[n].weight * r.sources[n].paoi;
  }
  return r;
}

struct PatternReport : Report {
  Pattern pattern;
  std::vector<std::size_t> counts;
};

inline PatternReport evaluate_pattern(const Pattern& pattern, const SystemSpec& system) {
  const auto gaps = gap_moments(pattern, system);
  std::vector<SourceMetrics> metrics(system.size());
  for (std::size_t n = 0; n < system.size(); ++n) {
    const double s_tilde = tilde_mean_from_gaps(system[n], gaps[n]);
    const double q_tilde = tilde_second_moment_from_terms(second_order_terms(system[n], gaps[n]));
    metrics[n] = make_metrics(system[n], s_tilde, q_tilde);
  }
  PatternReport report;
  static_cast<Report&>(report) = aggregate(system, std::move(metrics));
  report.pattern = pattern;
  report.counts.resize(system.size());
  for (std::size_t n = 0; n < system.size(); ++n) report.counts[n] = gaps[n].appearances();
  return report;
}

/// System AoI only, for search loops that compare many candidates.
inline double system_aoi(const Pattern& pattern, const SystemSpec& system) {
  return evaluate_pattern(pattern, system).system_aoi;
}

}  // namespace agesched
