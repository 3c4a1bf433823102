#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "agesched/analysis.hpp"
#include "agesched/baselines.hpp"
#include "agesched/errors.hpp"
#include "agesched/model.hpp"
#include "agesched/pattern.hpp"

namespace agesched {

/// Run-length and seeding of one simulation replication.
///
/// Each source keeps simulating until it has completed `batches` batches of
/// (target - warmup) / batches cycles after discarding `warmup` cycles.
/// Sources that succeed more often keep filling further batches; all complete
/// batches are used.
struct SimConfig {
  std::uint64_t target = 1'000'000;
  std::uint64_t warmup = 1'000;
  std::uint64_t seed = 1;
  std::size_t batches = 30;
  std::size_t record_samples = 0;  // per source, kept for CSV export and checks

  void validate() const {
    if (!(target > warmup)) throw InputError("simulation target must exceed warmup");
    if (batches < 2) throw InputError("at least two batches are needed for a standard error");
    if (target - warmup < batches) throw InputError("simulation target too small for the batch count");
  }
  std::uint64_t batch_size() const { return (target - warmup) / batches; }
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// One peak-AoI observation: the age right after the previous reception
/// (that packet's service time) plus the time until the next reception.
struct PeakSample {
  double reset = 0.0;
  double elapsed = 0.0;
  double peak = 0.0;
};

struct SourceEstimates {
  Estimate aoi;
  Estimate paoi;
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t measured_cycles = 0;
  std::vector<PeakSample> samples;
};

struct SimEstimates {
  std::vector<SourceEstimates> sources;
  Estimate system_aoi;
  Estimate system_paoi;
  std::uint64_t slots = 0;
  double simulated_time = 0.0;
};

namespace detail {

// Independent stream per (seed, stream id); stream ids are source indices,
// with the slot-selection stream placed far above any source index.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

inline constexpr std::uint64_t kSelectionStream = 0xfffffffffULL;

class ServiceSampler {
public:
  explicit ServiceSampler(const ServiceDistribution& d) {
    switch (d.kind) {
      case ServiceKind::deterministic: law_ = d.mean; break;
      case ServiceKind::exponential: law_ = std::exponential_distribution<double>(1.0 / d.mean); break;
      case ServiceKind::gamma: law_ = std::gamma_distribution<double>(1.0 / d.scov, d.mean * d.scov); break;
    }
  }

  template <class Engine>
  double operator()(Engine& eng) {
    if (auto* v = std::get_if<double>(&law_)) return *v;
    if (auto* e = std::get_if<std::exponential_distribution<double>>(&law_)) return (*e)(eng);
    return std::get<std::gamma_distribution<double>>(law_)(eng);
  }

private:
  std::variant<double, std::exponential_distribution<double>, std::gamma_distribution<double>> law_;
};

struct BatchTotals {
  double area = 0.0;
  double length = 0.0;
  double peak = 0.0;
};

struct SourceTrack {
  std::mt19937_64 rng;
  ServiceSampler service;
  std::bernoulli_distribution success;
  bool received = false;
  double last_reception = 0.0;
  double last_service = 0.0;
  std::uint64_t cycles = 0;  // completed inter-reception cycles, warmup included
  BatchTotals current;
  std::uint64_t in_batch = 0;
  std::vector<BatchTotals> batches;
  SourceEstimates out;
};

inline Estimate ratio_estimate(std::span<const BatchTotals> b) {
  double area = 0.0, length = 0.0;
  for (const auto& x : b) {
    area += x.area;
    length += x.length;
  }
  const double ratio = area / length;
  const double count = static_cast<double>(b.size());
  double ss = 0.0;
  for (const auto& x : b) {
    const double e = x.area - ratio * x.length;
    ss += e * e;
  }
  const double mean_length = length / count;
  return {ratio, std::sqrt(ss / (count * (count - 1.0))) / mean_length};
}

inline Estimate mean_estimate(std::span<const BatchTotals> b, double batch_size) {
  const double count = static_cast<double>(b.size());
  double total = 0.0;
  for (const auto& x : b) total += x.peak / batch_size;
  const double mean = total / count;
  double ss = 0.0;
  for (const auto& x : b) {
    const double d = x.peak / batch_size - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / (count * (count - 1.0)))};
}

template <class NextSource>
SimEstimates run_simulation(const SystemSpec& system, const SimConfig& cfg, NextSource&& next_source) {
  cfg.validate();
  const std::size_t N = system.size();
  const std::uint64_t batch_size = cfg.batch_size();

  std::vector<SourceTrack> tracks;
  tracks.reserve(N);
  for (std::size_t n = 0; n < N; ++n)
    tracks.push_back(SourceTrack{make_stream(cfg.seed, n), ServiceSampler(system[n].service),
                                 std::bernoulli_distribution(system[n].success_prob)});

  std::size_t unfinished = N;
  double now = 0.0;
  std::uint64_t slots = 0;
  while (unfinished > 0) {
    const std::size_t m = next_source(slots);
    ++slots;
    SourceTrack& tr = tracks[m];
    const double service = tr.service(tr.rng);
    now += service;
    ++tr.out.attempts;
    if (!tr.success(tr.rng)) continue;
    ++tr.out.successes;
    if (tr.received) {
      const double elapsed = now - tr.last_reception;
      ++tr.cycles;
      if (tr.cycles > cfg.warmup) {
        const double peak = tr.last_service + elapsed;
        tr.current.area += tr.last_service * elapsed + 0.5 * elapsed * elapsed;
        tr.current.length += elapsed;
        tr.current.peak += peak;
        if (tr.out.samples.size() < cfg.record_samples) tr.out.samples.push_back({tr.last_service, elapsed, peak});
        if (++tr.in_batch == batch_size) {
          tr.batches.push_back(tr.current);
          tr.current = {};
          tr.in_batch = 0;
          if (tr.batches.size() == cfg.batches) --unfinished;
        }
      }
    }
    tr.received = true;
    tr.last_reception = now;
    tr.last_service = service;
  }

  SimEstimates est;
  est.slots = slots;
  est.simulated_time = now;
  double aoi_var = 0.0, paoi_var = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    SourceTrack& tr = tracks[n];
    tr.out.measured_cycles = tr.batches.size() * batch_size;
    tr.out.aoi = ratio_estimate(tr.batches);
    tr.out.paoi = mean_estimate(tr.batches, static_cast<double>(batch_size));
    const double w = system[n].weight;
    est.system_aoi.mean += w * tr.out.aoi.mean;
    est.system_paoi.mean += w * tr.out.paoi.mean;
    aoi_var += w * w * tr.out.aoi.std_error * tr.out.aoi.std_error;
    paoi_var += w * w * tr.out.paoi.std_error * tr.out.paoi.std_error;
    est.sources.push_back(std::move(tr.out));
  }
  // Sources are treated as independent; cross-source covariance is ignored.
  est.system_aoi.std_error = std::sqrt(aoi_var);
  est.system_paoi.std_error = std::sqrt(paoi_var);
  return est;
}

}  // namespace detail

inline SimEstimates simulate_cyclic(const SystemSpec& system, const Pattern& pattern, const SimConfig& cfg) {
  check_feasible(pattern, system.size());
  const std::size_t K = pattern.size();
  std::size_t position = 0;
  return detail::run_simulation(system, cfg, [&](std::uint64_t) {
    const std::size_t m = pattern[position];
    if (++position == K) position = 0;
    return m;
  });
}

inline SimEstimates simulate_probabilistic(const SystemSpec& system, std::span<const double> r,
                                           const SimConfig& cfg) {
  if (r.size() != system.size()) throw InputError("probability vector has wrong length");
  const auto probs = TransmissionProbabilities::validated(std::vector<double>(r.begin(), r.end()));
  std::mt19937_64 rng = detail::make_stream(cfg.seed, detail::kSelectionStream);
  std::discrete_distribution<std::size_t> pick(probs.r.begin(), probs.r.end());
  return detail::run_simulation(system, cfg, [&](std::uint64_t) { return pick(rng); });
}

/// Pools independent replications, weighting each by its measured cycles.
inline SimEstimates pool_estimates(std::span<const SimEstimates> reps, const SystemSpec& system) {
  if (reps.empty()) throw InputError("nothing to pool");
  SimEstimates out;
  const std::size_t N = system.size();
  out.sources.resize(N);
  for (const auto& r : reps) {
    out.slots += r.slots;
    out.simulated_time += r.simulated_time;
  }
  double aoi_var = 0.0, paoi_var = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    SourceEstimates& s = out.sources[n];
    double total = 0.0;
    for (const auto& r : reps) total += static_cast<double>(r.sources[n].measured_cycles);
    double av = 0.0, pv = 0.0;
    for (const auto& r : reps) {
      const SourceEstimates& x = r.sources[n];
      const double share = static_cast<double>(x.measured_cycles) / total;
      s.aoi.mean += share * x.aoi.mean;
      s.paoi.mean += share * x.paoi.mean;
      av += share * share * x.aoi.std_error * x.aoi.std_error;
      pv += share * share * x.paoi.std_error * x.paoi.std_error;
      s.attempts += x.attempts;
      s.successes += x.successes;
      s.measured_cycles += x.measured_cycles;
    }
    s.aoi.std_error = std::sqrt(av);
    s.paoi.std_error = std::sqrt(pv);
    const double w = system[n].weight;
    out.system_aoi.mean += w * s.aoi.mean;
    out.system_paoi.mean += w * s.paoi.mean;
    aoi_var += w * w * av;
    paoi_var += w * w * pv;
  }
  out.system_aoi.std_error = std::sqrt(aoi_var);
  out.system_paoi.std_error = std::sqrt(paoi_var);
  return out;
}

/// Runs replications with seeds seed, seed+1, ... concurrently and pools them.
inline SimEstimates simulate_cyclic_replicated(const SystemSpec& system, const Pattern& pattern,
                                               const SimConfig& cfg, std::size_t replications) {
  std::vector<std::future<SimEstimates>> jobs;
  for (std::size_t i = 0; i < replications; ++i) {
    SimConfig c = cfg;
    c.seed = cfg.seed + i;
    jobs.push_back(std::async(std::launch::async, [&system, &pattern, c] { return simulate_cyclic(system, pattern, c); }));
  }
  std::vector<SimEstimates> reps;
  for (auto& j : jobs) reps.push_back(j.get());
  return pool_estimates(reps, system);
}

// ---------------------------------------------------------------------------
// Analysis vs. simulation
// ---------------------------------------------------------------------------

struct Agreement {
  std::vector<double> aoi_z;
  std::vector<double> paoi_z;
  std::size_t flagged = 0;  // |z| > threshold
  double threshold = 4.0;

  std::size_t comparisons() const { return aoi_z.size() + paoi_z.size(); }
};

/// z = (estimate - analytic) / SE. A zero SE with an exact match gives z = 0.
inline double z_score(const Estimate& est, double analytic) {
  const double diff = est.mean - analytic;
  const double scale = std::max(1.0, std::abs(analytic));
  if (est.std_error <= 1e-12 * scale) {
    if (std::abs(diff) <= 1e-9 * scale) return 0.0;
    return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return diff / est.std_error;
}

inline Agreement agreement(const SimEstimates& est, const Report& report, double threshold = 4.0) {
  if (est.sources.size() != report.sources.size()) throw InputError("estimate and report cover different systems");
  Agreement a;
  a.threshold = threshold;
  for (std::size_t n = 0; n < est.sources.size(); ++n) {
    a.aoi_z.push_back(z_score(est.sources[n].aoi, report.sources[n].aoi));
    a.paoi_z.push_back(z_score(est.sources[n].paoi, report.sources[n].paoi));
    if (!(std::abs(a.aoi_z.back()) <= threshold)) ++a.flagged;
    if (!(std::abs(a.paoi_z.back()) <= threshold)) ++a.flagged;
  }
  return a;
}

/// source,sample,reset,elapsed,peak
inline void write_peak_samples_csv(std::ostream& os, const SimEstimates& est) {
  os << "source,sample,reset,elapsed,peak\n";
  const auto old = os.precision(17);
  for (std::size_t n = 0; n < est.sources.size(); ++n) {
    const auto& samples = est.sources[n].samples;
    for (std::size_t i = 0; i < samples.size(); ++i)
      os << n + 1 << ',' << i << ',' << samples[i].reset << ',' << samples[i].elapsed << ',' << samples[i].peak << '\n';
  }
  os.precision(old);
}

}  // namespace agesched
