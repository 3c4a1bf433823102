#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <future>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "agesched/baselines.hpp"
#include "agesched/errors.hpp"
#include "agesched/model.hpp"
#include "agesched/synthesis.hpp"

namespace agesched {

enum class Policy { rr, spms, sams1, sams2, sams3, is, pgaw_star };

inline std::string_view policy_name(Policy p) {
  switch (p) {
    case Policy::rr: return "RR";
    case Policy::spms: return "SPMS";
    case Policy::sams1: return "SAMS-1";
    case Policy::sams2: return "SAMS-2";
    case Policy::sams3: return "SAMS-3";
    case Policy::is: return "IS";
    case Policy::pgaw_star: return "P-GAW*";
  }
  return "?";
}

inline Policy parse_policy(std::string_view name) {
  for (Policy p : {Policy::rr, Policy::spms, Policy::sams1, Policy::sams2, Policy::sams3, Policy::is, Policy::pgaw_star})
    if (policy_name(p) == name) return p;
  throw InputError("unknown policy '" + std::string(name) + "'");
}

/// One swept parameter: `field` of source `source` (zero-based) takes each of
/// `values` in turn.
struct Sweep {
  std::size_t source = 0;
  std::string field;  // weight, mean, scov or drop_prob
  std::vector<double> values;
};

inline std::vector<RawSource> apply_sweep(std::vector<RawSource> raw, const Sweep& sweep, double value) {
  if (sweep.source >= raw.size())
    throw InputError("sweep names source " + std::to_string(sweep.source + 1) + " but the system has " +
                     std::to_string(raw.size()));
  RawSource& r = raw[sweep.source];
  if (sweep.field == "weight") {
    r.weight = value;
  } else if (sweep.field == "mean") {
    r.service.mean = value;
  } else if (sweep.field == "scov") {
    if (r.service.kind != ServiceKind::gamma) throw InputError(sweep.source, "scov can only be swept for gamma service");
    r.service.scov = value;
  } else if (sweep.field == "drop_prob") {
    r.drop_prob = value;
  } else {
    throw InputError("unknown sweep field '" + sweep.field + "' (expected weight, mean, scov or drop_prob)");
  }
  return raw;
}

enum class IsSizeRule { match_sams3, fixed };

struct BenchmarkSpec {
  std::string name = "custom";
  std::vector<RawSource> base;
  std::optional<Sweep> sweep;
  std::vector<Policy> policies;
  double spms_epsilon = 2.0;
  IsSizeRule is_size_rule = IsSizeRule::match_sams3;
  std::size_t is_max_size = 75;
  double pgaw_resolution = 0.02;
  Metric pgaw_metric = Metric::aoi;

  // Random instances instead of (or in addition to) the base system.
  std::size_t random_instances = 0;
  std::size_t random_sources = 0;
  double random_max_drop = 0.9;
  std::uint64_t seed = 1;
};

struct BenchmarkRow {
  std::optional<double> sweep_value;
  std::size_t instance = 0;
  std::string policy;
  double system_aoi = 0.0;
  double system_paoi = 0.0;
  std::optional<std::size_t> pattern_size;
  double weight_scale = 1.0;
  double wall_time_s = 0.0;
  std::string error;
};

namespace presets {

inline std::vector<double> range(double lo, double hi, double step) {
  std::vector<double> v;
  for (double x = lo; x <= hi + 1e-9 * step; x += step) v.push_back(x);
  return v;
}

/// Deterministic services s = (5, 2.5, s3), w1 = 5 w2 = 25 w3, no drops.
inline BenchmarkSpec fig2() {
  BenchmarkSpec b;
  b.name = "fig2";
  b.base = {{25, ServiceDistribution::deterministic(5), 0},
            {5, ServiceDistribution::deterministic(2.5), 0},
            {1, ServiceDistribution::deterministic(1), 0}};
  b.sweep = Sweep{2, "mean", {0.5, 1, 2, 4, 8}};
  b.policies = {Policy::rr, Policy::pgaw_star, Policy::sams1, Policy::sams2, Policy::sams3, Policy::is};
  b.is_size_rule = IsSizeRule::match_sams3;
  return b;
}

/// Deterministic s = (10, 1, 1), p = (0.1, 0.5, 0.95), w = (2, 5, w3).
inline BenchmarkSpec fig3() {
  BenchmarkSpec b;
  b.name = "fig3";
  b.base = {{2, ServiceDistribution::deterministic(10), 0.1},
            {5, ServiceDistribution::deterministic(1), 0.5},
            {1, ServiceDistribution::deterministic(1), 0.95}};
  b.sweep = Sweep{2, "weight", range(1, 10, 1)};
  b.policies = {Policy::rr, Policy::pgaw_star, Policy::sams1, Policy::sams2, Policy::sams3, Policy::is};
  b.is_size_rule = IsSizeRule::fixed;
  b.is_max_size = 75;
  return b;
}

/// 20 random systems of 100 unit deterministic sources: weights uniform on
/// the simplex, drop probabilities uniform on [0, 0.9].
inline BenchmarkSpec fig4() {
  BenchmarkSpec b;
  b.name = "fig4";
  b.policies = {Policy::rr, Policy::sams1, Policy::sams2, Policy::sams3};
  b.random_instances = 20;
  b.random_sources = 100;
  b.random_max_drop = 0.9;
  return b;
}

/// Exponential s = (10, 1, 1), p = (0.1, 0.5, 0.6), w = (2, 5, w3); P-GAW*
/// uses the square-root-law probabilities.
inline BenchmarkSpec fig5() {
  BenchmarkSpec b;
  b.name = "fig5";
  b.base = {{2, ServiceDistribution::exponential(10), 0.1},
            {5, ServiceDistribution::exponential(1), 0.5},
            {1, ServiceDistribution::exponential(1), 0.6}};
  b.sweep = Sweep{2, "weight", range(1, 10, 1)};
  b.policies = {Policy::spms, Policy::pgaw_star};
  b.pgaw_metric = Metric::paoi;
  return b;
}

inline BenchmarkSpec by_name(std::string_view name) {
  if (name == "fig2") return fig2();
  if (name == "fig3") return fig3();
  if (name == "fig4") return fig4();
  if (name == "fig5") return fig5();
  throw InputError("unknown benchmark preset '" + std::string(name) + "' (expected fig2, fig3, fig4 or fig5)");
}

}  // namespace presets

/// Random system used by the fig4-style presets; instance i depends only on
/// (seed, i).
inline std::vector<RawSource> random_instance(std::uint64_t seed, std::size_t instance, std::size_t n_sources,
                                              double max_drop) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(instance), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> p(0.0, max_drop);
  std::vector<RawSource> raw(n_sources);
  double total = 0.0;
  for (auto& r : raw) {
    r.weight = e(rng);
    total += r.weight;
  }
  for (auto& r : raw) {
    r.weight /= total;
    r.service = ServiceDistribution::deterministic(1.0);
    r.drop_prob = p(rng);
  }
  return raw;
}

namespace detail {

struct WorkItem {
  std::optional<double> sweep_value;
  std::size_t instance = 0;
  std::vector<RawSource> raw;
};

inline std::vector<BenchmarkRow> run_item(const BenchmarkSpec& spec, const WorkItem& item) {
  std::vector<BenchmarkRow> rows;
  auto base_row = [&](Policy p) {
    BenchmarkRow r;
    r.sweep_value = item.sweep_value;
    r.instance = item.instance;
    r.policy = std::string(policy_name(p));
    return r;
  };

  SystemSpec system;
  try {
    system = validate_system(item.raw);
  } catch (const std::exception& e) {
    for (Policy p : spec.policies) {
      BenchmarkRow r = base_row(p);
      r.error = e.what();
      rows.push_back(std::move(r));
    }
    return rows;
  }

  std::optional<std::size_t> sams3_size;
  for (Policy p : spec.policies) {
    BenchmarkRow row = base_row(p);
    row.weight_scale = system.weight_scale();
    const auto start = std::chrono::steady_clock::now();
    try {
      auto take = [&](const Report& rep, std::optional<std::size_t> size) {
        row.system_aoi = rep.system_aoi;
        row.system_paoi = rep.system_paoi;
        row.pattern_size = size;
      };
      switch (p) {
        case Policy::rr: {
          const auto rep = evaluate_pattern(round_robin(system.size()), system);
          take(rep, rep.pattern.size());
          break;
        }
        case Policy::spms: {
          const auto r = spms(system, spec.spms_epsilon);
          take(r.report, r.pattern.size());
          break;
        }
        case Policy::sams1:
        case Policy::sams2:
        case Policy::sams3: {
          const SamsConfig cfg = p == Policy::sams1   ? SamsConfig::sams1()
                                 : p == Policy::sams2 ? SamsConfig::sams2()
                                                      : SamsConfig::sams3();
          const auto r = sams(system, cfg);
          take(r.report, r.pattern.size());
          if (p == Policy::sams3) sams3_size = r.pattern.size();
          break;
        }
        case Policy::is: {
          std::size_t limit = spec.is_max_size;
          if (spec.is_size_rule == IsSizeRule::match_sams3) {
            if (!sams3_size) sams3_size = sams(system, SamsConfig::sams3()).pattern.size();
            limit = *sams3_size;
          }
          const auto r = insertion_search(system, {std::max(limit, system.size()), false});
          take(r.report, r.pattern.size());
          break;
        }
        case Policy::pgaw_star: {
          const auto r = pgaw_star(system, spec.pgaw_metric, spec.pgaw_resolution);
          take(r.report, std::nullopt);
          break;
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Runs every (sweep point, instance) of the benchmark, up to `jobs` at a
/// time. Rows come back ordered by point, instance, then policy as listed.
inline std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec, std::size_t jobs = 1) {
  if (spec.policies.empty()) throw InputError("benchmark lists no policies");
  if (!(spec.spms_epsilon >= 0.0)) throw InputError("epsilon must be >= 0");

  std::vector<std::vector<RawSource>> systems;
  if (spec.random_instances > 0) {
    if (spec.random_sources == 0) throw InputError("random instances need at least one source");
    for (std::size_t i = 0; i < spec.random_instances; ++i)
      systems.push_back(random_instance(spec.seed, i, spec.random_sources, spec.random_max_drop));
  } else {
    if (spec.base.empty()) throw InputError("benchmark has no system");
    systems.push_back(spec.base);
  }

  std::vector<detail::WorkItem> items;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    if (spec.sweep) {
      if (spec.sweep->values.empty()) throw InputError("sweep has no values");
      for (double v : spec.sweep->values) items.push_back({v, i, apply_sweep(systems[i], *spec.sweep, v)});
    } else {
      items.push_back({std::nullopt, i, systems[i]});
    }
  }

  std::vector<std::vector<BenchmarkRow>> results(items.size());
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t first = 0; first < items.size(); first += jobs) {
    const std::size_t last = std::min(items.size(), first + jobs);
    if (last - first == 1) {
      results[first] = detail::run_item(spec, items[first]);
      continue;
    }
    std::vector<std::future<std::vector<BenchmarkRow>>> running;
    for (std::size_t i = first; i < last; ++i)
      running.push_back(std::async(std::launch::async, [&spec, &items, i] { return detail::run_item(spec, items[i]); }));
    for (std::size_t i = first; i < last; ++i) results[i] = running[i - first].get();
  }

  std::vector<BenchmarkRow> rows;
  for (auto& r : results)
    for (auto& row : r) rows.push_back(std::move(row));
  return rows;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kBenchmarkColumns =
    "sweep_value,instance,policy,system_aoi,system_paoi,pattern_size,weight_scale,wall_time_s,error";

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

/// System metrics are reported under normalized weights; weight_scale is the
/// raw weight total that converts them back.
inline void write_benchmark_csv(std::ostream& os, const BenchmarkSpec& spec, const std::vector<BenchmarkRow>& rows,
                                bool with_timing = true) {
  os << "# agesched-benchmark v1 preset=" << spec.name << " seed=" << spec.seed
     << " metrics=normalized-weights\n";
  os << kBenchmarkColumns << '\n';
  for (const auto& r : rows) {
    const bool ok = r.error.empty();
    os << (r.sweep_value ? format_number(*r.sweep_value) : "") << ',' << r.instance << ',' << r.policy << ','
       << (ok ? format_number(r.system_aoi) : "") << ',' << (ok ? format_number(r.system_paoi) : "") << ','
       << (r.pattern_size ? std::to_string(*r.pattern_size) : "") << ',' << format_number(r.weight_scale) << ','
       << (with_timing ? format_number(r.wall_time_s) : "") << ',' << csv_quote(r.error) << '\n';
  }
}

/// Splits one CSV line, honouring double-quoted fields.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  if (quoted) throw InputError("unterminated quote in CSV line");
  return out;
}

}  // namespace agesched
