// Command-line front end. `run` is the whole program minus process plumbing
// so tests can drive it with string streams.
#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agesched/agesched.hpp"
#include "config.hpp"

namespace agesched::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

inline std::string fmt(double v, int digits = 10) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// "0:0.2:2" (inclusive range) or "0,0.5,1".
inline std::vector<double> parse_number_list(const std::string& text) {
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError("malformed number '" + s + "' in list '" + text + "'");
    }
  };
  std::vector<std::string> parts;
  const char sep = text.find(':') != std::string::npos ? ':' : ',';
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, sep);) parts.push_back(p);
  if (sep == ':') {
    if (parts.size() != 3) throw InputError("range '" + text + "' must look like start:step:stop");
    const double lo = number(parts[0]), step = number(parts[1]), hi = number(parts[2]);
    if (!(step > 0) || hi < lo) throw InputError("range '" + text + "' must have step > 0 and stop >= start");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(number(p));
  if (out.empty()) throw InputError("empty number list");
  return out;
}

// Options shared by every command that needs a system.
struct SystemOptions {
  std::string config_path;
  std::vector<double> weights, means, scovs, drops;
  std::vector<std::string> services;
};

inline void add_system_options(CLI::App& cmd, SystemOptions& o) {
  cmd.add_option("-c,--config", o.config_path, "JSON experiment config");
  cmd.add_option("--weights", o.weights, "source weights, comma separated")->delimiter(',');
  cmd.add_option("--means", o.means, "mean service times")->delimiter(',');
  cmd.add_option("--services", o.services, "service laws: deterministic, exponential or gamma")->delimiter(',');
  cmd.add_option("--scovs", o.scovs, "service scovs (gamma sources)")->delimiter(',');
  cmd.add_option("--drops", o.drops, "drop probabilities")->delimiter(',');
}

inline std::vector<RawSource> inline_sources(const SystemOptions& o) {
  std::size_t n = 0;
  for (std::size_t len : {o.weights.size(), o.means.size(), o.scovs.size(), o.drops.size(), o.services.size()})
    n = std::max(n, len);
  if (n == 0) return {};
  auto check = [&](std::size_t len, const char* name) {
    if (len != 0 && len != n)
      throw InputError(std::string("--") + name + " lists " + std::to_string(len) + " values, expected " +
                       std::to_string(n));
  };
  check(o.weights.size(), "weights");
  check(o.means.size(), "means");
  check(o.scovs.size(), "scovs");
  check(o.drops.size(), "drops");
  check(o.services.size(), "services");
  std::vector<RawSource> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ServiceKind kind = o.services.empty() ? ServiceKind::deterministic : parse_service_kind(o.services[i]);
    const double mean = o.means.empty() ? 1.0 : o.means[i];
    double scov = kind == ServiceKind::exponential ? 1.0 : 0.0;
    if (!o.scovs.empty()) {
      if (kind != ServiceKind::gamma && o.scovs[i] != scov)
        throw InputError(i, "scov can only be chosen for gamma service");
      scov = o.scovs[i];
    } else if (kind == ServiceKind::gamma) {
      scov = 1.0;
    }
    raw[i] = {o.weights.empty() ? 1.0 : o.weights[i], {kind, mean, scov}, o.drops.empty() ? 0.0 : o.drops[i]};
  }
  return raw;
}

/// Loads the config (if any), checks its command block and merges inline
/// system flags. `need_system` makes a missing system an error.
inline ExperimentConfig resolve_config(const SystemOptions& o, const std::string& command, bool need_system) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (!cfg.command.empty() && cfg.command != command)
    throw InputError("config holds a '" + cfg.command + "' block but the command is '" + command + "'");
  const auto inline_raw = inline_sources(o);
  if (!inline_raw.empty()) {
    if (!cfg.sources.empty()) throw InputError("sources given both in the config and on the command line");
    cfg.sources = inline_raw;
  }
  if (need_system && cfg.sources.empty())
    throw InputError("no system given: use --config with a 'sources' list or --means/--weights");
  return cfg;
}

inline Pattern pattern_from(const std::optional<std::string>& inline_text, const std::optional<std::string>& file) {
  if (inline_text && file) throw InputError("give either a pattern or a pattern file, not both");
  if (inline_text) return Pattern::parse(*inline_text);
  if (file) return Pattern::parse(read_text_file(*file));
  throw InputError("no pattern given");
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
}

inline json report_json(const SystemSpec& system, const Report& rep) {
  json sources = json::array();
  for (std::size_t n = 0; n < system.size(); ++n) {
    const auto& m = rep.sources[n];
    sources.push_back({{"source", n + 1},
                       {"weight", system[n].weight},
                       {"s_tilde", m.s_tilde},
                       {"q_tilde", m.q_tilde},
                       {"c_tilde", m.c_tilde},
                       {"aoi", m.aoi},
                       {"paoi", m.paoi}});
  }
  return {{"sources", sources},
          {"system_aoi", rep.system_aoi},
          {"system_paoi", rep.system_paoi},
          {"weight_scale", system.weight_scale()}};
}

inline void print_report(std::ostream& out, const SystemSpec& system, const Report& rep) {
  out << "source  weight        s_tilde       q_tilde       aoi           paoi\n";
  for (std::size_t n = 0; n < system.size(); ++n) {
    const auto& m = rep.sources[n];
    char line[160];
    std::snprintf(line, sizeof line, "%-6zu  %-12.6g  %-12.6g  %-12.6g  %-12.6g  %.6g\n", n + 1, system[n].weight,
                  m.s_tilde, m.q_tilde, m.aoi, m.paoi);
    out << line;
  }
  out << "system AoI   " << fmt(rep.system_aoi) << '\n';
  out << "system PAoI  " << fmt(rep.system_paoi) << '\n';
  if (system.weight_scale() != 1.0)
    out << "(weights normalized; multiply system values by " << fmt(system.weight_scale()) << " for raw weights)\n";
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  SystemOptions sys;
  std::optional<std::string> pattern, pattern_file, json_out;
};

inline int cmd_analyze(const AnalyzeOptions& o, std::ostream& out) {
  const auto cfg = resolve_config(o.sys, "analyze", true);
  reject_unknown_keys(cfg.block, {"pattern", "pattern_file", "json"}, "'analyze' block");
  auto text = o.pattern, file = o.pattern_file;
  if (!text && !file) {
    text = optional_field<std::string>(cfg.block, "pattern", "'analyze' block");
    file = optional_field<std::string>(cfg.block, "pattern_file", "'analyze' block");
  }
  const auto system = validate_system(cfg.sources);
  const Pattern pattern = pattern_from(text, file);
  const auto rep = evaluate_pattern(pattern, system);

  const auto json_out = o.json_out ? o.json_out : optional_field<std::string>(cfg.block, "json", "'analyze' block");
  json record = report_json(system, rep);
  record["command"] = "analyze";
  record["pattern"] = pattern.to_string();
  if (json_out && *json_out == "-") {
    out << record.dump(2) << '\n';
    return kExitOk;
  }
  out << "pattern " << pattern.to_string() << " (K = " << pattern.size() << ")\n";
  print_report(out, system, rep);
  if (json_out) write_output(*json_out, record.dump(2) + "\n", out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

struct SynthesizeOptions {
  SystemOptions sys;
  std::optional<std::string> method, epsilons, tie_break, pattern_out, json_out;
  std::optional<double> epsilon;
  std::optional<std::size_t> iterations, max_size;
  std::optional<std::uint64_t> tie_seed;
  bool stop_early = false;
};

inline int cmd_synthesize(const SynthesizeOptions& o, std::ostream& out) {
  const auto cfg = resolve_config(o.sys, "synthesize", true);
  const std::string where = "'synthesize' block";
  reject_unknown_keys(cfg.block,
                      {"method", "epsilon", "epsilons", "iterations", "max_size", "stop_early", "tie_break", "tie_seed",
                       "pattern_out", "json"},
                      where);
  const auto& b = cfg.block;
  const std::string method = o.method ? *o.method : optional_field<std::string>(b, "method", where).value_or("sams");

  SpreadOptions spread;
  const std::string tie = o.tie_break ? *o.tie_break : optional_field<std::string>(b, "tie_break", where).value_or("deterministic");
  if (tie == "random") spread.tie_break = TieBreak::random;
  else if (tie != "deterministic") throw InputError("tie break must be 'deterministic' or 'random'");
  spread.seed = o.tie_seed ? *o.tie_seed : optional_field<std::uint64_t>(b, "tie_seed", where).value_or(0);

  const auto system = validate_system(cfg.sources);
  json record{{"command", "synthesize"}, {"method", method}};
  Pattern pattern;
  Report report;
  std::optional<std::vector<double>> target;

  if (method == "spms") {
    const double eps = o.epsilon ? *o.epsilon : optional_field<double>(b, "epsilon", where).value_or(2.0);
    const auto r = spms(system, eps, spread);
    pattern = r.pattern;
    report = r.report;
    target = r.plan.frequency;
    record["epsilon"] = eps;
  } else if (method == "sams") {
    SamsConfig sc = SamsConfig::sams3();
    if (o.epsilons) {
      sc.epsilons = parse_number_list(*o.epsilons);
    } else if (b.contains("epsilons")) {
      sc.epsilons = b.at("epsilons").is_string() ? parse_number_list(b.at("epsilons").get<std::string>())
                                                 : *optional_field<std::vector<double>>(b, "epsilons", where);
    }
    sc.iterations = o.iterations ? *o.iterations : optional_field<std::size_t>(b, "iterations", where).value_or(3);
    const auto r = sams(system, sc, spread);
    pattern = r.pattern;
    report = r.report;
    target = r.plan.frequency;
    record["epsilons"] = sc.epsilons;
    record["iterations"] = sc.iterations;
    record["best_iteration"] = r.best_iteration;
    record["best_epsilon"] = r.best_epsilon;
    json trace = json::array();
    for (const auto& c : r.trace)
      trace.push_back({{"iteration", c.iteration},
                       {"epsilon", c.epsilon},
                       {"size", c.size},
                       {"system_aoi", c.system_aoi},
                       {"system_paoi", c.system_paoi},
                       {"chosen", c.chosen_in_round}});
    record["trace"] = trace;
  } else if (method == "rr") {
    pattern = round_robin(system.size());
    report = evaluate_pattern(pattern, system);
  } else if (method == "is") {
    IsConfig ic;
    ic.max_size = o.max_size ? *o.max_size : optional_field<std::size_t>(b, "max_size", where).value_or(20);
    ic.stop_early = o.stop_early || optional_field<bool>(b, "stop_early", where).value_or(false);
    const auto r = insertion_search(system, ic);
    pattern = r.pattern;
    report = r.report;
    record["max_size"] = ic.max_size;
    record["insertion_evaluations"] = r.insertion_evaluations;
  } else {
    throw InputError("unknown method '" + method + "' (expected spms, sams, rr or is)");
  }

  const auto counts = pattern.counts(system.size());
  std::vector<double> realized(system.size());
  for (std::size_t n = 0; n < system.size(); ++n)
    realized[n] = static_cast<double>(counts[n]) / static_cast<double>(pattern.size());

  record["pattern"] = pattern.to_string();
  record["size"] = pattern.size();
  record["realized_frequency"] = realized;
  if (target) record["target_frequency"] = *target;
  record["report"] = report_json(system, report);

  const auto pattern_out =
      o.pattern_out ? o.pattern_out : optional_field<std::string>(b, "pattern_out", where);
  if (pattern_out) write_output(*pattern_out, pattern.to_string() + "\n", out);
  const auto json_out = o.json_out ? o.json_out : optional_field<std::string>(b, "json", where);
  if (json_out && *json_out == "-") {
    out << record.dump(2) << '\n';
    return kExitOk;
  }

  out << "pattern " << pattern.to_string() << '\n';
  out << "K = " << pattern.size() << '\n';
  out << "source  realized      target\n";
  for (std::size_t n = 0; n < system.size(); ++n) {
    char line[96];
    std::snprintf(line, sizeof line, "%-6zu  %-12.6g  %s\n", n + 1, realized[n],
                  target ? fmt((*target)[n], 6).c_str() : "-");
    out << line;
  }
  print_report(out, system, report);
  if (json_out) write_output(*json_out, record.dump(2) + "\n", out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  SystemOptions sys;
  std::optional<std::string> pattern, pattern_file, samples_csv, json_out;
  std::vector<double> probabilities;
  std::optional<std::uint64_t> seed, target, warmup;
  std::optional<std::size_t> batches, replications, samples;
};

inline json estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"std_error", e.std_error}}; }

inline json z_json(double z) {
  if (std::isfinite(z)) return z;
  return z > 0 ? "inf" : "-inf";
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const auto cfg = resolve_config(o.sys, "simulate", true);
  const std::string where = "'simulate' block";
  reject_unknown_keys(cfg.block,
                      {"pattern", "pattern_file", "probabilities", "seed", "target", "warmup", "batches",
                       "replications", "samples", "samples_csv", "json"},
                      where);
  const auto& b = cfg.block;
  const auto system = validate_system(cfg.sources);

  SimConfig sc;
  sc.seed = o.seed ? *o.seed : optional_field<std::uint64_t>(b, "seed", where).value_or(sc.seed);
  sc.target = o.target ? *o.target : optional_field<std::uint64_t>(b, "target", where).value_or(sc.target);
  sc.warmup = o.warmup ? *o.warmup : optional_field<std::uint64_t>(b, "warmup", where).value_or(sc.warmup);
  sc.batches = o.batches ? *o.batches : optional_field<std::size_t>(b, "batches", where).value_or(sc.batches);
  const auto samples_csv = o.samples_csv ? o.samples_csv : optional_field<std::string>(b, "samples_csv", where);
  sc.record_samples = o.samples ? *o.samples : optional_field<std::size_t>(b, "samples", where).value_or(samples_csv ? 10000 : 0);
  const std::size_t replications =
      o.replications ? *o.replications : optional_field<std::size_t>(b, "replications", where).value_or(1);
  if (replications < 1) throw InputError("replications must be >= 1");
  sc.validate();

  std::vector<double> probs = o.probabilities;
  auto text = o.pattern, file = o.pattern_file;
  if (probs.empty() && !text && !file) {
    probs = optional_field<std::vector<double>>(b, "probabilities", where).value_or(std::vector<double>{});
    text = optional_field<std::string>(b, "pattern", where);
    file = optional_field<std::string>(b, "pattern_file", where);
  }
  if (!probs.empty() && (text || file)) throw InputError("give either a pattern or probabilities, not both");

  json record{{"command", "simulate"}, {"seed", sc.seed}, {"target", sc.target}, {"warmup", sc.warmup},
              {"batches", sc.batches}, {"replications", replications}};
  SimEstimates est;
  Report analytic;
  if (!probs.empty()) {
    const auto r = TransmissionProbabilities::validated(probs);
    if (r.r.size() != system.size()) throw InputError("probability vector has wrong length");
    analytic = evaluate_probabilistic(system, r.r);
    std::vector<SimEstimates> reps;
    for (std::size_t i = 0; i < replications; ++i) {
      SimConfig c = sc;
      c.seed = sc.seed + i;
      reps.push_back(simulate_probabilistic(system, r.r, c));
    }
    est = replications == 1 ? reps.front() : pool_estimates(reps, system);
    record["scheduler"] = {{"probabilities", r.r}};
  } else {
    const Pattern pattern = pattern_from(text, file);
    analytic = evaluate_pattern(pattern, system);
    est = replications == 1 ? simulate_cyclic(system, pattern, sc)
                            : simulate_cyclic_replicated(system, pattern, sc, replications);
    record["scheduler"] = {{"pattern", pattern.to_string()}};
  }
  if (samples_csv) {
    std::ostringstream csv;
    write_peak_samples_csv(csv, est);
    write_output(*samples_csv, csv.str(), out);
  }

  const Agreement agree = agreement(est, analytic);
  json sources = json::array();
  for (std::size_t n = 0; n < system.size(); ++n) {
    const auto& s = est.sources[n];
    sources.push_back({{"source", n + 1},
                       {"aoi", estimate_json(s.aoi)},
                       {"paoi", estimate_json(s.paoi)},
                       {"analytic_aoi", analytic.sources[n].aoi},
                       {"analytic_paoi", analytic.sources[n].paoi},
                       {"aoi_z", z_json(agree.aoi_z[n])},
                       {"paoi_z", z_json(agree.paoi_z[n])},
                       {"attempts", s.attempts},
                       {"successes", s.successes},
                       {"measured_cycles", s.measured_cycles}});
  }
  record["sources"] = sources;
  record["system_aoi"] = estimate_json(est.system_aoi);
  record["system_paoi"] = estimate_json(est.system_paoi);
  record["analytic_system_aoi"] = analytic.system_aoi;
  record["analytic_system_paoi"] = analytic.system_paoi;
  record["flagged"] = agree.flagged;
  record["slots"] = est.slots;

  const auto json_out = o.json_out ? o.json_out : optional_field<std::string>(b, "json", where);
  if (json_out && *json_out == "-") {
    out << record.dump(2) << '\n';
    return kExitOk;
  }
  out << "source  aoi (se)                      analytic      z       paoi (se)                     analytic      z\n";
  for (std::size_t n = 0; n < system.size(); ++n) {
    const auto& s = est.sources[n];
    char line[200];
    std::snprintf(line, sizeof line, "%-6zu  %-12.6g (%-12.3g)  %-12.6g  %-6.2f  %-12.6g (%-12.3g)  %-12.6g  %.2f\n",
                  n + 1, s.aoi.mean, s.aoi.std_error, analytic.sources[n].aoi, agree.aoi_z[n], s.paoi.mean,
                  s.paoi.std_error, analytic.sources[n].paoi, agree.paoi_z[n]);
    out << line;
  }
  out << "system AoI   " << fmt(est.system_aoi.mean) << " (se " << fmt(est.system_aoi.std_error, 3) << "), analytic "
      << fmt(analytic.system_aoi) << '\n';
  out << "system PAoI  " << fmt(est.system_paoi.mean) << " (se " << fmt(est.system_paoi.std_error, 3)
      << "), analytic " << fmt(analytic.system_paoi) << '\n';
  out << "comparisons with |z| > " << fmt(agree.threshold) << ": " << agree.flagged << " of " << agree.comparisons()
      << '\n';
  if (json_out) write_output(*json_out, record.dump(2) + "\n", out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkOptions {
  SystemOptions sys;
  std::optional<std::string> preset, policies, output, sweep_field, sweep_values;
  std::optional<std::size_t> sweep_source, is_max_size, instances, jobs;
  std::optional<double> epsilon, resolution;
  std::optional<std::uint64_t> seed;
  bool omit_timing = false;
  bool with_is = false;
};

inline std::vector<Policy> parse_policies(const std::string& text) {
  std::vector<Policy> out;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_policy(p));
  if (out.empty()) throw InputError("empty policy list");
  return out;
}

inline int cmd_benchmark(const BenchmarkOptions& o, std::ostream& out) {
  const auto cfg = resolve_config(o.sys, "benchmark", false);
  const std::string where = "'benchmark' block";
  reject_unknown_keys(cfg.block,
                      {"preset", "policies", "sweep", "epsilon", "is_max_size", "resolution", "seed", "instances",
                       "jobs", "output", "omit_timing", "with_is", "pgaw_metric"},
                      where);
  const auto& b = cfg.block;

  const auto preset = o.preset ? o.preset : optional_field<std::string>(b, "preset", where);
  BenchmarkSpec spec;
  if (preset) {
    if (!cfg.sources.empty()) throw InputError("a preset defines its own system; drop the sources");
    spec = presets::by_name(*preset);
  } else {
    if (cfg.sources.empty()) throw InputError("a custom benchmark needs a system (sources) and a sweep");
    spec.base = cfg.sources;
    spec.policies = {Policy::rr, Policy::spms, Policy::sams1, Policy::sams2, Policy::sams3, Policy::pgaw_star};
  }

  if (o.policies) spec.policies = parse_policies(*o.policies);
  else if (b.contains("policies")) {
    spec.policies.clear();
    const auto names = optional_field<std::vector<std::string>>(b, "policies", where).value();
    for (const auto& p : names) spec.policies.push_back(parse_policy(p));
  }
  if (o.with_is || optional_field<bool>(b, "with_is", where).value_or(false)) {
    if (std::find(spec.policies.begin(), spec.policies.end(), Policy::is) == spec.policies.end())
      spec.policies.push_back(Policy::is);
  }

  // Sweep: command line overrides the config block, which overrides the preset.
  if (b.contains("sweep")) {
    const json& s = b.at("sweep");
    reject_unknown_keys(s, {"source", "field", "values"}, "'sweep'");
    Sweep sw;
    const auto src = optional_field<std::size_t>(s, "source", "'sweep'");
    if (!src || *src == 0) throw InputError("'sweep' needs a one-based 'source'");
    sw.source = *src - 1;
    sw.field = optional_field<std::string>(s, "field", "'sweep'").value_or("");
    if (s.contains("values") && s.at("values").is_string()) sw.values = parse_number_list(s.at("values").get<std::string>());
    else sw.values = optional_field<std::vector<double>>(s, "values", "'sweep'").value_or(std::vector<double>{});
    spec.sweep = sw;
  }
  if (o.sweep_source || o.sweep_field || o.sweep_values) {
    Sweep sw = spec.sweep.value_or(Sweep{});
    if (o.sweep_source) {
      if (*o.sweep_source == 0) throw InputError("--sweep-source is one-based");
      sw.source = *o.sweep_source - 1;
    }
    if (o.sweep_field) sw.field = *o.sweep_field;
    if (o.sweep_values) sw.values = parse_number_list(*o.sweep_values);
    spec.sweep = sw;
  }
  if (spec.sweep) {
    if (spec.sweep->values.empty()) throw InputError("sweep has no values");
    // validates the field name and source index up front
    if (!spec.base.empty()) apply_sweep(spec.base, *spec.sweep, spec.sweep->values.front());
  }

  if (auto e = o.epsilon ? o.epsilon : optional_field<double>(b, "epsilon", where)) spec.spms_epsilon = *e;
  if (auto r = o.resolution ? o.resolution : optional_field<double>(b, "resolution", where)) spec.pgaw_resolution = *r;
  if (auto m = optional_field<std::string>(b, "pgaw_metric", where)) {
    if (*m == "aoi") spec.pgaw_metric = Metric::aoi;
    else if (*m == "paoi") spec.pgaw_metric = Metric::paoi;
    else throw InputError("pgaw_metric must be 'aoi' or 'paoi'");
  }
  if (auto i = o.is_max_size ? o.is_max_size : optional_field<std::size_t>(b, "is_max_size", where)) {
    spec.is_size_rule = IsSizeRule::fixed;
    spec.is_max_size = *i;
  }
  if (auto s = o.seed ? o.seed : optional_field<std::uint64_t>(b, "seed", where)) spec.seed = *s;
  if (auto n = o.instances ? o.instances : optional_field<std::size_t>(b, "instances", where)) {
    if (spec.random_instances == 0) throw InputError("instances only apply to random-instance presets (fig4)");
    spec.random_instances = *n;
  }
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t jobs = o.jobs ? *o.jobs : optional_field<std::size_t>(b, "jobs", where).value_or(hw);
  const bool omit_timing = o.omit_timing || optional_field<bool>(b, "omit_timing", where).value_or(false);

  const auto rows = run_benchmark(spec, jobs);
  std::ostringstream csv;
  write_benchmark_csv(csv, spec, rows, !omit_timing);
  const auto output = o.output ? o.output : optional_field<std::string>(b, "output", where);
  write_output(output.value_or("-"), csv.str(), out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// plotdata
// ---------------------------------------------------------------------------

struct PlotdataOptions {
  std::string input;
  std::string metric = "aoi";
  std::optional<std::string> output;
};

/// Benchmark CSV to tidy (x, series, y) rows, one per input row. x is the
/// sweep value, or the instance index for random-instance benchmarks; failed
/// rows keep an empty y.
inline std::string plotdata(const std::string& csv_text, const std::string& metric) {
  if (metric != "aoi" && metric != "paoi") throw InputError("metric must be 'aoi' or 'paoi'");
  std::istringstream in(csv_text);
  std::string line;
  std::vector<std::string> header;
  std::ostringstream out;
  std::size_t rows = 0;
  std::string comment;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (comment.empty()) comment = line;
      continue;
    }
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = fields;
      if (line != kBenchmarkColumns)
        throw InputError("not a benchmark CSV: expected header '" + std::string(kBenchmarkColumns) + "'");
      out << "# tidy " << (metric == "aoi" ? "system_aoi" : "system_paoi") << " from "
          << (comment.empty() ? std::string("benchmark") : comment.substr(2)) << '\n';
      out << "x,series,y\n";
      continue;
    }
    if (fields.size() != header.size())
      throw InputError("benchmark CSV row " + std::to_string(rows + 1) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(header.size()));
    const std::string& x = fields[0].empty() ? fields[1] : fields[0];
    out << x << ',' << csv_quote(fields[2]) << ',' << (metric == "aoi" ? fields[3] : fields[4]) << '\n';
    ++rows;
  }
  if (header.empty()) throw InputError("benchmark CSV is empty");
  return out.str();
}

inline int cmd_plotdata(const PlotdataOptions& o, std::ostream& out) {
  const std::string text = o.input == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {}) : read_text_file(o.input);
  write_output(o.output.value_or("-"), plotdata(text, o.metric), out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cyclic AoI / peak-AoI schedule analysis, synthesis and simulation", "agesched"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  AnalyzeOptions ao;
  auto* analyze = app.add_subcommand("analyze", "evaluate a pattern analytically");
  add_system_options(*analyze, ao.sys);
  analyze->add_option("-p,--pattern", ao.pattern, "pattern, e.g. 1,2,1,3");
  analyze->add_option("--pattern-file", ao.pattern_file, "file holding a pattern line");
  analyze->add_option("--json", ao.json_out, "write the machine record here ('-' for stdout only)");

  SynthesizeOptions so;
  auto* synth = app.add_subcommand("synthesize", "build a pattern with spms, sams, rr or is");
  add_system_options(*synth, so.sys);
  synth->add_option("-m,--method", so.method, "spms, sams, rr or is (default sams)");
  synth->add_option("--epsilon", so.epsilon, "spms epsilon (default 2)");
  synth->add_option("--epsilons", so.epsilons, "sams epsilon set, start:step:stop or a comma list (default 0:0.2:2)");
  synth->add_option("--iters", so.iterations, "sams fixed-point iterations L (default 3)");
  synth->add_option("--max-size", so.max_size, "insertion search size limit I (default 20)");
  synth->add_flag("--stop-early", so.stop_early, "insertion search stops at the first round without gain");
  synth->add_option("--tie-break", so.tie_break, "deterministic or random");
  synth->add_option("--tie-seed", so.tie_seed, "seed for random tie breaks");
  synth->add_option("-o,--pattern-out", so.pattern_out, "write the pattern line here");
  synth->add_option("--json", so.json_out, "write the machine record here ('-' for stdout only)");

  SimulateOptions mo;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimates with z-scores against the analysis");
  add_system_options(*sim, mo.sys);
  sim->add_option("-p,--pattern", mo.pattern, "cyclic pattern");
  sim->add_option("--pattern-file", mo.pattern_file, "file holding a pattern line");
  sim->add_option("--probabilities", mo.probabilities, "per-slot selection probabilities")->delimiter(',');
  sim->add_option("--seed", mo.seed, "seed (default 1)");
  sim->add_option("--target,--cycles", mo.target, "complete cycles per source, warmup included (default 1e6)");
  sim->add_option("--warmup", mo.warmup, "discarded cycles per source (default 1000)");
  sim->add_option("--batches", mo.batches, "batches for standard errors (default 30)");
  sim->add_option("--replications", mo.replications, "independent replications with seeds seed, seed+1, ...");
  sim->add_option("--samples", mo.samples, "peak samples kept per source for --samples-csv");
  sim->add_option("--samples-csv", mo.samples_csv, "dump peak-AoI samples as CSV");
  sim->add_option("--json", mo.json_out, "write the machine record here ('-' for stdout only)");

  BenchmarkOptions bo;
  auto* bench = app.add_subcommand("benchmark", "policy comparison over a preset or custom sweep, as CSV");
  add_system_options(*bench, bo.sys);
  bench->add_option("--preset", bo.preset, "fig2, fig3, fig4 or fig5");
  bench->add_option("--policies", bo.policies, "comma list of RR, SPMS, SAMS-1, SAMS-2, SAMS-3, IS, P-GAW*");
  bench->add_option("--sweep-source", bo.sweep_source, "one-based source whose field is swept");
  bench->add_option("--sweep-field", bo.sweep_field, "weight, mean, scov or drop_prob");
  bench->add_option("--sweep-values", bo.sweep_values, "values, start:step:stop or a comma list");
  bench->add_option("--epsilon", bo.epsilon, "spms epsilon (default 2)");
  bench->add_option("--is-size", bo.is_max_size, "fixed insertion search limit I (fig2 default: SAMS-3 pattern size)");
  bench->add_flag("--with-is", bo.with_is, "add insertion search to the policy list");
  bench->add_option("--resolution", bo.resolution, "P-GAW* grid resolution (default 0.02)");
  bench->add_option("--seed", bo.seed, "seed for random instances");
  bench->add_option("--instances", bo.instances, "number of random instances (fig4)");
  bench->add_option("--jobs", bo.jobs, "concurrent sweep points");
  bench->add_flag("--omit-timing", bo.omit_timing, "leave wall_time_s empty so reruns are byte-identical");
  bench->add_option("-o,--output", bo.output, "CSV path (default stdout)");

  PlotdataOptions po;
  auto* plot = app.add_subcommand("plotdata", "reshape a benchmark CSV into tidy x,series,y rows");
  plot->add_option("input", po.input, "benchmark CSV ('-' for stdin)")->required();
  plot->add_option("--metric", po.metric, "aoi or paoi (default aoi)");
  plot->add_option("-o,--output", po.output, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*analyze) return cmd_analyze(ao, out);
    if (*synth) return cmd_synthesize(so, out);
    if (*sim) return cmd_simulate(mo, out);
    if (*bench) return cmd_benchmark(bo, out);
    if (*plot) return cmd_plotdata(po, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kExitInput;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInput;
}

}  // namespace agesched::cli
