// JSON experiment configuration.
//
//   {
//     "sources": [
//       {"weight": 2, "service": "exponential", "mean": 10, "drop_prob": 0.1},
//       {"weight": 5, "service": "gamma", "mean": 1, "scov": 0.5}
//     ],
//     "synthesize": {"method": "sams", "epsilons": "0:0.2:2", "iterations": 3}
//   }
//
// At most one command block (analyze, synthesize, simulate, benchmark) may be
// present, and it must match the command being run.
#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agesched/errors.hpp"
#include "agesched/model.hpp"

namespace agesched::cli {

using nlohmann::json;

struct ExperimentConfig {
  std::vector<RawSource> sources;
  std::string command;  // empty when no command block is present
  json block = json::object();
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"analyze", "synthesize", "simulate", "benchmark"};
  return names;
}

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw InputError("unknown key '" + key + "' in " + where);
}

template <class T>
std::optional<T> optional_field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("field '" + key + "' in " + where + " has the wrong type");
  }
}

inline RawSource parse_source(const json& j, std::size_t index) {
  const std::string where = "sources[" + std::to_string(index) + "]";
  reject_unknown_keys(j, {"weight", "service", "mean", "scov", "drop_prob"}, where);
  RawSource r;
  r.weight = optional_field<double>(j, "weight", where).value_or(1.0);
  const auto mean = optional_field<double>(j, "mean", where);
  if (!mean) throw InputError(index, "missing 'mean'");
  const ServiceKind kind = parse_service_kind(optional_field<std::string>(j, "service", where).value_or("deterministic"));
  const auto scov = optional_field<double>(j, "scov", where);
  if (scov && kind != ServiceKind::gamma) throw InputError(index, "'scov' is only meaningful for gamma service");
  r.service = {kind, *mean, kind == ServiceKind::gamma ? scov.value_or(1.0) : kind == ServiceKind::exponential ? 1.0 : 0.0};
  r.drop_prob = optional_field<double>(j, "drop_prob", where).value_or(0.0);
  return r;
}

inline ExperimentConfig parse_config(const json& root) {
  if (!root.is_object()) throw InputError("config must be a JSON object");
  std::set<std::string> allowed{"sources"};
  for (const auto& c : command_names()) allowed.insert(c);
  reject_unknown_keys(root, allowed, "config");

  ExperimentConfig cfg;
  if (root.contains("sources")) {
    const json& s = root.at("sources");
    if (!s.is_array()) throw InputError("'sources' must be an array");
    for (std::size_t i = 0; i < s.size(); ++i) cfg.sources.push_back(parse_source(s[i], i));
  }
  for (const auto& c : command_names()) {
    if (!root.contains(c)) continue;
    if (!cfg.command.empty()) throw InputError("config holds both '" + cfg.command + "' and '" + c + "' blocks");
    cfg.command = c;
    cfg.block = root.at(c);
    if (!cfg.block.is_object()) throw InputError("'" + c + "' block must be an object");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  json root;
  try {
    root = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(root);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace agesched::cli
