#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agesched/errors.hpp"

namespace agesched {

enum class ServiceKind { deterministic, exponential, gamma };

inline std::string_view to_string(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::deterministic: return "deterministic";
    case ServiceKind::exponential: return "exponential";
    case ServiceKind::gamma: return "gamma";
  }
  return "unknown";
}

inline ServiceKind parse_service_kind(std::string_view name) {
  if (name == "deterministic") return ServiceKind::deterministic;
  if (name == "exponential") return ServiceKind::exponential;
  if (name == "gamma") return ServiceKind::gamma;
  throw InputError("unknown service kind '" + std::string(name) + "'");
}

/// Service-time law of one source. Only the first two moments matter to the
/// analysis; the kind is what the simulator samples from.
struct ServiceDistribution {
  ServiceKind kind = ServiceKind::deterministic;
  double mean = 1.0;
  double scov = 0.0;

  static ServiceDistribution deterministic(double mean) { return {ServiceKind::deterministic, mean, 0.0}; }
  static ServiceDistribution exponential(double mean) { return {ServiceKind::exponential, mean, 1.0}; }
  static ServiceDistribution gamma(double mean, double scov) { return {ServiceKind::gamma, mean, scov}; }

  friend bool operator==(const ServiceDistribution&, const ServiceDistribution&) = default;
};

struct ServiceMoments {
  double mean;
  double second_moment;
  double scov;
};

inline ServiceMoments service_moments(const ServiceDistribution& dist) {
  const double m = dist.mean;
  switch (dist.kind) {
    case ServiceKind::deterministic: return {m, m * m, 0.0};
    case ServiceKind::exponential: return {m, 2.0 * m * m, 1.0};
    case ServiceKind::gamma: return {m, m * m * (1.0 + dist.scov), dist.scov};
  }
  throw InternalError("unhandled service kind");
}

/// Unvalidated source entry as read from a configuration.
struct RawSource {
  double weight = 1.0;
  ServiceDistribution service;
  double drop_prob = 0.0;
};

/// A validated source with every derived moment populated.
struct SourceSpec {
  double raw_weight;
  double weight;  // normalized, sums to one across the system
  ServiceDistribution service;
  double drop_prob;
  double success_prob;
  double mean;           // s_n
  double second_moment;  // q_n
  double variance;       // v_n
  double scov;           // c_n

  RawSource raw() const { return {raw_weight, service, drop_prob}; }

  friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

struct SystemSpec {
  std::vector<SourceSpec> sources;

  std::size_t size() const noexcept { return sources.size(); }
  const SourceSpec& operator[](std::size_t n) const { return sources[n]; }

  /// Sum of the weights as supplied; multiply a normalized system metric by
  /// this to recover the value under unnormalized weights.
  double weight_scale() const {
    double total = 0.0;
    for (const auto& s : sources) total += s.raw_weight;
    return total;
  }

  std::vector<RawSource> raw() const {
    std::vector<RawSource> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(s.raw());
    return out;
  }

  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

inline SystemSpec validate_system(std::span<const RawSource> raw) {
  if (raw.empty()) throw InputError("system must contain at least one source");

  double total_weight = 0.0;
  for (std::size_t n = 0; n < raw.size(); ++n) {
    const RawSource& r = raw[n];
    if (!(r.weight > 0.0) || !std::isfinite(r.weight)) throw InputError(n, "weight must be > 0");
    if (!(r.service.mean > 0.0) || !std::isfinite(r.service.mean))
      throw InputError(n, "mean service time must be > 0");
    if (!(r.service.scov >= 0.0) || !std::isfinite(r.service.scov)) throw InputError(n, "scov must be >= 0");
    if (r.service.kind == ServiceKind::gamma && !(r.service.scov > 0.0))
      throw InputError(n, "gamma service requires scov > 0");
    if (!(r.drop_prob >= 0.0)) throw InputError(n, "drop probability must be >= 0");
    if (!(r.drop_prob < 1.0)) throw InputError(n, "drop probability must be < 1");
    total_weight += r.weight;
  }

  SystemSpec system;
  system.sources.reserve(raw.size());
  for (const RawSource& r : raw) {
    ServiceDistribution service = r.service;
    if (service.kind == ServiceKind::deterministic) service.scov = 0.0;
    if (service.kind == ServiceKind::exponential) service.scov = 1.0;
    const ServiceMoments m = service_moments(service);
    system.sources.push_back(SourceSpec{
        .raw_weight = r.weight,
        .weight = r.weight / total_weight,
        .service = service,
        .drop_prob = r.drop_prob,
        .success_prob = 1.0 - r.drop_prob,
        .mean = m.mean,
        .second_moment = m.second_moment,
        .variance = m.second_moment - m.mean * m.mean,
        .scov = m.scov,
    });
  }
  return system;
}

inline SystemSpec validate_system(const SystemSpec& system) {
  const auto raw = system.raw();
  return validate_system(raw);
}

inline SystemSpec validate_system(std::initializer_list<RawSource> raw) {
  return validate_system(std::span<const RawSource>(raw.begin(), raw.size()));
}

/// N sources with unit deterministic service, no drops and equal weight.
inline SystemSpec unit_system(std::size_t n) {
  std::vector<RawSource> raw(n, RawSource{1.0, ServiceDistribution::deterministic(1.0), 0.0});
  return validate_system(raw);
}

}  // namespace agesched
