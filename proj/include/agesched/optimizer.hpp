#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "agesched/errors.hpp"
#include "agesched/model.hpp"

namespace agesched {

enum class FrequencyOrigin { paoi_closed_form, aoi_fixed_point };

/// Target utilizations and the transmission frequencies they imply.
struct FrequencyPlan {
  std::vector<double> utilization;  // tau_n, sums to one
  std::vector<double> frequency;    // f_n, sums to one
  FrequencyOrigin origin = FrequencyOrigin::paoi_closed_form;

  /// Target inter-transmission period s_n / tau_n.
  std::vector<double> periods(const SystemSpec& system) const {
    std::vector<double> out(system.size());
    for (std::size_t n = 0; n < system.size(); ++n) out[n] = system[n].mean / utilization[n];
    return out;
  }
};

/// f_n = (tau_n / s_n) / sum_m (tau_m / s_m).
inline std::vector<double> frequencies_from_utilization(std::span<const double> tau, const SystemSpec& system) {
  std::vector<double> f(tau.size());
  double total = 0.0;
  for (std::size_t n = 0; n < tau.size(); ++n) {
    f[n] = tau[n] / system[n].mean;
    total += f[n];
  }
  for (double& v : f) v /= total;
  return f;
}

// ---------------------------------------------------------------------------
// Peak AoI: square-root law
// ---------------------------------------------------------------------------

inline FrequencyPlan paoi_frequencies(const SystemSpec& system) {
  const std::size_t N = system.size();
  FrequencyPlan plan;
  plan.origin = FrequencyOrigin::paoi_closed_form;
  plan.utilization.resize(N);
  plan.frequency.resize(N);
  double tau_total = 0.0, f_total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const SourceSpec& src = system[n];
    plan.utilization[n] = std::sqrt(src.weight * src.mean / src.success_prob);
    plan.frequency[n] = std::sqrt(src.weight / (src.mean * src.success_prob));
    tau_total += plan.utilization[n];
    f_total += plan.frequency[n];
  }
  for (double& t : plan.utilization) t /= tau_total;
  for (double& f : plan.frequency) f /= f_total;
  return plan;
}

/// System PAoI as a function of the utilizations.
inline double paoi_objective(const SystemSpec& system, std::span<const double> tau) {
  if (tau.size() != system.size()) throw InputError("utilization vector has wrong length");
  double value = 0.0;
  for (std::size_t n = 0; n < system.size(); ++n) {
    if (!(tau[n] > 0.0)) throw InputError(n, "utilization must be > 0");
    const SourceSpec& src = system[n];
    value += src.weight * src.mean / (src.success_prob * tau[n]) + src.weight * src.mean;
  }
  return value;
}

// ---------------------------------------------------------------------------
// AoI: fixed point of the KKT conditions
// ---------------------------------------------------------------------------

/// Coefficients of  min sum_n a_n tau_n + b_n / tau_n  s.t. sum tau_n = 1.
struct AoiProgramCoefficients {
  std::vector<double> a;
  std::vector<double> b;
  double a_min = 0.0;

  static AoiProgramCoefficients from(std::vector<double> a, std::vector<double> b) {
    AoiProgramCoefficients c{std::move(a), std::move(b), 0.0};
    c.a_min = *std::min_element(c.a.begin(), c.a.end());
    return c;
  }
};

inline AoiProgramCoefficients aoi_coefficients(const SystemSpec& system, std::span<const double> c_tilde) {
  if (c_tilde.size() != system.size()) throw InputError("gap scov vector has wrong length");
  std::vector<double> a(system.size()), b(system.size());
  for (std::size_t n = 0; n < system.size(); ++n) {
    if (!(c_tilde[n] >= 0.0)) throw InputError(n, "gap scov must be >= 0");
    const SourceSpec& src = system[n];
    a[n] = src.weight * src.mean * src.success_prob * (src.scov + c_tilde[n]);
    b[n] = src.weight * src.mean * (1.0 + c_tilde[n]) / src.success_prob;
  }
  return AoiProgramCoefficients::from(std::move(a), std::move(b));
}

/// f(x) = sum_n sqrt(b_n / (a_n - x)) - 1, increasing on x < min a_n.
inline double fixed_point_function(const AoiProgramCoefficients& c, double x) {
  double total = 0.0;
  for (std::size_t n = 0; n < c.a.size(); ++n) total += std::sqrt(c.b[n] / (c.a[n] - x));
  return total - 1.0;
}

struct AoiSolution {
  double x = 0.0;
  std::vector<double> utilization;
  double residual = 0.0;
  int iterations = 0;
};

/// Root of the fixed-point equation by bisection. The unknown is searched as
/// t = a_min - x > 0, which keeps full relative precision when the root sits
/// just below a_min.
inline AoiSolution solve_aoi_fixed_point(const AoiProgramCoefficients& c) {
  const std::size_t N = c.a.size();
  if (N == 0 || c.b.size() != N) throw InputError("coefficient vectors are empty or mismatched");
  for (std::size_t n = 0; n < N; ++n) {
    if (!(c.b[n] > 0.0)) throw InputError(n, "coefficient b must be > 0");
    if (!(c.a[n] >= c.a_min)) throw InputError("a_min is not the minimum of a");
  }

  std::vector<double> shift(N);
  for (std::size_t n = 0; n < N; ++n) shift[n] = c.a[n] - c.a_min;
  auto g = [&](double t) {
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) total += std::sqrt(c.b[n] / (shift[n] + t));
    return total - 1.0;
  };

  const double b_max = *std::max_element(c.b.begin(), c.b.end());
  double hi = std::max(1.0, static_cast<double>(N) * static_cast<double>(N) * b_max);
  int doublings = 0;
  while (!(g(hi) < 0.0)) {
    if (++doublings > 200) throw InternalError("fixed-point bracket expansion failed");
    hi *= 2.0;
  }
  double lo = 1e-12 * std::max(1.0, std::abs(c.a_min));
  while (!(g(lo) > 0.0)) {
    lo *= 0.5;
    if (lo < std::numeric_limits<double>::denorm_min() * 4) throw InternalError("fixed-point lower bracket failed");
  }

  AoiSolution sol;
  for (int it = 0; it < 2000; ++it) {
    const double mid = hi > 4.0 * lo ? std::sqrt(lo) * std::sqrt(hi) : 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++sol.iterations;
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  const double t = std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;

  sol.x = c.a_min - t;
  sol.utilization.resize(N);
  for (std::size_t n = 0; n < N; ++n) sol.utilization[n] = std::sqrt(c.b[n] / (shift[n] + t));
  sol.residual = g(t);
  return sol;
}

/// AoI-optimal frequencies for fixed gap scovs.
inline FrequencyPlan aoi_frequencies(const SystemSpec& system, std::span<const double> c_tilde) {
  const AoiSolution sol = solve_aoi_fixed_point(aoi_coefficients(system, c_tilde));
  FrequencyPlan plan;
  plan.origin = FrequencyOrigin::aoi_fixed_point;
  plan.utilization = sol.utilization;
  plan.frequency = frequencies_from_utilization(plan.utilization, system);
  return plan;
}

}  // namespace agesched
