#pragma once

namespace agesched {

/// Second-order Taylor expansion G(s) = g0 + g1 s + g2 s^2 + O(s^3) of a
/// moment generating function (or a scaled sum of products of them).
/// Products drop every term beyond s^2, which is exact for the value, first
/// and second derivative at zero.
struct TruncatedMgf {
  double g0 = 1.0;
  double g1 = 0.0;
  double g2 = 0.0;

  /// Expansion of a nonnegative random variable with the given moments.
  static constexpr TruncatedMgf from_moments(double mean, double second_moment) {
    return {1.0, mean, 0.5 * second_moment};
  }

  static constexpr TruncatedMgf constant(double value) { return {value, 0.0, 0.0}; }

  constexpr double value() const { return g0; }
  constexpr double first_derivative() const { return g1; }
  constexpr double second_derivative() const { return 2.0 * g2; }

  constexpr TruncatedMgf& operator+=(const TruncatedMgf& o) {
    g0 += o.g0;
    g1 += o.g1;
    g2 += o.g2;
    return *this;
  }
  constexpr TruncatedMgf& operator-=(const TruncatedMgf& o) {
    g0 -= o.g0;
    g1 -= o.g1;
    g2 -= o.g2;
    return *this;
  }
  constexpr TruncatedMgf& operator*=(double k) {
    g0 *= k;
    g1 *= k;
    g2 *= k;
    return *this;
  }
  constexpr TruncatedMgf& operator*=(const TruncatedMgf& o) {
    *this = *this * o;
    return *this;
  }

  friend constexpr TruncatedMgf operator*(const TruncatedMgf& a, const TruncatedMgf& b) {
    return {a.g0 * b.g0, a.g0 * b.g1 + a.g1 * b.g0, a.g0 * b.g2 + a.g1 * b.g1 + a.g2 * b.g0};
  }
  friend constexpr TruncatedMgf operator*(TruncatedMgf a, double k) { return a *= k; }
  friend constexpr TruncatedMgf operator*(double k, TruncatedMgf a) { return a *= k; }
  friend constexpr TruncatedMgf operator+(TruncatedMgf a, const TruncatedMgf& b) { return a += b; }
  friend constexpr TruncatedMgf operator-(TruncatedMgf a, const TruncatedMgf& b) { return a -= b; }

  friend constexpr bool operator==(const TruncatedMgf&, const TruncatedMgf&) = default;
};

}  // namespace agesched
