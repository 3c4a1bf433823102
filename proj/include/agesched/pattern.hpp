#pragma once

#include <charconv>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "agesched/errors.hpp"

namespace agesched {

/// A cyclic schedule: the sequence of (zero-based) source indices that is
/// repeated forever. Text form is one line of comma-separated one-based
/// indices, e.g. "1,2,1,3".
class Pattern {
public:
  Pattern() = default;
  explicit Pattern(std::vector<std::size_t> entries) : entries_(std::move(entries)) {}

  /// Builds from one-based indices as written by people.
  static Pattern from_one_based(std::initializer_list<std::size_t> one_based) {
    std::vector<std::size_t> e;
    e.reserve(one_based.size());
    for (std::size_t v : one_based) {
      if (v == 0) throw InputError("pattern entries are one-based; got 0");
      e.push_back(v - 1);
    }
    return Pattern(std::move(e));
  }

  static Pattern parse(std::string_view text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) text.remove_suffix(1);
    if (text.empty()) throw InputError("empty pattern");
    std::vector<std::size_t> entries;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find(',', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view token = text.substr(start, end - start);
      while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
      while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
      std::size_t value = 0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (token.empty() || ec != std::errc() || ptr != token.data() + token.size() || value == 0)
        throw InputError("malformed pattern token '" + std::string(token) + "'");
      entries.push_back(value - 1);
      start = end + 1;
    }
    return Pattern(std::move(entries));
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(entries_[k] + 1);
    }
    return out;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t operator[](std::size_t k) const { return entries_[k]; }
  const std::vector<std::size_t>& entries() const noexcept { return entries_; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Appearance count of every source 0..n_sources-1.
  std::vector<std::size_t> counts(std::size_t n_sources) const {
    std::vector<std::size_t> c(n_sources, 0);
    for (std::size_t e : entries_) {
      if (e >= n_sources)
        throw InputError("pattern entry " + std::to_string(e + 1) + " exceeds source count " +
                         std::to_string(n_sources));
      ++c[e];
    }
    return c;
  }

  /// Pattern with `source` inserted before position `pos` (pos == size appends).
  Pattern with_insertion(std::size_t pos, std::size_t source) const {
    std::vector<std::size_t> e;
    e.reserve(entries_.size() + 1);
    e.insert(e.end(), entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(pos));
    e.push_back(source);
    e.insert(e.end(), entries_.begin() + static_cast<std::ptrdiff_t>(pos), entries_.end());
    return Pattern(std::move(e));
  }

  Pattern rotated(std::size_t shift) const {
    std::vector<std::size_t> e(entries_.size());
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = entries_[(k + shift) % e.size()];
    return Pattern(std::move(e));
  }

  friend bool operator==(const Pattern&, const Pattern&) = default;
  friend auto operator<=>(const Pattern& a, const Pattern& b) { return a.entries_ <=> b.entries_; }

private:
  std::vector<std::size_t> entries_;
};

/// Throws InputError unless every source appears at least once.
inline std::vector<std::size_t> check_feasible(const Pattern& pattern, std::size_t n_sources) {
  if (pattern.empty()) throw InputError("infeasible: empty pattern");
  auto counts = pattern.counts(n_sources);
  for (std::size_t n = 0; n < n_sources; ++n)
    if (counts[n] == 0) throw InputError("infeasible: source " + std::to_string(n + 1) + " absent");
  return counts;
}

}  // namespace agesched
