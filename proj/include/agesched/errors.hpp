#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace agesched {

/// Invalid user input: a bad system description, pattern or parameter.
class InputError : public std::invalid_argument {
public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}

  /// `source` is zero-based; the message reports it one-based.
  InputError(std::size_t source, const std::string& what)
      : std::invalid_argument("source " + std::to_string(source + 1) + ": " + what), source_(source) {}

  std::optional<std::size_t> source() const noexcept { return source_; }

private:
  std::optional<std::size_t> source_;
};

/// A numerical invariant that must hold for valid inputs did not hold.
class InternalError : public std::logic_error {
public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace agesched
