#pragma once

#include <stdexcept>
#include <string>

namespace astn {

/// Argument or state outside an operation's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// NaN/Inf detected, or an iterative procedure diverged.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or unknown token in a config/CLI value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Errors from reading the ASTIMG01 image format.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, Truncated, DimensionOverflow, TrailingData, Io };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace astn
