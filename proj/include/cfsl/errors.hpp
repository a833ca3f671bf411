#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cfsl {

/// Base of every error thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class domain_error : public error {
 public:
  using error::error;
};

/// Non-finite result, integrator failure or a violated numerical invariant.
class numeric_error : public error {
 public:
  explicit numeric_error(const std::string& what, std::optional<double> lambda = std::nullopt)
      : error(lambda ? what + " (lambda=" + std::to_string(*lambda) + ")" : what), lambda_(lambda) {}

  std::optional<double> lambda() const noexcept { return lambda_; }

 private:
  std::optional<double> lambda_;
};

/// Eigenvalue bracketing failed for a given index.
class search_error : public error {
 public:
  search_error(const std::string& what, std::size_t index)
      : error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Spectral parameter sits on (or numerically at) a pole.
class pole_error : public error {
 public:
  using error::error;
};

/// Caller violated an API precondition (mismatched grids, wrong counts).
class usage_error : public error {
 public:
  using error::error;
};

/// Malformed input file; the message names the offending field.
class parse_error : public error {
 public:
  using error::error;
};

}  // namespace cfsl
