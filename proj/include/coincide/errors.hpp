#pragma once

#include <stdexcept>
#include <string>

namespace coincide {

// Input data could not be parsed or violates the file contract.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// An argument is outside the domain of an operation (delta too large,
// index out of range, ...).
struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// A test statistic is undefined because an estimated rate is zero
// (lambda^-1 appears in the variance).
struct ZeroIntensityError : std::runtime_error {
  explicit ZeroIntensityError(const std::string& what) : std::runtime_error(what) {}
};

// The plug-in variance estimate came out non-positive, so the statistic
// cannot be standardized. Callers running many patterns map this to p = 1
// plus a flag instead of fabricating a decision.
struct DegenerateVarianceError : std::runtime_error {
  explicit DegenerateVarianceError(const std::string& what) : std::runtime_error(what) {}
};

// A thinning simulation exceeded its event cap.
struct ExplosionError : std::runtime_error {
  explicit ExplosionError(const std::string& what) : std::runtime_error(what) {}
};

// An enumeration would visit more tuples than the configured cap.
struct CapExceededError : std::runtime_error {
  explicit CapExceededError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace coincide
