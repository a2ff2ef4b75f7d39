#pragma once

#include <stdexcept>
#include <string>

namespace logweight {

enum class ErrorKind {
  domain,        // argument outside the mathematical domain (t >= 1, x >= 0, |z| >= 1)
  input,         // malformed or inconsistent input (grids, states, files)
  numeric,       // non-finite intermediate, overflow of integer exponents
  precondition,  // a documented precondition of the operation does not hold
  not_convex,    // strict convexity of Phi is violated
  slow_growth,   // Phi is not unbounded fast enough for bracketing to succeed
  exponent_collision,
  adjustment_failed,
};

const char* to_string(ErrorKind kind);

/// Single exception type used across the library; the kind selects the
/// CLI exit code and lets tests assert on the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain error";
    case ErrorKind::input: return "input error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::precondition: return "precondition error";
    case ErrorKind::not_convex: return "not strictly convex";
    case ErrorKind::slow_growth: return "weight too slowly growing / not unbounded";
    case ErrorKind::exponent_collision: return "exponent collision";
    case ErrorKind::adjustment_failed: return "adjustment failed - refine grids";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, std::string(to_string(kind)) + ": " + detail);
}

}  // namespace logweight
