#pragma once

// Log-domain arithmetic, compensated summation and exact angle handling
// shared by every module.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

namespace logweight {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double pos_inf = std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow; -inf is the additive identity.
inline double log_add_exp(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

/// log(sum exp(v_i)); returns -inf for an empty span.
template <typename T>
T log_sum_exp(std::span<const T> values) {
  if (values.empty()) return static_cast<T>(neg_inf);
  const T top = *std::max_element(values.begin(), values.end());
  if (top == static_cast<T>(neg_inf) || !std::isfinite(top)) return top;
  T sum = 0;
  for (T v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

/// Neumaier's variant of Kahan summation.
template <typename T>
class CompensatedSum {
 public:
  void add(T value) {
    const T t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  T sum_{0};
  T comp_{0};
};

/// Componentwise compensated sum of complex values.
class ComplexCompensatedSum {
 public:
  void add(std::complex<double> v) {
    re_.add(v.real());
    im_.add(v.imag());
  }
  std::complex<double> value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum<double> re_;
  CompensatedSum<double> im_;
};

/// An angle 2*pi*num/den held as an exact rational so that the phase of
/// z^n on grid points can be reduced with integer arithmetic.
struct Turn {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double radians() const {
    return 2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(den);
  }
};

inline std::int64_t gcd64(std::int64_t a, std::int64_t b) {
  while (b != 0) {
    const std::int64_t r = a % b;
    a = b;
    b = r;
  }
  return a < 0 ? -a : a;
}

inline Turn reduce(Turn t) {
  t.num %= t.den;
  if (t.num < 0) t.num += t.den;
  const std::int64_t g = gcd64(t.num == 0 ? t.den : t.num, t.den);
  return {t.num / g, t.den / g};
}

inline Turn operator+(Turn a, Turn b) {
  const std::int64_t g = gcd64(a.den, b.den);
  const std::int64_t den = a.den / g * b.den;
  const std::int64_t num = a.num * (den / a.den) + b.num * (den / b.den);
  return reduce({num % den, den});
}

/// e^{i n theta} for theta = 2*pi*num/den, reduced exactly modulo the turn.
inline std::complex<double> unit_power(Turn angle, std::int64_t n) {
  using u128 = unsigned __int128;
  const Turn a = reduce(angle);
  const auto den = static_cast<u128>(a.den);
  const auto nn = static_cast<u128>(n < 0 ? -n : n) % den;
  auto rem = static_cast<std::int64_t>((nn * static_cast<u128>(a.num)) % den);
  if (n < 0 && rem != 0) rem = a.den - rem;
  return std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(rem) /
                             static_cast<double>(a.den));
}

/// e^{i n arg} for a floating-point argument.
inline std::complex<double> unit_power(double arg, std::int64_t n) {
  if (arg == 0.0 || n == 0) return {1.0, 0.0};
  return std::polar(1.0, std::remainder(static_cast<double>(n) * arg, 2.0 * std::numbers::pi));
}

}  // namespace logweight
