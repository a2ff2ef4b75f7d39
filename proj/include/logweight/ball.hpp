#pragma once

// Unit-ball version of the construction: 2Q+1 functions assembled from the
// disk term data and a family of homogeneous polynomials W_q[n].

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "logweight/construction.hpp"
#include "logweight/series.hpp"
#include "logweight/weight.hpp"

namespace logweight {

/// |value| = exp(log_abs), arg given by `unit`; log_abs = -inf means zero.
struct LogPolar {
  double log_abs = neg_inf;
  std::complex<double> unit{1.0, 0.0};

  std::complex<double> value() const;
};

using Point = std::vector<std::complex<double>>;

/// W_q[n](z) for q in 1..Q, in log-polar form so that huge n neither
/// overflows nor underflows.
using PolynomialEvaluator = std::function<LogPolar(int q, std::int64_t n, std::span<const std::complex<double>> z)>;

struct PolynomialFamily {
  int d = 1;
  int Q = 1;
  double delta_claimed = 1.0;
  std::string kind;
  PolynomialEvaluator eval;

  /// Plugin form: the point as interleaved (re, im) pairs.
  std::complex<double> value(int q, std::int64_t n, std::span<const double> interleaved) const;

  static PolynomialFamily monomial();  // d = 1, W = z^n, delta 1
  /// W_q = z_q^n on C^d; has no uniform lower bound, kept as a negative example.
  static PolynomialFamily coordinate(int d = 2, double delta_claimed = 0.5);
  static PolynomialFamily scaled_monomial(double scale = 2.0);  // breaks the sup bound when scale > 1

  /// {"d":, "Q":, "delta":, "kind": "monomial" | "coordinate" | "scaled_monomial"}
  static PolynomialFamily from_manifest(const nlohmann::json& manifest);
  nlohmann::json manifest() const;

 private:
  double scale_ = 1.0;
};

/// Deterministic points on the unit sphere of C^d. d = 1: equally spaced
/// angles starting at 1. d >= 2: the barycenter |z_i|^2 = 1/d first, then a
/// shifted Sobol sequence mapped through (simplex, phases).
std::vector<Point> sphere_points(int d, int count, std::uint64_t seed = 1);

struct DegreeReport {
  std::int64_t n = 0;
  double sup = 0.0;
  double min_of_max = 0.0;
  double homogeneity_residual = 0.0;  // backward error: forward residual / max(1, n)
  bool sup_ok = true;
  bool lower_ok = true;
  bool homogeneity_ok = true;
  bool passed = true;
};

struct FamilyReport {
  bool passed = true;
  int sphere_samples = 0;
  double sup_tol = 1e-9;
  double delta_tol = 1e-9;
  double homogeneity_tol = 1e-10;
  std::vector<DegreeReport> degrees;

  const DegreeReport* first_failure() const;
};

FamilyReport verify_family(const PolynomialFamily& fam, std::span<const std::int64_t> degrees, int sphere_samples,
                           std::uint64_t seed = 1);

struct BallFunction {
  int q = 0;       // 1..Q; 0 for the constant
  int parity = 0;  // 0 takes G1's terms, 1 takes G2's
  bool constant = false;
  LacunarySeries series;
};

struct BallFunctionSystem {
  PolynomialFamily family;
  SeriesPair pair;
  std::vector<BallFunction> functions;  // f_1 .. f_{2Q+1}; the last is 1

  std::size_t count() const { return functions.size(); }
};

/// Requires h >= h_for_delta(delta) and the family verified on every
/// exponent of the state.
BallFunctionSystem build_ball_functions(const ConstructionState& state, const PolynomialFamily& fam,
                                        int sphere_samples = 64, std::uint64_t seed = 1);

/// f_m(z) with m 0-based. Terms use |W_q[n](t zeta)| <= t^n to factor out
/// the radial magnitudes exactly like the disk series.
ScaledComplex eval_ball_function(const BallFunctionSystem& sys, std::size_t m, std::span<const std::complex<double>> z);

/// log sum_m |f_m(z)| over the 2Q non-constant functions, plus the
/// constant when asked.
double ball_modulus_sum(const BallFunctionSystem& sys, std::span<const std::complex<double>> z, bool with_constant);

struct BallBoundReport {
  bool passed = true;
  double slack = 1e-9;
  double log_lower_constant = 0.0;  // log(2 delta / 5) - h
  double worst_margin = INFINITY;
  double witness_t = 0.0;
  std::size_t witness_point = 0;
  std::size_t points = 0;
  // omega(|z|) <= C sum_{m=1}^{2Q+1} |f_m(z)| over the whole grid, |z| <= t0 included
  double log_C = -INFINITY;
  double C = 0.0;
  double C_witness_r = 0.0;
};

BallBoundReport ball_lower_bound_check(const BallFunctionSystem& sys, const WeightFunction& w,
                                       std::span<const double> t_grid, int sphere_samples, std::uint64_t seed = 1,
                                       int inner_radii = 20);

nlohmann::json family_report_to_json(const FamilyReport& r);
nlohmann::json ball_report_to_json(const BallBoundReport& r);

}  // namespace logweight
