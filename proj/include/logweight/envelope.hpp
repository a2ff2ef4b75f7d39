#pragma once

// Converse direction: maximum modulus profiles, the three-circles
// convexity test, and the lower convex envelope of Phi with its gap.

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "logweight/weight.hpp"

namespace logweight {

using ComplexFunction = std::function<std::complex<double>(std::complex<double>)>;

/// log max |f(r e^{i theta})| over theta_count equally spaced angles.
double max_modulus(const ComplexFunction& f, double r, int theta_count);

struct MaxModulusSettings {
  int initial_angles = 128;
  int max_angles = 1 << 16;
  double tolerance = 1e-9;  // stop doubling once log M moves less than this
  bool refine_peaks = true;  // polish grid peaks by a bracketed 1-D maximization
};

struct AdaptiveMaxModulus {
  double log_M = 0.0;
  int theta_count = 0;
  bool converged = false;
};

/// Doubles the angle count until log M changes by less than the tolerance.
AdaptiveMaxModulus max_modulus_adaptive(const ComplexFunction& f, double r, const MaxModulusSettings& settings = {});

struct MaxModulusProfile {
  std::vector<double> r_grid;
  std::vector<double> values;  // log M(r)
  int theta_count = 0;
};

MaxModulusProfile max_modulus_profile(const ComplexFunction& f, std::span<const double> r_grid,
                                      const MaxModulusSettings& settings = {});

struct HadamardReport {
  bool passed = true;
  double tolerance = 1e-7;
  double min_second_difference = INFINITY;
  double witness_r = 0.0;
  std::size_t witness_function = 0;  // for batch runs
  int max_angles_used = 0;
  bool all_converged = true;
  std::vector<double> log_r;
  std::vector<double> log_sum;  // log of sum_m M_{|f_m|}(r)
};

/// log(sum_m M_{|f_m|}(r)) must be convex in log r: every second difference
/// on the grid is >= -tolerance. Each f_m must satisfy f_m(0) != 0.
HadamardReport hadamard_check(std::span<const ComplexFunction> fs, std::span<const double> r_grid,
                              const MaxModulusSettings& settings = {}, double tolerance = 1e-7);

/// n radii with log r equally spaced in [log r_lo, log r_hi].
std::vector<double> log_spaced_radii(double r_lo, double r_hi, std::size_t n);

struct Polynomial {
  std::vector<std::complex<double>> coeffs;  // coeffs[k] multiplies z^k

  std::complex<double> operator()(std::complex<double> z) const;
};

/// Seeded polynomials of degree 1..max_degree with coefficients in the
/// complex unit box [-1,1]^2 and constant term 1.
std::vector<Polynomial> random_polynomials(std::size_t count, int max_degree, std::uint64_t seed);

struct HullKnot {
  double x = 0.0;
  double y = 0.0;
};

struct EnvelopeResult {
  std::vector<HullKnot> hull_knots;
  std::vector<double> xs;
  std::vector<double> hull_values;  // lower hull at each sample
  double gap = 0.0;                 // max (Phi - hull) over the samples
  double gap_x = 0.0;
  double gap_bound = 50.0;
  bool equivalent = true;
};

/// Lower convex hull of the sampled points (x increasing) by the
/// monotone-chain method. Collinear points are kept as knots.
EnvelopeResult lower_convex_envelope(std::span<const double> xs, std::span<const double> ys, double gap_bound = 50.0);

EnvelopeResult log_convex_envelope(const WeightFunction& w, std::span<const double> x_grid, double gap_bound = 50.0);

/// Geometric grid on [x_lo, x_hi] merged with the family's feature points.
std::vector<double> envelope_grid(const WeightFunction& w, double x_lo, double x_hi, std::size_t n);

/// The hull as a weight: piecewise-linear Phi over the knots, continued by
/// `tail` beyond the last knot.
WeightFunction regularized_weight(const EnvelopeResult& env, const WeightFunction& tail);

struct EquivalenceConstants {
  double C1 = 0.0;
  double C2 = 0.0;
  double log_C1 = 0.0;
  double log_C2 = 0.0;
  bool unbounded = false;
};

/// C1 = min v/u and C2 = max v/u from log samples on a shared grid;
/// unbounded when log C2 - log C1 exceeds log_spread_cap.
EquivalenceConstants equivalence_constants(std::span<const double> log_u, std::span<const double> log_v,
                                           double log_spread_cap = 50.0);

nlohmann::json hadamard_report_to_json(const HadamardReport& r);
nlohmann::json envelope_result_to_json(const EnvelopeResult& r);

}  // namespace logweight
