#pragma once

// Lacunary series with coefficients held as logarithms, evaluated with the
// largest term factored out so that |value| may exceed any double.

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "logweight/construction.hpp"
#include "logweight/numeric.hpp"
#include "logweight/weight.hpp"

namespace logweight {

struct SeriesTerm {
  double log_coeff = 0.0;
  std::int64_t exponent = 0;
};

/// Terms are kept sorted by exponent; exponents must be distinct and >= 0.
class LacunarySeries {
 public:
  LacunarySeries() = default;
  explicit LacunarySeries(std::vector<SeriesTerm> terms);

  std::span<const SeriesTerm> terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  std::int64_t min_exponent() const { return terms_.front().exponent; }
  std::vector<std::int64_t> exponents() const;

  /// Same coefficients with every exponent lowered by `by`.
  LacunarySeries shifted(std::int64_t by) const;
  /// Coefficient of one term changed by `delta_log` (tests, tampering).
  LacunarySeries with_log_coeff_offset(std::size_t index, double delta_log) const;

 private:
  std::vector<SeriesTerm> terms_;
};

/// G1 collects the odd-indexed lines (k = 1, 3, ...), G2 the even ones.
struct SeriesPair {
  LacunarySeries g1;
  LacunarySeries g2;
  double t0 = 0.0;
  double h = 2.0;
  double t_verified = 0.0;  // right end of the certified radius range
};

/// mantissa * exp(log_scale) with |mantissa| in [1, 2), or zero
/// (mantissa 0, log_scale = -inf).
struct ScaledComplex {
  std::complex<double> mantissa{0.0, 0.0};
  double log_scale = neg_inf;

  static ScaledComplex zero() { return {}; }
  /// |value| = exp(log_abs), direction given by the unit complex `unit`.
  static ScaledComplex from_log_polar(double log_abs, std::complex<double> unit);

  bool is_zero() const { return mantissa == std::complex<double>(0.0, 0.0); }
  double log_abs() const;
  /// Plain complex value; overflows to inf for large log_scale.
  std::complex<double> value() const;
};

/// Log-magnitude L_k = log_coeff + e_k log r of the retained terms at one
/// radius (terms more than `drop` below the largest are discarded).
struct RadialTerms {
  std::vector<double> log_mag;
  std::vector<std::int64_t> exponent;
  double log_max = neg_inf;
  double constant = 0.0;  // value at r = 0 when an exponent-0 term exists
  bool at_origin = false;
};

inline constexpr double kDropThreshold = -200.0;

RadialTerms radial_terms(const LacunarySeries& s, double r);
ScaledComplex sum_at_angle(const RadialTerms& terms, Turn angle);
/// sum_k exp(L_k) * unit(e_k), for any unit factor with |unit| <= 1.
ScaledComplex sum_with_units(const RadialTerms& terms, const std::function<std::complex<double>(std::int64_t)>& unit);

SeriesPair split_parity(const ConstructionState& state);

ScaledComplex eval_series(const LacunarySeries& s, std::complex<double> z);
/// z = r e^{2 pi i angle}, phases of z^n reduced exactly.
ScaledComplex eval_series(const LacunarySeries& s, double r, Turn angle);

/// log(|G1(z)| + |G2(z)|).
double modulus_sum(const SeriesPair& pair, std::complex<double> z);
double modulus_sum(const SeriesPair& pair, double r, Turn angle);

struct SandwichReport {
  bool passed = true;
  double slack = 1e-9;
  double lower_constant = 0.0;  // log(2/5) - h
  double upper_constant = 0.0;  // log 4
  double worst_lower_margin = INFINITY;
  double worst_upper_margin = INFINITY;
  double lower_witness_t = 0.0;
  double lower_witness_theta = 0.0;
  double upper_witness_t = 0.0;
  double upper_witness_theta = 0.0;
  std::size_t points = 0;
};

/// (2/5) e^{-h} omega(t) < |G1| + |G2| < 4 omega(t) on t_grid x angles.
SandwichReport sandwich_check(const SeriesPair& pair, const WeightFunction& w, std::span<const double> t_grid,
                              int theta_count);

/// n radii uniformly spaced in (t_lo, t_hi], t_hi included.
std::vector<double> radius_grid(double t_lo, double t_hi, std::size_t n);

struct DiskGridSpec {
  int radii = 100;
  int angles = 64;
};

/// Radii t0 * sin(pi/2 * i/(n-1)): from 0 to t0, densest near t0.
std::vector<double> inner_disk_radii(double t0, int n);

struct AdjustedPair {
  std::int64_t e1 = 0;           // exponent divided out of G1
  Turn rotation{0, 1};           // f1(z) = G1~(e^{i theta} z)
  double theta = 0.0;
  LacunarySeries g1_shifted;     // G1~ = G1 / z^{e1}
  LacunarySeries f2;             // = G2
  double c_low = 0.0;
  double c_high = 0.0;
  double log_c_low = 0.0;
  double log_c_high = 0.0;
  double inner_min_log_ratio = 0.0;  // objective value of the chosen rotation
  double low_witness_r = 0.0, low_witness_theta = 0.0;
  double high_witness_r = 0.0, high_witness_theta = 0.0;
  std::size_t points = 0;
};

/// log(|f1(z)| + |f2(z)|) for the adjusted pair.
double adjusted_modulus_sum(const AdjustedPair& adj, double r, Turn angle);

/// Chooses the rotation among theta_count candidates maximizing the
/// minimum of (|f1|+|f2|)/omega over the inner grid, then measures the
/// constants over the inner grid together with the outer (sandwich) grid.
AdjustedPair zero_adjust(const SeriesPair& pair, const WeightFunction& w, int theta_count, DiskGridSpec inner,
                         std::span<const double> outer_t_grid, int outer_angles);

/// e_{k+1} / e_k.
std::vector<double> frequency_profile(const ConstructionState& state);

/// log of (first discarded term at t) / omega(t): the next line of the
/// induction beyond the stored state, evaluated with its integer exponent.
double first_discarded_log_ratio(const ConstructionState& state, const WeightFunction& w, double t);

nlohmann::json sandwich_report_to_json(const SandwichReport& r);
nlohmann::json adjusted_pair_to_json(const AdjustedPair& a);

}  // namespace logweight
