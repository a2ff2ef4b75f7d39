#pragma once

// Radial weights omega on [0,1) and the log-log reparametrization
// Phi(x) = log omega(e^x), x < 0.

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace logweight {

enum class Family {
  ramey_ullrich,  // 1/(1-t)
  power,          // (1-t)^-a
  exp_power,      // exp((1-t)^-alpha)
  double_exp,     // exp(exp(beta/(1-t)))
  log_power,      // exp((-log t)^-p); p = 1 gives Phi(x) = -1/x
  tabulated,      // Phi piecewise linear in x through the table
  perturbed,      // a convex base plus a bump / sawtooth / staircase
};

enum class DerivativeMode { analytic, finite_difference };

/// Shapes for the perturbed family. params()[0] holds the code.
enum class Perturbation {
  bump = 0,                // tent of given height on an exp_power base
  sawtooth = 1,            // bounded triangle wave in u = -log(-x), breaks convexity
  unbounded_sawtooth = 2,  // staircase in u with growing steps, unbounded hull gap
};

const char* to_string(Family f);
Family family_from_string(const std::string& name);

struct WeightSettings {
  double strictness_tol = 1e-10;     // Phi' must grow by more than this between grid points
  double unbounded_log_threshold = 10.0;
  double unbounded_probe_s = 1e-6;   // unboundedness probe at t = 1 - s
  double doubling_cap = 1e6;
};

/// Immutable value type; copies share the (read-only) family data.
class WeightFunction {
 public:
  static WeightFunction ramey_ullrich();
  static WeightFunction power(double a);
  static WeightFunction exp_power(double alpha);
  static WeightFunction double_exp(double beta = 1.0);
  static WeightFunction log_power(double p = 1.0);
  /// (t, omega) pairs with t strictly increasing in (0,1), omega > 0.
  static WeightFunction tabulated(std::vector<std::pair<double, double>> table);
  /// Piecewise-linear Phi through (x_i, Phi_i) knots, continued beyond the
  /// last knot by `tail` shifted to be continuous there.
  static WeightFunction hull_regularized(std::vector<std::pair<double, double>> knots,
                                         const WeightFunction& tail);
  static WeightFunction perturbed(Perturbation kind, std::vector<double> extra = {});

  static WeightFunction from_json(const nlohmann::json& spec);
  nlohmann::json to_json() const;

  Family family() const;
  std::span<const double> params() const;
  std::string name() const;

  DerivativeMode derivative_mode() const { return mode_; }
  WeightFunction with_derivative_mode(DerivativeMode mode) const;

  /// Phi(x), x < 0. No domain checks; see big_F_eval for the checked entry.
  double phi(double x) const;
  double phi_prime_analytic(double x) const;
  double phi_prime_fd(double x) const;
  /// Dispatches on derivative_mode().
  double phi_prime(double x) const;

  double log_omega(double t) const;
  /// log omega(1 - s) for s in (0,1], evaluated without forming 1 - s.
  double log_omega_complement(double s) const;

  /// Phi is piecewise linear somewhere (tabulated / hull families).
  bool is_piecewise() const;
  /// Knot abscissas of a piecewise family (empty otherwise).
  std::span<const double> knot_x() const;
  /// Abscissas where the family has structure (knots, bump ends, step
  /// onsets); used to seed sampling grids.
  std::vector<double> feature_points(double x_lo, double x_hi) const;

  struct Data;

 private:
  explicit WeightFunction(std::shared_ptr<const Data> d) : data_(std::move(d)) {}
  std::shared_ptr<const Data> data_;
  DerivativeMode mode_ = DerivativeMode::analytic;
};

/// Value of omega, or log omega when omega overflows a double.
struct OmegaValue {
  double value = 0.0;
  bool is_log = false;
};

struct ConvexityReport {
  bool is_strictly_convex = false;
  double min_slope_gap = 0.0;
  std::vector<double> violation_points;
};

struct DoublingReport {
  bool is_doubling = false;
  double A_estimate = 0.0;
  double log_A_estimate = 0.0;
  double witness_s = 0.0;
};

struct WeightDiagnostics {
  bool positive = true;
  bool monotone = true;
  bool unbounded = true;
  bool unbounded_checked = true;  // false for tabulated families
  std::vector<std::string> warnings;
};

OmegaValue omega_eval(const WeightFunction& w, double t);
double log_omega_eval(const WeightFunction& w, double t);
/// order 0: Phi(x); order 1: Phi'(x).
double big_F_eval(const WeightFunction& w, double x, int order);

ConvexityReport check_log_convexity(const WeightFunction& w, std::span<const double> x_grid,
                                    const WeightSettings& settings = {});
DoublingReport check_doubling(const WeightFunction& w, std::span<const double> s_grid,
                              const WeightSettings& settings = {});
WeightDiagnostics validate_weight(const WeightFunction& w, std::span<const double> t_grid,
                                  const WeightSettings& settings = {});

/// n points with -x geometrically spaced from -x_lo down to -x_hi
/// (x_lo < x_hi < 0).
std::vector<double> geometric_x_grid(double x_lo, double x_hi, std::size_t n);

}  // namespace logweight
