#pragma once

// The basic induction: tangent lines l_k(x) = log a_k + delta_k x to Phi,
// each meeting Phi - h at x_{k-1} and x_k.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "logweight/weight.hpp"

namespace logweight {

struct ConstructionParams {
  double h = 2.0;
  double x0 = std::log(0.95);
  std::size_t k_max = 100000;
  double t_stop = 0.9999;
  double root_tol = 1e-13;
  /// Lower bound on t_0 assumed by the primed (integer exponent) estimates.
  double primed_threshold = 0.9;
  /// On an exponent collision retry with x0 / 2, at most max_restarts times.
  bool auto_restart = false;
  int max_restarts = 8;

  static ConstructionParams from_t0(double t0, double h = 2.0, double t_stop = 0.9999) {
    ConstructionParams p;
    p.x0 = std::log(t0);
    p.h = h;
    p.t_stop = t_stop;
    return p;
  }
};

struct TangentLine {
  double xi = 0.0;     // tangency abscissa
  double delta = 0.0;  // slope
  double log_a = 0.0;  // intercept

  double at(double x) const { return log_a + delta * x; }
};

struct TangentStep {
  TangentLine line;
  double x_next = 0.0;
  bool at_kink = false;  // supporting line at a corner of a piecewise Phi
};

struct ConstructionState {
  ConstructionParams params;
  std::vector<double> xs;  // x_0 .. x_K
  std::vector<double> ts;  // exp(x_k)
  std::vector<TangentLine> lines;  // l_1 .. l_K
  std::vector<std::int64_t> es;    // floor(delta_k) + 1
  int restarts = 0;
  bool hit_k_max = false;

  std::size_t size() const { return lines.size(); }
  double h() const { return params.h; }
  double t0() const { return ts.front(); }
  /// Right end of the range on which the truncated series is certified.
  double t_verified() const { return std::min(params.t_stop, ts.back()); }
};

/// One induction step from x_prev.
TangentStep next_tangent(const WeightFunction& w, double x_prev, double h, double root_tol = 1e-13);

ConstructionState run_construction(const WeightFunction& w, const ConstructionParams& params);

/// Grid used by the strict-convexity gate of run_construction.
std::vector<double> convexity_gate_grid(const WeightFunction& w, double x0);

/// Smallest h making the two geometric tails sum to at most delta/2:
/// max(2, ln(1 + 4/delta)), delta in (0, 1].
double h_for_delta(double delta);

struct InequalityCheck {
  std::string name;
  double worst_margin = INFINITY;      // relative, log scale
  double worst_raw_margin = INFINITY;  // absolute, log scale
  double witness_x = 0.0;
  int witness_k = 0;
  std::size_t checked = 0;
  bool passed = true;
};

struct LemmaReport {
  std::vector<InequalityCheck> checks;
  bool passed = true;
  double tolerance = 1e-9;

  const InequalityCheck& get(const std::string& name) const;
};

/// Samples every tangent-separation and segment estimate (plain, primed and,
/// when delta is given, the delta-sharpened form) in the log domain.
LemmaReport verify_tangent_lemmas(const ConstructionState& state, const WeightFunction& w,
                                  int samples_per_interval, std::optional<double> delta = std::nullopt);

/// JSON with 17 significant digits for every real; the weight spec, when
/// given, is embedded under "weight".
std::string state_to_json(const ConstructionState& state, const nlohmann::json* weight = nullptr);
ConstructionState state_from_json(const nlohmann::json& j);
nlohmann::json lemma_report_to_json(const LemmaReport& report);

}  // namespace logweight
