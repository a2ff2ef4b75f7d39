#include "logweight/weight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <nlohmann/json.hpp>

#include "logweight/errors.hpp"
#include "logweight/numeric.hpp"

namespace logweight {

struct WeightFunction::Data {
  Family family = Family::ramey_ullrich;
  std::vector<double> params;

  // Tabulated / hull: knots in (x, Phi) and segment slopes.
  std::vector<double> knot_x;
  std::vector<double> knot_phi;
  std::vector<double> slopes;
  std::optional<WeightFunction> tail;
  double tail_offset = 0.0;

  // Perturbed: convex base and precomputed shape constants.
  std::optional<WeightFunction> base;
  Perturbation kind = Perturbation::bump;
  double bump_center = 0.0;
  double bump_left = 0.0;   // rise width
  double bump_right = 0.0;  // descent width
};

namespace {

constexpr double kLogMax = 709.782712893384;  // log(DBL_MAX)

double one_minus_e_x(double x) { return -std::expm1(x); }

struct PerturbationValue {
  double value;
  double slope;
};

PerturbationValue perturbation(const WeightFunction::Data& d, double x) {
  const auto& p = d.params;
  switch (d.kind) {
    case Perturbation::bump: {
      const double height = p[1];
      const double c = d.bump_center;
      if (x <= c - d.bump_left || x >= c + d.bump_right) return {0.0, 0.0};
      if (x <= c) return {height * (1.0 - (c - x) / d.bump_left), height / d.bump_left};
      return {height * (1.0 - (x - c) / d.bump_right), -height / d.bump_right};
    }
    case Perturbation::sawtooth: {
      const double u = -std::log(-x);
      if (u < 0.0) return {0.0, 0.0};
      const double f = u - std::floor(u);
      const double amp = p[1];
      const double tri = f < 0.5 ? 2.0 * f : 2.0 - 2.0 * f;
      const double dtri = f < 0.5 ? 2.0 : -2.0;
      return {amp * tri, amp * dtri / (-x)};
    }
    case Perturbation::unbounded_sawtooth: {
      const double u = -std::log(-x);
      if (u < 0.0) return {0.0, 0.0};
      const double amp = p[1];
      const double ramp = p[2];
      const double m = std::floor(u);
      const double f = u - m;
      const double s = std::min(f / ramp, 1.0);
      const double r = s * s * (3.0 - 2.0 * s);
      const double dr = f < ramp ? 6.0 * s * (1.0 - s) / ramp : 0.0;
      return {amp * (0.5 * m * (m + 1.0) + (m + 1.0) * r), amp * (m + 1.0) * dr / (-x)};
    }
  }
  return {0.0, 0.0};
}

std::size_t segment_index(const std::vector<double>& xs, double x) {
  // index i such that xs[i] <= x < xs[i+1], clamped to [0, n-2]
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(std::distance(xs.begin(), it));
  if (i == 0) return 0;
  return std::min(i - 1, xs.size() - 2);
}

std::shared_ptr<WeightFunction::Data> make_data(Family f, std::vector<double> params) {
  auto d = std::make_shared<WeightFunction::Data>();
  d->family = f;
  d->params = std::move(params);
  return d;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::input, std::string(what) + " must be positive");
}

}  // namespace

const char* to_string(Family f) {
  switch (f) {
    case Family::ramey_ullrich: return "ramey_ullrich";
    case Family::power: return "power";
    case Family::exp_power: return "exp_power";
    case Family::double_exp: return "double_exp";
    case Family::log_power: return "log_power";
    case Family::tabulated: return "tabulated";
    case Family::perturbed: return "perturbed";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  for (Family f : {Family::ramey_ullrich, Family::power, Family::exp_power, Family::double_exp,
                   Family::log_power, Family::tabulated, Family::perturbed}) {
    if (name == to_string(f)) return f;
  }
  fail(ErrorKind::input, "unknown weight family '" + name + "'");
}

WeightFunction WeightFunction::ramey_ullrich() {
  return WeightFunction(make_data(Family::ramey_ullrich, {}));
}

WeightFunction WeightFunction::power(double a) {
  require_positive(a, "power exponent");
  return WeightFunction(make_data(Family::power, {a}));
}

WeightFunction WeightFunction::exp_power(double alpha) {
  require_positive(alpha, "exp_power alpha");
  return WeightFunction(make_data(Family::exp_power, {alpha}));
}

WeightFunction WeightFunction::double_exp(double beta) {
  require_positive(beta, "double_exp beta");
  return WeightFunction(make_data(Family::double_exp, {beta}));
}

WeightFunction WeightFunction::log_power(double p) {
  require_positive(p, "log_power p");
  return WeightFunction(make_data(Family::log_power, {p}));
}

WeightFunction WeightFunction::tabulated(std::vector<std::pair<double, double>> table) {
  if (table.size() < 2) fail(ErrorKind::input, "table needs at least two (t, omega) pairs");
  auto d = make_data(Family::tabulated, {});
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto [t, om] = table[i];
    if (!(t > 0.0 && t < 1.0)) fail(ErrorKind::input, "table t must lie in (0,1)");
    if (!(om > 0.0) || !std::isfinite(om)) fail(ErrorKind::input, "table omega must be positive");
    if (i > 0 && !(t > table[i - 1].first)) fail(ErrorKind::input, "table t must be strictly increasing");
    d->knot_x.push_back(std::log(t));
    d->knot_phi.push_back(std::log(om));
  }
  for (std::size_t i = 0; i + 1 < d->knot_x.size(); ++i) {
    d->slopes.push_back((d->knot_phi[i + 1] - d->knot_phi[i]) / (d->knot_x[i + 1] - d->knot_x[i]));
  }
  return WeightFunction(d);
}

WeightFunction WeightFunction::hull_regularized(std::vector<std::pair<double, double>> knots,
                                                const WeightFunction& tail) {
  if (knots.size() < 2) fail(ErrorKind::input, "hull needs at least two knots");
  auto d = make_data(Family::tabulated, {});
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].first < 0.0)) fail(ErrorKind::input, "hull knots must have x < 0");
    if (i > 0 && !(knots[i].first > knots[i - 1].first)) {
      fail(ErrorKind::input, "hull knots must be strictly increasing");
    }
    d->knot_x.push_back(knots[i].first);
    d->knot_phi.push_back(knots[i].second);
  }
  for (std::size_t i = 0; i + 1 < d->knot_x.size(); ++i) {
    d->slopes.push_back((d->knot_phi[i + 1] - d->knot_phi[i]) / (d->knot_x[i + 1] - d->knot_x[i]));
  }
  d->tail = tail;
  d->tail_offset = d->knot_phi.back() - tail.phi(d->knot_x.back());
  return WeightFunction(d);
}

WeightFunction WeightFunction::perturbed(Perturbation kind, std::vector<double> extra) {
  std::vector<double> params{static_cast<double>(static_cast<int>(kind))};
  auto pick = [&](std::size_t i, double def) { return i < extra.size() ? extra[i] : def; };
  auto d = make_data(Family::perturbed, {});
  d->kind = kind;
  switch (kind) {
    case Perturbation::bump: {
      const double height = pick(0, 3.0);
      const double t_center = pick(1, 0.99);
      const double alpha = pick(2, 2.0);
      require_positive(height, "bump height");
      if (!(t_center > 0.0 && t_center < 1.0)) fail(ErrorKind::input, "bump center must lie in (0,1)");
      params.insert(params.end(), {height, t_center, alpha});
      d->base = WeightFunction::exp_power(alpha);
      d->bump_center = std::log(t_center);
      // Descent at 0.9 of the base slope keeps Phi non-decreasing; the
      // rise is ten times steeper.
      d->bump_right = height / (0.9 * d->base->phi_prime_analytic(d->bump_center));
      d->bump_left = d->bump_right / 10.0;
      break;
    }
    case Perturbation::sawtooth: {
      const double amp = pick(0, 0.25);
      require_positive(amp, "sawtooth amplitude");
      params.push_back(amp);
      d->base = WeightFunction::ramey_ullrich();
      break;
    }
    case Perturbation::unbounded_sawtooth: {
      const double amp = pick(0, 8.0);
      const double ramp = pick(1, 0.2);
      require_positive(amp, "staircase amplitude");
      if (!(ramp > 0.0 && ramp <= 1.0)) fail(ErrorKind::input, "staircase ramp must lie in (0,1]");
      params.insert(params.end(), {amp, ramp});
      d->base = WeightFunction::ramey_ullrich();
      break;
    }
    default:
      fail(ErrorKind::input, "unknown perturbation kind");
  }
  d->params = std::move(params);
  return WeightFunction(d);
}

Family WeightFunction::family() const { return data_->family; }

std::span<const double> WeightFunction::params() const { return data_->params; }

std::string WeightFunction::name() const {
  std::string n = to_string(data_->family);
  if (data_->family == Family::perturbed) {
    switch (data_->kind) {
      case Perturbation::bump: return n + "_bump";
      case Perturbation::sawtooth: return n + "_sawtooth";
      case Perturbation::unbounded_sawtooth: return n + "_unbounded_sawtooth";
    }
  }
  return n;
}

WeightFunction WeightFunction::with_derivative_mode(DerivativeMode mode) const {
  WeightFunction copy = *this;
  copy.mode_ = mode;
  return copy;
}

bool WeightFunction::is_piecewise() const { return data_->family == Family::tabulated; }

std::span<const double> WeightFunction::knot_x() const { return data_->knot_x; }

double WeightFunction::phi(double x) const {
  const Data& d = *data_;
  switch (d.family) {
    case Family::ramey_ullrich:
      return -std::log(one_minus_e_x(x));
    case Family::power:
      return -d.params[0] * std::log(one_minus_e_x(x));
    case Family::exp_power:
      return std::pow(one_minus_e_x(x), -d.params[0]);
    case Family::double_exp:
      return std::exp(d.params[0] / one_minus_e_x(x));
    case Family::log_power:
      return std::pow(-x, -d.params[0]);
    case Family::tabulated: {
      if (x <= d.knot_x.front()) return d.knot_phi.front();
      if (d.tail && x > d.knot_x.back()) return d.tail->phi(x) + d.tail_offset;
      const std::size_t i = segment_index(d.knot_x, x);
      return d.knot_phi[i] + d.slopes[i] * (x - d.knot_x[i]);
    }
    case Family::perturbed:
      return d.base->phi(x) + perturbation(d, x).value;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double WeightFunction::phi_prime_analytic(double x) const {
  const Data& d = *data_;
  switch (d.family) {
    case Family::ramey_ullrich:
      return 1.0 / std::expm1(-x);
    case Family::power:
      return d.params[0] / std::expm1(-x);
    case Family::exp_power: {
      const double a = d.params[0];
      return a * std::exp(x) * std::pow(one_minus_e_x(x), -a - 1.0);
    }
    case Family::double_exp: {
      const double s = one_minus_e_x(x);
      return phi(x) * d.params[0] * std::exp(x) / (s * s);
    }
    case Family::log_power: {
      const double p = d.params[0];
      return p * std::pow(-x, -p - 1.0);
    }
    case Family::tabulated: {
      // right derivative at knots
      if (x < d.knot_x.front()) return 0.0;
      if (d.tail && x >= d.knot_x.back()) return d.tail->phi_prime_analytic(x);
      return d.slopes[segment_index(d.knot_x, x)];
    }
    case Family::perturbed:
      return d.base->phi_prime_analytic(x) + perturbation(d, x).slope;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double WeightFunction::phi_prime_fd(double x) const {
  constexpr double cbrt_eps = 6.0554544523933395e-06;  // eps^(1/3)
  double step = std::max(cbrt_eps * std::abs(x), 1e-8);
  if (x + step >= 0.0) step = -x / 2.0;
  return (phi(x + step) - phi(x - step)) / (2.0 * step);
}

double WeightFunction::phi_prime(double x) const {
  return mode_ == DerivativeMode::analytic ? phi_prime_analytic(x) : phi_prime_fd(x);
}

double WeightFunction::log_omega(double t) const {
  const Data& d = *data_;
  switch (d.family) {
    case Family::ramey_ullrich:
      return -std::log1p(-t);
    case Family::power:
      return -d.params[0] * std::log1p(-t);
    case Family::exp_power:
      return std::pow(1.0 - t, -d.params[0]);
    case Family::double_exp:
      return std::exp(d.params[0] / (1.0 - t));
    case Family::log_power:
      return t == 0.0 ? 0.0 : std::pow(-std::log(t), -d.params[0]);
    case Family::tabulated:
      return t == 0.0 ? d.knot_phi.front() : phi(std::log(t));
    case Family::perturbed:
      return t == 0.0 ? d.base->log_omega(0.0) : phi(std::log(t));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double WeightFunction::log_omega_complement(double s) const {
  const Data& d = *data_;
  switch (d.family) {
    case Family::ramey_ullrich:
      return -std::log(s);
    case Family::power:
      return -d.params[0] * std::log(s);
    case Family::exp_power:
      return std::pow(s, -d.params[0]);
    case Family::double_exp:
      return std::exp(d.params[0] / s);
    case Family::log_power:
      return s == 1.0 ? 0.0 : std::pow(-std::log1p(-s), -d.params[0]);
    case Family::tabulated:
    case Family::perturbed:
      return s == 1.0 ? log_omega(0.0) : phi(std::log1p(-s));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> WeightFunction::feature_points(double x_lo, double x_hi) const {
  const Data& d = *data_;
  std::vector<double> pts;
  auto keep = [&](double x) {
    if (x >= x_lo && x <= x_hi && x < 0.0) pts.push_back(x);
  };
  if (d.family == Family::tabulated) {
    for (double x : d.knot_x) keep(x);
  } else if (d.family == Family::perturbed) {
    switch (d.kind) {
      case Perturbation::bump:
        keep(d.bump_center - d.bump_left);
        keep(d.bump_center);
        keep(d.bump_center + d.bump_right);
        break;
      case Perturbation::sawtooth:
        for (int n = 0; n < 60; ++n) {
          keep(-std::exp(-static_cast<double>(n)));
          keep(-std::exp(-(n + 0.5)));
        }
        break;
      case Perturbation::unbounded_sawtooth:
        for (int n = 0; n < 60; ++n) {
          keep(-std::exp(-static_cast<double>(n)));
          keep(-std::exp(-(n + d.params[2])));
        }
        break;
    }
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

// ---- JSON ----------------------------------------------------------------

WeightFunction WeightFunction::from_json(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("family") || !spec["family"].is_string()) {
    fail(ErrorKind::input, "weight spec must be an object with a string \"family\"");
  }
  const std::string fam = spec["family"].get<std::string>();
  std::vector<double> params;
  if (spec.contains("params")) {
    if (!spec["params"].is_array()) fail(ErrorKind::input, "\"params\" must be an array");
    for (const auto& p : spec["params"]) {
      if (!p.is_number()) fail(ErrorKind::input, "\"params\" entries must be numbers");
      params.push_back(p.get<double>());
    }
  }
  auto param = [&](std::size_t i, double def) { return i < params.size() ? params[i] : def; };

  WeightFunction w = WeightFunction::ramey_ullrich();
  if (fam == "perturbed_bump") {
    w = perturbed(Perturbation::bump, params);
  } else if (fam == "perturbed_sawtooth") {
    w = perturbed(Perturbation::sawtooth, params);
  } else if (fam == "perturbed_unbounded_sawtooth") {
    w = perturbed(Perturbation::unbounded_sawtooth, params);
  } else {
    switch (family_from_string(fam)) {
      case Family::ramey_ullrich: w = ramey_ullrich(); break;
      case Family::power: w = power(param(0, 1.0)); break;
      case Family::exp_power: w = exp_power(param(0, 1.0)); break;
      case Family::double_exp: w = double_exp(param(0, 1.0)); break;
      case Family::log_power: w = log_power(param(0, 1.0)); break;
      case Family::tabulated: {
        if (spec.contains("knots")) {
          std::vector<std::pair<double, double>> knots;
          for (const auto& k : spec["knots"]) knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
          if (!spec.contains("tail")) fail(ErrorKind::input, "hull knots require a \"tail\" weight");
          w = hull_regularized(std::move(knots), from_json(spec["tail"]));
          break;
        }
        if (!spec.contains("table") || !spec["table"].is_array()) {
          fail(ErrorKind::input, "tabulated weight requires \"table\": [[t, omega], ...]");
        }
        std::vector<std::pair<double, double>> table;
        for (const auto& row : spec["table"]) {
          if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
            fail(ErrorKind::input, "table rows must be [t, omega] number pairs");
          }
          table.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
        w = tabulated(std::move(table));
        break;
      }
      case Family::perturbed: {
        if (params.empty()) fail(ErrorKind::input, "perturbed weight needs params[0] = kind code");
        const int code = static_cast<int>(params[0]);
        if (code < 0 || code > 2) fail(ErrorKind::input, "perturbed kind code must be 0, 1 or 2");
        w = perturbed(static_cast<Perturbation>(code), std::vector<double>(params.begin() + 1, params.end()));
        break;
      }
    }
  }
  if (spec.contains("derivative")) {
    const std::string mode = spec["derivative"].get<std::string>();
    if (mode == "finite_difference") {
      w = w.with_derivative_mode(DerivativeMode::finite_difference);
    } else if (mode != "analytic") {
      fail(ErrorKind::input, "\"derivative\" must be analytic or finite_difference");
    }
  }
  return w;
}

nlohmann::json WeightFunction::to_json() const {
  const Data& d = *data_;
  nlohmann::json j;
  j["family"] = to_string(d.family);
  j["params"] = d.params;
  if (d.family == Family::tabulated) {
    if (d.tail) {
      nlohmann::json knots = nlohmann::json::array();
      for (std::size_t i = 0; i < d.knot_x.size(); ++i) knots.push_back({d.knot_x[i], d.knot_phi[i]});
      j["knots"] = knots;
      j["tail"] = d.tail->to_json();
    } else {
      nlohmann::json table = nlohmann::json::array();
      for (std::size_t i = 0; i < d.knot_x.size(); ++i) {
        table.push_back({std::exp(d.knot_x[i]), std::exp(d.knot_phi[i])});
      }
      j["table"] = table;
    }
  }
  if (mode_ == DerivativeMode::finite_difference) j["derivative"] = "finite_difference";
  return j;
}

// ---- operations ----------------------------------------------------------

OmegaValue omega_eval(const WeightFunction& w, double t) {
  const double lw = log_omega_eval(w, t);
  if (lw > kLogMax) return {lw, true};
  return {std::exp(lw), false};
}

double log_omega_eval(const WeightFunction& w, double t) {
  if (!(t >= 0.0 && t < 1.0)) fail(ErrorKind::domain, "omega requires 0 <= t < 1");
  const double lw = w.log_omega(t);
  if (std::isnan(lw)) fail(ErrorKind::numeric, "log omega is NaN");
  return lw;
}

double big_F_eval(const WeightFunction& w, double x, int order) {
  if (!(x < 0.0)) fail(ErrorKind::domain, "Phi requires x < 0");
  if (order != 0 && order != 1) fail(ErrorKind::input, "order must be 0 or 1");
  const double v = order == 0 ? w.phi(x) : w.phi_prime(x);
  if (!std::isfinite(v)) fail(ErrorKind::numeric, "non-finite Phi at x = " + std::to_string(x));
  return v;
}

namespace {

void require_negative_increasing(std::span<const double> grid, std::size_t min_size) {
  if (grid.size() < min_size) {
    fail(ErrorKind::input, "grid needs at least " + std::to_string(min_size) + " points");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] < 0.0)) fail(ErrorKind::input, "grid points must be negative");
    if (i > 0 && !(grid[i] > grid[i - 1])) fail(ErrorKind::input, "grid must be strictly increasing");
  }
}

}  // namespace

ConvexityReport check_log_convexity(const WeightFunction& w, std::span<const double> x_grid,
                                    const WeightSettings& settings) {
  require_negative_increasing(x_grid, 3);
  std::vector<double> slopes(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) slopes[i] = big_F_eval(w, x_grid[i], 1);

  ConvexityReport report;
  report.min_slope_gap = pos_inf;
  for (std::size_t i = 0; i + 1 < slopes.size(); ++i) {
    const double gap = slopes[i + 1] - slopes[i];
    report.min_slope_gap = std::min(report.min_slope_gap, gap);
    if (!(gap > settings.strictness_tol)) report.violation_points.push_back(x_grid[i + 1]);
  }
  report.is_strictly_convex = report.min_slope_gap > settings.strictness_tol;
  return report;
}

DoublingReport check_doubling(const WeightFunction& w, std::span<const double> s_grid,
                              const WeightSettings& settings) {
  if (s_grid.empty()) fail(ErrorKind::input, "empty s grid");
  DoublingReport r;
  r.log_A_estimate = neg_inf;
  for (double s : s_grid) {
    if (!(s > 0.0 && s <= 1.0)) fail(ErrorKind::domain, "doubling check requires s in (0,1]");
    const double lr = w.log_omega_complement(s / 2.0) - w.log_omega_complement(s);
    const double v = std::isnan(lr) ? pos_inf : lr;
    if (v > r.log_A_estimate) {
      r.log_A_estimate = v;
      r.witness_s = s;
    }
  }
  r.A_estimate = std::exp(r.log_A_estimate);
  r.is_doubling = std::isfinite(r.A_estimate) && r.A_estimate < settings.doubling_cap;
  return r;
}

WeightDiagnostics validate_weight(const WeightFunction& w, std::span<const double> t_grid,
                                  const WeightSettings& settings) {
  WeightDiagnostics diag;
  double prev = neg_inf;
  for (double t : t_grid) {
    const double lw = log_omega_eval(w, t);
    if (!(lw > neg_inf) || std::isnan(lw)) diag.positive = false;
    if (lw < prev - 1e-12 * std::max(1.0, std::abs(prev))) diag.monotone = false;
    prev = lw;
  }
  if (w.family() == Family::tabulated) {
    diag.unbounded_checked = false;
    diag.warnings.emplace_back("unboundedness cannot be verified from tabulated data; check skipped");
  } else {
    diag.unbounded = w.log_omega_complement(settings.unbounded_probe_s) > settings.unbounded_log_threshold;
  }
  return diag;
}

std::vector<double> geometric_x_grid(double x_lo, double x_hi, std::size_t n) {
  if (!(x_lo < x_hi && x_hi < 0.0) || n < 2) fail(ErrorKind::input, "geometric grid needs x_lo < x_hi < 0, n >= 2");
  std::vector<double> g(n);
  const double a = std::log(-x_lo);
  const double b = std::log(-x_hi);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = -std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  g.front() = x_lo;
  g.back() = x_hi;
  return g;
}

}  // namespace logweight
