#include "logweight/ball.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <boost/random/sobol.hpp>
#include <nlohmann/json.hpp>

#include "logweight/errors.hpp"
#include "logweight/numeric.hpp"
#include "logweight/parallel.hpp"

namespace logweight {

std::complex<double> LogPolar::value() const {
  if (log_abs == neg_inf) return {0.0, 0.0};
  return unit * std::exp(log_abs);
}

namespace {

/// z^n as n log|z| and the unit power of arg z: the same quantities the disk
/// series uses, so d = 1 reproduces it bit for bit.
LogPolar power_log_polar(std::complex<double> z, std::int64_t n) {
  if (n == 0) return {0.0, {1.0, 0.0}};
  const double r = std::abs(z);
  if (r == 0.0) return {};
  return {static_cast<double>(n) * std::log(r), unit_power(std::arg(z), n)};
}

void require_q(int q, int Q) {
  if (q < 1 || q > Q) fail(ErrorKind::input, "polynomial index q out of range");
}

double euclidean_norm(std::span<const std::complex<double>> z) {
  if (z.empty()) fail(ErrorKind::input, "empty point");
  double acc = std::abs(z[0]);
  for (std::size_t i = 1; i < z.size(); ++i) acc = std::hypot(acc, std::abs(z[i]));
  return acc;
}

}  // namespace

std::complex<double> PolynomialFamily::value(int q, std::int64_t n, std::span<const double> interleaved) const {
  if (interleaved.size() != 2 * static_cast<std::size_t>(d)) fail(ErrorKind::input, "point has the wrong dimension");
  Point z(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = {interleaved[2 * i], interleaved[2 * i + 1]};
  return eval(q, n, z).value();
}

PolynomialFamily PolynomialFamily::monomial() {
  PolynomialFamily f;
  f.d = 1;
  f.Q = 1;
  f.delta_claimed = 1.0;
  f.kind = "monomial";
  f.eval = [](int q, std::int64_t n, std::span<const std::complex<double>> z) {
    require_q(q, 1);
    return power_log_polar(z[0], n);
  };
  return f;
}

PolynomialFamily PolynomialFamily::coordinate(int d, double delta_claimed) {
  if (d < 1) fail(ErrorKind::input, "dimension must be positive");
  PolynomialFamily f;
  f.d = d;
  f.Q = d;
  f.delta_claimed = delta_claimed;
  f.kind = "coordinate";
  f.eval = [d](int q, std::int64_t n, std::span<const std::complex<double>> z) {
    require_q(q, d);
    return power_log_polar(z[static_cast<std::size_t>(q - 1)], n);
  };
  return f;
}

PolynomialFamily PolynomialFamily::scaled_monomial(double scale) {
  if (!(scale > 0.0)) fail(ErrorKind::input, "scale must be positive");
  PolynomialFamily f;
  f.d = 1;
  f.Q = 1;
  f.delta_claimed = 1.0;
  f.kind = "scaled_monomial";
  f.scale_ = scale;
  const double log_scale = std::log(scale);
  f.eval = [log_scale](int q, std::int64_t n, std::span<const std::complex<double>> z) {
    require_q(q, 1);
    LogPolar p = power_log_polar(z[0], n);
    if (p.log_abs != neg_inf) p.log_abs += log_scale;
    return p;
  };
  return f;
}

PolynomialFamily PolynomialFamily::from_manifest(const nlohmann::json& m) {
  if (!m.is_object() || !m.contains("kind")) fail(ErrorKind::input, "family manifest needs a \"kind\"");
  const std::string kind = m.at("kind").get<std::string>();
  const int d = m.value("d", kind == "coordinate" ? 2 : 1);
  const int Q = m.value("Q", kind == "coordinate" ? d : 1);
  PolynomialFamily f;
  if (kind == "monomial") {
    f = monomial();
  } else if (kind == "coordinate") {
    f = coordinate(d);
  } else if (kind == "scaled_monomial") {
    f = scaled_monomial(m.value("scale", 2.0));
  } else {
    fail(ErrorKind::input, "unknown polynomial family kind '" + kind + "'");
  }
  if (f.d != d || f.Q != Q) fail(ErrorKind::input, "manifest d/Q do not match family '" + kind + "'");
  f.delta_claimed = m.value("delta", f.delta_claimed);
  if (!(f.delta_claimed > 0.0 && f.delta_claimed <= 1.0)) fail(ErrorKind::input, "delta must lie in (0,1]");
  return f;
}

nlohmann::json PolynomialFamily::manifest() const {
  nlohmann::json m = {{"d", d}, {"Q", Q}, {"delta", delta_claimed}, {"kind", kind}};
  if (kind == "scaled_monomial") m["scale"] = scale_;
  return m;
}

// ---- sampling --------------------------------------------------------------------

std::vector<Point> sphere_points(int d, int count, std::uint64_t seed) {
  if (d < 1) fail(ErrorKind::input, "dimension must be positive");
  if (count < 1) fail(ErrorKind::input, "need at least one sphere point");
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(count));
  if (d == 1) {
    for (int j = 0; j < count; ++j) pts.push_back({std::polar(1.0, Turn{j, count}.radians())});
    return pts;
  }

  pts.emplace_back(static_cast<std::size_t>(d), std::complex<double>(1.0 / std::sqrt(static_cast<double>(d)), 0.0));
  const std::size_t dims = 2 * static_cast<std::size_t>(d) - 1;
  boost::random::sobol qrng(dims);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> shift(dims);
  for (auto& s : shift) s = unit(rng);
  const double span = static_cast<double>(qrng.max() - qrng.min()) + 1.0;

  std::vector<double> u(dims), cuts(static_cast<std::size_t>(d) + 1);
  while (pts.size() < static_cast<std::size_t>(count)) {
    for (std::size_t k = 0; k < dims; ++k) {
      const double v = static_cast<double>(qrng() - qrng.min()) / span + shift[k];
      u[k] = v - std::floor(v);
    }
    // d-1 cuts of [0,1] give the squared moduli, the rest give phases
    cuts.front() = 0.0;
    cuts.back() = 1.0;
    std::copy(u.begin(), u.begin() + (d - 1), cuts.begin() + 1);
    std::sort(cuts.begin(), cuts.end());
    Point z(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double modulus = std::sqrt(cuts[i + 1] - cuts[i]);
      z[i] = std::polar(modulus, 2.0 * std::numbers::pi * u[static_cast<std::size_t>(d) - 1 + i]);
    }
    pts.push_back(std::move(z));
  }
  return pts;
}

// ---- family verification ------------------------------------------------------

namespace {

LogPolar call_provider(const PolynomialFamily& fam, int q, std::int64_t n, std::span<const std::complex<double>> z) {
  try {
    const LogPolar v = fam.eval(q, n, z);
    if (std::isnan(v.log_abs) || v.log_abs == pos_inf) fail(ErrorKind::numeric, "non-finite value");
    return v;
  } catch (const std::exception& e) {
    fail(ErrorKind::numeric, "polynomial provider failed at degree " + std::to_string(n) + ", q = " +
                                 std::to_string(q) + ": " + e.what());
  }
}

}  // namespace

const DegreeReport* FamilyReport::first_failure() const {
  for (const auto& d : degrees) {
    if (!d.passed) return &d;
  }
  return nullptr;
}

FamilyReport verify_family(const PolynomialFamily& fam, std::span<const std::int64_t> degrees, int sphere_samples,
                           std::uint64_t seed) {
  if (sphere_samples < 64) fail(ErrorKind::precondition, "verify_family needs at least 64 sphere samples");
  if (!fam.eval) fail(ErrorKind::input, "family has no evaluator");
  const auto pts = sphere_points(fam.d, sphere_samples, seed);

  FamilyReport rep;
  rep.sphere_samples = sphere_samples;
  rep.degrees.resize(degrees.size());
  parallel_for(degrees.size(), [&](std::size_t idx) {
    const std::int64_t n = degrees[idx];
    if (n < 0) fail(ErrorKind::input, "negative degree");
    DegreeReport dr;
    dr.n = n;
    double log_sup = neg_inf;
    double log_min_max = pos_inf;
    std::vector<std::vector<LogPolar>> at(pts.size());
    for (std::size_t p = 0; p < pts.size(); ++p) {
      double log_max = neg_inf;
      for (int q = 1; q <= fam.Q; ++q) {
        at[p].push_back(call_provider(fam, q, n, pts[p]));
        log_max = std::max(log_max, at[p].back().log_abs);
      }
      log_sup = std::max(log_sup, log_max);
      log_min_max = std::min(log_min_max, log_max);
    }
    dr.sup = std::exp(log_sup);
    dr.min_of_max = std::exp(log_min_max);

    // W(lambda z) against lambda^n W(z), compared in log-polar form
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(n + 1)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double shrink = 1.0 / static_cast<double>(std::max<std::int64_t>(n, 1));
    for (int rep_l = 0; rep_l < 4; ++rep_l) {
      const double log_mod = -unit(rng) * shrink;
      const double arg = 2.0 * std::numbers::pi * unit(rng);
      const std::complex<double> lambda = std::polar(std::exp(log_mod), arg);
      const std::complex<double> lambda_unit = unit_power(arg, n);
      for (std::size_t p = 0; p < pts.size(); ++p) {
        Point scaled = pts[p];
        for (auto& c : scaled) c *= lambda;
        for (int q = 1; q <= fam.Q; ++q) {
          const LogPolar base = at[p][static_cast<std::size_t>(q - 1)];
          const LogPolar got = call_provider(fam, q, n, scaled);
          double res;
          if (base.log_abs == neg_inf || got.log_abs == neg_inf) {
            res = base.log_abs == got.log_abs ? 0.0 : pos_inf;
          } else {
            const double log_err = std::abs(got.log_abs - (static_cast<double>(n) * log_mod + base.log_abs));
            const double phase_err = std::abs(got.unit - lambda_unit * base.unit);
            // z -> z^n amplifies rounding in lambda*z by n; report the backward error
            res = std::max(log_err, phase_err) / std::max(1.0, static_cast<double>(n));
          }
          dr.homogeneity_residual = std::max(dr.homogeneity_residual, res);
        }
      }
    }

    dr.sup_ok = dr.sup <= 1.0 + rep.sup_tol;
    dr.lower_ok = dr.min_of_max >= fam.delta_claimed - rep.delta_tol;
    dr.homogeneity_ok = dr.homogeneity_residual <= rep.homogeneity_tol;
    dr.passed = dr.sup_ok && dr.lower_ok && dr.homogeneity_ok;
    rep.degrees[idx] = dr;
  });
  rep.passed = std::all_of(rep.degrees.begin(), rep.degrees.end(), [](const DegreeReport& d) { return d.passed; });
  return rep;
}

// ---- the function system --------------------------------------------------------

BallFunctionSystem build_ball_functions(const ConstructionState& state, const PolynomialFamily& fam,
                                        int sphere_samples, std::uint64_t seed) {
  const double need = h_for_delta(fam.delta_claimed);
  if (state.h() < need) {
    fail(ErrorKind::precondition, "h = " + std::to_string(state.h()) + " is below h_for_delta(" +
                                      std::to_string(fam.delta_claimed) + ") = " + std::to_string(need));
  }
  std::set<std::int64_t> distinct(state.es.begin(), state.es.end());
  const std::vector<std::int64_t> degrees(distinct.begin(), distinct.end());
  const FamilyReport fr = verify_family(fam, degrees, sphere_samples, seed);
  if (const DegreeReport* bad = fr.first_failure()) {
    fail(ErrorKind::precondition, "polynomial family fails its conditions at degree " + std::to_string(bad->n));
  }

  BallFunctionSystem sys;
  sys.family = fam;
  sys.pair = split_parity(state);
  for (int s = 0; s < 2; ++s) {
    for (int q = 1; q <= fam.Q; ++q) {
      sys.functions.push_back({q, s, false, s == 0 ? sys.pair.g1 : sys.pair.g2});
    }
  }
  sys.functions.push_back({0, 0, true, LacunarySeries({{0.0, 0}})});
  return sys;
}

ScaledComplex eval_ball_function(const BallFunctionSystem& sys, std::size_t m, std::span<const std::complex<double>> z) {
  if (m >= sys.functions.size()) fail(ErrorKind::input, "function index out of range");
  if (z.size() != static_cast<std::size_t>(sys.family.d)) fail(ErrorKind::input, "point has the wrong dimension");
  const BallFunction& f = sys.functions[m];
  if (f.constant) return ScaledComplex::from_log_polar(0.0, {1.0, 0.0});
  const double t = euclidean_norm(z);
  if (!(t < 1.0)) fail(ErrorKind::domain, "ball evaluation requires |z| < 1");
  if (t == 0.0) return ScaledComplex::zero();  // every exponent is positive
  const RadialTerms terms = radial_terms(f.series, t);
  const double log_t = std::log(t);
  return sum_with_units(terms, [&](std::int64_t e) -> std::complex<double> {
    const LogPolar w = call_provider(sys.family, f.q, e, z);
    if (w.log_abs == neg_inf) return {0.0, 0.0};
    const double rel = w.log_abs - static_cast<double>(e) * log_t;
    return rel == 0.0 ? w.unit : std::exp(rel) * w.unit;
  });
}

double ball_modulus_sum(const BallFunctionSystem& sys, std::span<const std::complex<double>> z, bool with_constant) {
  double acc = neg_inf;
  for (std::size_t m = 0; m < sys.functions.size(); ++m) {
    if (sys.functions[m].constant && !with_constant) continue;
    acc = log_add_exp(acc, eval_ball_function(sys, m, z).log_abs());
  }
  return acc;
}

BallBoundReport ball_lower_bound_check(const BallFunctionSystem& sys, const WeightFunction& w,
                                       std::span<const double> t_grid, int sphere_samples, std::uint64_t seed,
                                       int inner_radii) {
  if (sphere_samples < 64) fail(ErrorKind::precondition, "need at least 64 sphere samples");
  for (double t : t_grid) {
    if (!(t > sys.pair.t0) || t > sys.pair.t_verified) fail(ErrorKind::input, "t outside (t0, t_verified]");
  }
  const auto pts = sphere_points(sys.family.d, sphere_samples, seed);
  BallBoundReport rep;
  rep.log_lower_constant = std::log(2.0 * sys.family.delta_claimed / 5.0) - sys.pair.h;

  struct RingResult {
    double worst = INFINITY;
    std::size_t point = 0;
    double log_C = -INFINITY;
  };
  std::vector<double> radii = inner_disk_radii(sys.pair.t0, inner_radii);
  const std::size_t inner_count = radii.size();
  radii.insert(radii.end(), t_grid.begin(), t_grid.end());
  std::vector<RingResult> rings(radii.size());
  parallel_for(radii.size(), [&](std::size_t i) {
    const double t = radii[i];
    const double log_om = log_omega_eval(w, t);
    RingResult rr;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      Point z = pts[p];
      for (auto& c : z) c *= t;
      double nonconst = neg_inf;
      for (std::size_t m = 0; m + 1 < sys.functions.size(); ++m) {
        nonconst = log_add_exp(nonconst, eval_ball_function(sys, m, z).log_abs());
      }
      rr.log_C = std::max(rr.log_C, log_om - log_add_exp(nonconst, 0.0));
      if (i >= inner_count) {
        const double margin = nonconst - (rep.log_lower_constant + log_om);
        if (margin < rr.worst) {
          rr.worst = margin;
          rr.point = p;
        }
      }
    }
    rings[i] = rr;
  });
  for (std::size_t i = 0; i < rings.size(); ++i) {
    if (rings[i].log_C > rep.log_C) {
      rep.log_C = rings[i].log_C;
      rep.C_witness_r = radii[i];
    }
    if (i >= inner_count && rings[i].worst < rep.worst_margin) {
      rep.worst_margin = rings[i].worst;
      rep.witness_t = radii[i];
      rep.witness_point = rings[i].point;
    }
  }
  rep.C = std::exp(rep.log_C);
  rep.points = t_grid.size() * pts.size();
  rep.passed = rep.worst_margin > -rep.slack;
  return rep;
}

// ---- JSON --------------------------------------------------------------------------

nlohmann::json family_report_to_json(const FamilyReport& r) {
  nlohmann::json degrees = nlohmann::json::array();
  for (const auto& d : r.degrees) {
    degrees.push_back({{"n", d.n},
                       {"sup", d.sup},
                       {"min_of_max", d.min_of_max},
                       {"homogeneity_residual", d.homogeneity_residual},
                       {"sup_ok", d.sup_ok},
                       {"lower_ok", d.lower_ok},
                       {"homogeneity_ok", d.homogeneity_ok},
                       {"passed", d.passed}});
  }
  return {{"passed", r.passed}, {"sphere_samples", r.sphere_samples}, {"degrees", degrees}};
}

nlohmann::json ball_report_to_json(const BallBoundReport& r) {
  return {
      {"passed", r.passed},
      {"slack", r.slack},
      {"log_lower_constant", r.log_lower_constant},
      {"worst_margin", r.worst_margin},
      {"witness", {{"t", r.witness_t}, {"point", r.witness_point}}},
      {"points", r.points},
      {"log_C", r.log_C},
      {"C", r.C},
      {"C_witness_r", r.C_witness_r},
  };
}

}  // namespace logweight
