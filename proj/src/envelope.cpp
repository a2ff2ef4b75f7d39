#include "logweight/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/tools/minima.hpp>
#include <nlohmann/json.hpp>

#include "logweight/errors.hpp"
#include "logweight/numeric.hpp"
#include "logweight/parallel.hpp"

namespace logweight {

namespace {

double log_abs_at(const ComplexFunction& f, double r, double theta) {
  const std::complex<double> v = f(std::polar(r, theta));
  const double a = std::abs(v);
  if (std::isnan(a)) fail(ErrorKind::numeric, "function evaluation returned NaN");
  return a == 0.0 ? neg_inf : std::log(a);
}

/// Grid maximum, then each grid peak within one unit (log scale) of the
/// best is polished by Brent's method on its two neighbouring cells.
double refined_max(const ComplexFunction& f, double r, int n, bool refine) {
  const double step = 2.0 * std::numbers::pi / n;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] = log_abs_at(f, r, j * step);
  double best = *std::max_element(v.begin(), v.end());
  if (!refine || best == neg_inf) return best;
  const double grid_best = best;
  for (int j = 0; j < n; ++j) {
    const double c = v[static_cast<std::size_t>(j)];
    const double left = v[static_cast<std::size_t>((j + n - 1) % n)];
    const double right = v[static_cast<std::size_t>((j + 1) % n)];
    if (c < left || c < right || c < grid_best - 1.0) continue;
    auto neg = [&](double th) { return -log_abs_at(f, r, th); };
    const auto [th, val] = boost::math::tools::brent_find_minima(neg, (j - 1) * step, (j + 1) * step, 52);
    (void)th;
    best = std::max(best, -val);
  }
  return best;
}

}  // namespace

double max_modulus(const ComplexFunction& f, double r, int theta_count) {
  if (theta_count < 16) fail(ErrorKind::precondition, "max_modulus needs theta_count >= 16");
  if (!(r > 0.0 && r < 1.0)) fail(ErrorKind::domain, "max_modulus requires r in (0,1)");
  return refined_max(f, r, theta_count, false);
}

AdaptiveMaxModulus max_modulus_adaptive(const ComplexFunction& f, double r, const MaxModulusSettings& settings) {
  if (settings.initial_angles < 16) fail(ErrorKind::precondition, "max_modulus needs theta_count >= 16");
  if (!(r > 0.0 && r < 1.0)) fail(ErrorKind::domain, "max_modulus requires r in (0,1)");
  AdaptiveMaxModulus out;
  int n = settings.initial_angles;
  double prev = refined_max(f, r, n, settings.refine_peaks);
  while (n < settings.max_angles) {
    n *= 2;
    const double cur = refined_max(f, r, n, settings.refine_peaks);
    const bool settled = std::abs(cur - prev) < settings.tolerance || (cur == neg_inf && prev == neg_inf);
    prev = std::max(prev, cur);
    if (settled) {
      out.converged = true;
      break;
    }
  }
  out.log_M = prev;
  out.theta_count = n;
  return out;
}

MaxModulusProfile max_modulus_profile(const ComplexFunction& f, std::span<const double> r_grid,
                                      const MaxModulusSettings& settings) {
  MaxModulusProfile p;
  p.r_grid.assign(r_grid.begin(), r_grid.end());
  p.values.resize(r_grid.size());
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (i > 0 && !(r_grid[i] > r_grid[i - 1])) fail(ErrorKind::input, "r grid must be strictly increasing");
    const auto m = max_modulus_adaptive(f, r_grid[i], settings);
    p.values[i] = m.log_M;
    p.theta_count = std::max(p.theta_count, m.theta_count);
  }
  return p;
}

std::vector<double> log_spaced_radii(double r_lo, double r_hi, std::size_t n) {
  if (!(r_lo > 0.0 && r_lo < r_hi && r_hi < 1.0) || n < 2) fail(ErrorKind::input, "need 0 < r_lo < r_hi < 1, n >= 2");
  std::vector<double> r(n);
  const double a = std::log(r_lo), b = std::log(r_hi);
  for (std::size_t i = 0; i < n; ++i) r[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return r;
}

HadamardReport hadamard_check(std::span<const ComplexFunction> fs, std::span<const double> r_grid,
                              const MaxModulusSettings& settings, double tolerance) {
  if (fs.empty()) fail(ErrorKind::input, "no functions supplied");
  if (r_grid.size() < 3) fail(ErrorKind::input, "r grid needs at least 3 points");
  for (std::size_t m = 0; m < fs.size(); ++m) {
    if (std::abs(fs[m]({0.0, 0.0})) == 0.0) {
      fail(ErrorKind::precondition, "function " + std::to_string(m) + " vanishes at the origin");
    }
  }
  HadamardReport rep;
  rep.tolerance = tolerance;
  const std::size_t n = r_grid.size();
  rep.log_r.resize(n);
  rep.log_sum.assign(n, neg_inf);
  std::vector<std::vector<AdaptiveMaxModulus>> per(n, std::vector<AdaptiveMaxModulus>(fs.size()));
  parallel_for(n * fs.size(), [&](std::size_t idx) {
    const std::size_t i = idx / fs.size();
    const std::size_t m = idx % fs.size();
    per[i][m] = max_modulus_adaptive(fs[m], r_grid[i], settings);
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && !(r_grid[i] > r_grid[i - 1])) fail(ErrorKind::input, "r grid must be strictly increasing");
    rep.log_r[i] = std::log(r_grid[i]);
    for (const auto& m : per[i]) {
      rep.log_sum[i] = log_add_exp(rep.log_sum[i], m.log_M);
      rep.max_angles_used = std::max(rep.max_angles_used, m.theta_count);
      rep.all_converged = rep.all_converged && m.converged;
    }
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double du0 = rep.log_r[i] - rep.log_r[i - 1];
    const double du1 = rep.log_r[i + 1] - rep.log_r[i];
    const double s0 = (rep.log_sum[i] - rep.log_sum[i - 1]) / du0;
    const double s1 = (rep.log_sum[i + 1] - rep.log_sum[i]) / du1;
    // equals y_{i+1} - 2 y_i + y_{i-1} on a uniform grid
    const double d2 = (s1 - s0) * 0.5 * (du0 + du1);
    if (d2 < rep.min_second_difference) {
      rep.min_second_difference = d2;
      rep.witness_r = r_grid[i];
    }
  }
  rep.passed = rep.min_second_difference >= -tolerance;
  return rep;
}

std::complex<double> Polynomial::operator()(std::complex<double> z) const {
  std::complex<double> acc{0.0, 0.0};
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
  return acc;
}

std::vector<Polynomial> random_polynomials(std::size_t count, int max_degree, std::uint64_t seed) {
  if (max_degree < 1) fail(ErrorKind::input, "max_degree must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> degree(1, max_degree);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Polynomial> out(count);
  for (auto& p : out) {
    const int d = degree(rng);
    p.coeffs.resize(static_cast<std::size_t>(d) + 1);
    p.coeffs[0] = 1.0;
    for (int k = 1; k <= d; ++k) {
      const double re = unit(rng);
      const double im = unit(rng);
      p.coeffs[static_cast<std::size_t>(k)] = {re, im};
    }
  }
  return out;
}

// ---- envelope ------------------------------------------------------------------

EnvelopeResult lower_convex_envelope(std::span<const double> xs, std::span<const double> ys, double gap_bound) {
  if (xs.size() != ys.size()) fail(ErrorKind::input, "x and y sample counts differ");
  if (xs.size() < 3) fail(ErrorKind::input, "envelope needs at least 3 points");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) fail(ErrorKind::input, "envelope grid must be strictly increasing");
  }
  for (double y : ys) {
    if (!std::isfinite(y)) fail(ErrorKind::numeric, "non-finite sample in envelope input");
  }

  // indices of hull vertices
  std::vector<std::size_t> hull;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    return (xs[a] - xs[o]) * (ys[b] - ys[o]) - (ys[a] - ys[o]) * (xs[b] - xs[o]);
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) < 0.0) hull.pop_back();
    hull.push_back(i);
  }

  EnvelopeResult res;
  res.gap_bound = gap_bound;
  res.xs.assign(xs.begin(), xs.end());
  res.hull_values.resize(xs.size());
  for (std::size_t i : hull) res.hull_knots.push_back({xs[i], ys[i]});
  std::size_t seg = 0;
  res.gap = 0.0;
  res.gap_x = xs.front();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    while (seg + 1 < hull.size() && hull[seg + 1] < i) ++seg;
    const std::size_t a = hull[seg];
    double hv;
    if (a == i) {
      hv = ys[i];
    } else {
      const std::size_t b = hull[seg + 1];
      hv = b == i ? ys[i] : ys[a] + (ys[b] - ys[a]) * (xs[i] - xs[a]) / (xs[b] - xs[a]);
    }
    res.hull_values[i] = hv;
    if (ys[i] - hv > res.gap) {
      res.gap = ys[i] - hv;
      res.gap_x = xs[i];
    }
  }
  res.equivalent = res.gap <= gap_bound;
  return res;
}

EnvelopeResult log_convex_envelope(const WeightFunction& w, std::span<const double> x_grid, double gap_bound) {
  if (x_grid.size() < 3) fail(ErrorKind::input, "envelope needs at least 3 grid points");
  std::vector<double> ys(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    if (i > 0 && !(x_grid[i] > x_grid[i - 1])) fail(ErrorKind::input, "envelope grid must be strictly increasing");
    ys[i] = big_F_eval(w, x_grid[i], 0);
  }
  return lower_convex_envelope(x_grid, ys, gap_bound);
}

std::vector<double> envelope_grid(const WeightFunction& w, double x_lo, double x_hi, std::size_t n) {
  std::vector<double> g = geometric_x_grid(x_lo, x_hi, n);
  for (double x : w.feature_points(x_lo, x_hi)) g.push_back(x);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

WeightFunction regularized_weight(const EnvelopeResult& env, const WeightFunction& tail) {
  std::vector<std::pair<double, double>> knots;
  for (const auto& k : env.hull_knots) knots.emplace_back(k.x, k.y);
  return WeightFunction::hull_regularized(std::move(knots), tail);
}

EquivalenceConstants equivalence_constants(std::span<const double> log_u, std::span<const double> log_v,
                                           double log_spread_cap) {
  if (log_u.size() != log_v.size()) fail(ErrorKind::input, "u and v are sampled on different grids");
  if (log_u.empty()) fail(ErrorKind::input, "no samples");
  EquivalenceConstants c;
  c.log_C1 = INFINITY;
  c.log_C2 = -INFINITY;
  for (std::size_t i = 0; i < log_u.size(); ++i) {
    if (!(log_u[i] > neg_inf) || !(log_v[i] > neg_inf) || std::isnan(log_u[i]) || std::isnan(log_v[i])) {
      fail(ErrorKind::domain, "non-positive sample at index " + std::to_string(i));
    }
    const double d = log_v[i] - log_u[i];
    c.log_C1 = std::min(c.log_C1, d);
    c.log_C2 = std::max(c.log_C2, d);
  }
  c.C1 = std::exp(c.log_C1);
  c.C2 = std::exp(c.log_C2);
  c.unbounded = c.log_C2 - c.log_C1 > log_spread_cap;
  return c;
}

nlohmann::json hadamard_report_to_json(const HadamardReport& r) {
  return {
      {"passed", r.passed},
      {"tolerance", r.tolerance},
      {"min_second_difference", r.min_second_difference},
      {"witness_r", r.witness_r},
      {"witness_function", r.witness_function},
      {"max_angles_used", r.max_angles_used},
      {"all_converged", r.all_converged},
      {"points", r.log_r.size()},
  };
}

nlohmann::json envelope_result_to_json(const EnvelopeResult& r) {
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& k : r.hull_knots) knots.push_back({k.x, k.y});
  return {
      {"equivalent", r.equivalent},
      {"gap", r.gap},
      {"gap_x", r.gap_x},
      {"gap_bound", r.gap_bound},
      {"samples", r.xs.size()},
      {"hull_knots", knots},
  };
}

}  // namespace logweight
