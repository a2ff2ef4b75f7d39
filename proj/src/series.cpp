#include "logweight/series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "logweight/errors.hpp"
#include "logweight/parallel.hpp"

namespace logweight {

// ---- LacunarySeries ------------------------------------------------------

LacunarySeries::LacunarySeries(std::vector<SeriesTerm> terms) : terms_(std::move(terms)) {
  std::sort(terms_.begin(), terms_.end(),
            [](const SeriesTerm& a, const SeriesTerm& b) { return a.exponent < b.exponent; });
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].exponent < 0) fail(ErrorKind::input, "series exponents must be non-negative");
    if (i > 0 && terms_[i].exponent == terms_[i - 1].exponent) {
      fail(ErrorKind::input, "series exponents must be distinct");
    }
    if (std::isnan(terms_[i].log_coeff)) fail(ErrorKind::input, "series coefficient is NaN");
  }
}

std::vector<std::int64_t> LacunarySeries::exponents() const {
  std::vector<std::int64_t> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(t.exponent);
  return out;
}

LacunarySeries LacunarySeries::shifted(std::int64_t by) const {
  std::vector<SeriesTerm> out = terms_;
  for (auto& t : out) t.exponent -= by;
  return LacunarySeries(std::move(out));
}

LacunarySeries LacunarySeries::with_log_coeff_offset(std::size_t index, double delta_log) const {
  std::vector<SeriesTerm> out = terms_;
  out.at(index).log_coeff += delta_log;
  return LacunarySeries(std::move(out));
}

// ---- ScaledComplex --------------------------------------------------------

ScaledComplex ScaledComplex::from_log_polar(double log_abs, std::complex<double> unit) {
  if (log_abs == neg_inf) return zero();
  constexpr double ln2 = std::numbers::ln2;
  double n = std::floor(log_abs / ln2);
  double rest = log_abs - n * ln2;
  double mag = std::exp(rest);
  if (mag >= 2.0) {
    n += 1.0;
    mag = std::exp(log_abs - n * ln2);
  } else if (mag < 1.0) {
    n -= 1.0;
    mag = std::exp(log_abs - n * ln2);
  }
  return {unit * mag, n * ln2};
}

double ScaledComplex::log_abs() const {
  if (is_zero()) return neg_inf;
  return std::log(std::abs(mantissa)) + log_scale;
}

std::complex<double> ScaledComplex::value() const {
  if (is_zero()) return {0.0, 0.0};
  return mantissa * std::exp(log_scale);
}

// ---- evaluation -----------------------------------------------------------

RadialTerms radial_terms(const LacunarySeries& s, double r) {
  if (!(r >= 0.0 && r < 1.0)) fail(ErrorKind::domain, "series evaluation requires |z| < 1");
  RadialTerms out;
  if (s.empty()) return out;
  if (r == 0.0) {
    out.at_origin = true;
    const auto& first = s.terms().front();
    if (first.exponent == 0) {
      out.log_mag.push_back(first.log_coeff);
      out.exponent.push_back(0);
      out.log_max = first.log_coeff;
    }
    return out;
  }
  const double log_r = std::log(r);
  double top = neg_inf;
  for (const auto& t : s.terms()) top = std::max(top, t.log_coeff + static_cast<double>(t.exponent) * log_r);
  out.log_max = top;
  for (const auto& t : s.terms()) {
    const double L = t.log_coeff + static_cast<double>(t.exponent) * log_r;
    if (L - top >= kDropThreshold) {
      out.log_mag.push_back(L);
      out.exponent.push_back(t.exponent);
    }
  }
  return out;
}

namespace {

template <typename Phase>
ScaledComplex sum_terms(const RadialTerms& terms, Phase&& phase) {
  if (terms.log_mag.empty()) return ScaledComplex::zero();
  ComplexCompensatedSum acc;
  for (std::size_t i = 0; i < terms.log_mag.size(); ++i) {
    acc.add(std::exp(terms.log_mag[i] - terms.log_max) * phase(terms.exponent[i]));
  }
  const std::complex<double> s = acc.value();
  const double mag = std::abs(s);
  if (mag == 0.0) return ScaledComplex::zero();
  return ScaledComplex::from_log_polar(terms.log_max + std::log(mag), s / mag);
}

}  // namespace

ScaledComplex sum_at_angle(const RadialTerms& terms, Turn angle) {
  return sum_terms(terms, [&](std::int64_t e) { return unit_power(angle, e); });
}

ScaledComplex sum_with_units(const RadialTerms& terms, const std::function<std::complex<double>(std::int64_t)>& unit) {
  return sum_terms(terms, unit);
}

ScaledComplex eval_series(const LacunarySeries& s, std::complex<double> z) {
  const double r = std::abs(z);
  const RadialTerms terms = radial_terms(s, r);
  const double arg = r == 0.0 ? 0.0 : std::arg(z);
  return sum_terms(terms, [&](std::int64_t e) { return unit_power(arg, e); });
}

ScaledComplex eval_series(const LacunarySeries& s, double r, Turn angle) {
  return sum_at_angle(radial_terms(s, r), angle);
}

double modulus_sum(const SeriesPair& pair, std::complex<double> z) {
  return log_add_exp(eval_series(pair.g1, z).log_abs(), eval_series(pair.g2, z).log_abs());
}

double modulus_sum(const SeriesPair& pair, double r, Turn angle) {
  return log_add_exp(eval_series(pair.g1, r, angle).log_abs(), eval_series(pair.g2, r, angle).log_abs());
}

SeriesPair split_parity(const ConstructionState& state) {
  if (state.lines.empty()) fail(ErrorKind::input, "state has no lines");
  std::vector<SeriesTerm> odd, even;
  for (std::size_t i = 0; i < state.lines.size(); ++i) {
    const SeriesTerm term{state.lines[i].log_a, state.es[i]};
    // i is 0-based, k = i + 1
    (i % 2 == 0 ? odd : even).push_back(term);
  }
  SeriesPair pair;
  pair.g1 = LacunarySeries(std::move(odd));
  pair.g2 = LacunarySeries(std::move(even));
  pair.t0 = state.t0();
  pair.h = state.h();
  pair.t_verified = state.t_verified();
  return pair;
}

// ---- sandwich ----------------------------------------------------------------

std::vector<double> radius_grid(double t_lo, double t_hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = t_lo + (t_hi - t_lo) * static_cast<double>(i + 1) / static_cast<double>(n);
  }
  if (n > 0) g.back() = t_hi;
  return g;
}

namespace {

struct RowExtremes {
  double lower = INFINITY, upper = INFINITY;
  int lower_j = 0, upper_j = 0;
};

}  // namespace

SandwichReport sandwich_check(const SeriesPair& pair, const WeightFunction& w, std::span<const double> t_grid,
                              int theta_count) {
  if (theta_count < 1) fail(ErrorKind::input, "theta_count must be positive");
  for (double t : t_grid) {
    if (!(t > pair.t0) || t > pair.t_verified) {
      fail(ErrorKind::input, "sandwich radius " + std::to_string(t) + " outside the verified range (" +
                                 std::to_string(pair.t0) + ", " + std::to_string(pair.t_verified) + "]");
    }
  }
  SandwichReport report;
  report.lower_constant = std::log(2.0 / 5.0) - pair.h;
  report.upper_constant = std::log(4.0);

  std::vector<RowExtremes> rows(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    const double t = t_grid[i];
    const double lw = log_omega_eval(w, t);
    const RadialTerms r1 = radial_terms(pair.g1, t);
    const RadialTerms r2 = radial_terms(pair.g2, t);
    RowExtremes& row = rows[i];
    for (int j = 0; j < theta_count; ++j) {
      const Turn angle{j, theta_count};
      const double ms = log_add_exp(sum_at_angle(r1, angle).log_abs(), sum_at_angle(r2, angle).log_abs());
      const double lower = ms - (report.lower_constant + lw);
      const double upper = (report.upper_constant + lw) - ms;
      if (lower < row.lower) {
        row.lower = lower;
        row.lower_j = j;
      }
      if (upper < row.upper) {
        row.upper = upper;
        row.upper_j = j;
      }
    }
  });

  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].lower < report.worst_lower_margin) {
      report.worst_lower_margin = rows[i].lower;
      report.lower_witness_t = t_grid[i];
      report.lower_witness_theta = Turn{rows[i].lower_j, theta_count}.radians();
    }
    if (rows[i].upper < report.worst_upper_margin) {
      report.worst_upper_margin = rows[i].upper;
      report.upper_witness_t = t_grid[i];
      report.upper_witness_theta = Turn{rows[i].upper_j, theta_count}.radians();
    }
  }
  report.points = t_grid.size() * static_cast<std::size_t>(theta_count);
  report.passed = report.worst_lower_margin > -report.slack && report.worst_upper_margin > -report.slack;
  return report;
}

// ---- zero adjustment --------------------------------------------------------

std::vector<double> inner_disk_radii(double t0, int n) {
  if (n < 2) fail(ErrorKind::input, "inner disk grid needs at least 2 radii");
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    r[static_cast<std::size_t>(i)] = t0 * std::sin(0.5 * std::numbers::pi * i / (n - 1));
  }
  r.front() = 0.0;
  r.back() = t0;
  return r;
}

double adjusted_modulus_sum(const AdjustedPair& adj, double r, Turn angle) {
  return log_add_exp(eval_series(adj.g1_shifted, r, angle + adj.rotation).log_abs(),
                     eval_series(adj.f2, r, angle).log_abs());
}

namespace {

struct RadialPair {
  double r;
  double log_omega;
  RadialTerms f1;
  RadialTerms f2;
  int angles;
};

struct Extreme {
  double value;
  std::size_t ring;
  int j;
};

}  // namespace

AdjustedPair zero_adjust(const SeriesPair& pair, const WeightFunction& w, int theta_count, DiskGridSpec inner,
                         std::span<const double> outer_t_grid, int outer_angles) {
  if (pair.g1.empty()) fail(ErrorKind::precondition, "zero adjustment needs a non-empty G1");
  if (theta_count < 1 || inner.angles < 1 || outer_angles < 1) fail(ErrorKind::input, "angle counts must be positive");

  AdjustedPair adj;
  adj.e1 = pair.g1.min_exponent();
  adj.g1_shifted = pair.g1.shifted(adj.e1);
  adj.f2 = pair.g2;
  // G1~(0) is the first coefficient, never zero.
  if (adj.g1_shifted.terms().front().exponent != 0) fail(ErrorKind::numeric, "shifted G1 has no constant term");

  std::vector<RadialPair> rings;
  for (double r : inner_disk_radii(pair.t0, inner.radii)) {
    rings.push_back({r, log_omega_eval(w, r), radial_terms(adj.g1_shifted, r), radial_terms(adj.f2, r), inner.angles});
  }
  const std::size_t inner_count = rings.size();
  for (double t : outer_t_grid) {
    if (!(t > pair.t0) || t > pair.t_verified) fail(ErrorKind::input, "outer radius outside the verified range");
    rings.push_back({t, log_omega_eval(w, t), radial_terms(adj.g1_shifted, t), radial_terms(adj.f2, t), outer_angles});
  }

  auto log_ratio = [](const RadialPair& ring, Turn angle, Turn rotation) {
    const double a = sum_at_angle(ring.f1, angle + rotation).log_abs();
    const double b = sum_at_angle(ring.f2, angle).log_abs();
    return log_add_exp(a, b) - ring.log_omega;
  };

  // max over candidates of min over the inner grid
  std::vector<double> objective(static_cast<std::size_t>(theta_count));
  parallel_for(objective.size(), [&](std::size_t c) {
    const Turn rot{static_cast<std::int64_t>(c), theta_count};
    double worst = INFINITY;
    for (std::size_t i = 0; i < inner_count; ++i) {
      for (int j = 0; j < rings[i].angles; ++j) worst = std::min(worst, log_ratio(rings[i], Turn{j, rings[i].angles}, rot));
    }
    objective[c] = worst;
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < objective.size(); ++c) {
    if (objective[c] > objective[best]) best = c;
  }
  adj.inner_min_log_ratio = objective[best];
  if (!(objective[best] > neg_inf)) {
    fail(ErrorKind::adjustment_failed, "every candidate rotation vanishes on the inner grid");
  }
  adj.rotation = reduce(Turn{static_cast<std::int64_t>(best), theta_count});
  adj.theta = adj.rotation.radians();

  std::vector<std::pair<Extreme, Extreme>> per_ring(rings.size());
  parallel_for(rings.size(), [&](std::size_t i) {
    Extreme lo{INFINITY, i, 0}, hi{-INFINITY, i, 0};
    for (int j = 0; j < rings[i].angles; ++j) {
      const double v = log_ratio(rings[i], Turn{j, rings[i].angles}, adj.rotation);
      if (v < lo.value) lo = {v, i, j};
      if (v > hi.value) hi = {v, i, j};
    }
    per_ring[i] = {lo, hi};
  });
  Extreme lo{INFINITY, 0, 0}, hi{-INFINITY, 0, 0};
  for (const auto& [l, h] : per_ring) {
    if (l.value < lo.value) lo = l;
    if (h.value > hi.value) hi = h;
    adj.points += static_cast<std::size_t>(rings[l.ring].angles);
  }
  adj.log_c_low = lo.value;
  adj.log_c_high = hi.value;
  adj.c_low = std::exp(lo.value);
  adj.c_high = std::exp(hi.value);
  adj.low_witness_r = rings[lo.ring].r;
  adj.low_witness_theta = Turn{lo.j, rings[lo.ring].angles}.radians();
  adj.high_witness_r = rings[hi.ring].r;
  adj.high_witness_theta = Turn{hi.j, rings[hi.ring].angles}.radians();
  if (!(adj.c_low > 0.0)) fail(ErrorKind::adjustment_failed, "measured lower constant is zero");
  return adj;
}

// ---- diagnostics ---------------------------------------------------------------

std::vector<double> frequency_profile(const ConstructionState& state) {
  if (state.es.size() < 2) fail(ErrorKind::input, "frequency profile needs at least two exponents");
  std::vector<double> ratios;
  for (std::size_t k = 0; k + 1 < state.es.size(); ++k) {
    ratios.push_back(static_cast<double>(state.es[k + 1]) / static_cast<double>(state.es[k]));
  }
  return ratios;
}

double first_discarded_log_ratio(const ConstructionState& state, const WeightFunction& w, double t) {
  const TangentStep next = next_tangent(w, state.xs.back(), state.h(), state.params.root_tol);
  const double e = std::floor(next.line.delta) + 1.0;
  return next.line.log_a + e * std::log(t) - log_omega_eval(w, t);
}

// ---- JSON --------------------------------------------------------------------------

nlohmann::json sandwich_report_to_json(const SandwichReport& r) {
  return {
      {"passed", r.passed},
      {"points", r.points},
      {"slack", r.slack},
      {"lower_log_constant", r.lower_constant},
      {"upper_log_constant", r.upper_constant},
      {"worst_lower_margin", r.worst_lower_margin},
      {"worst_upper_margin", r.worst_upper_margin},
      {"lower_witness", {{"t", r.lower_witness_t}, {"theta", r.lower_witness_theta}}},
      {"upper_witness", {{"t", r.upper_witness_t}, {"theta", r.upper_witness_theta}}},
  };
}

nlohmann::json adjusted_pair_to_json(const AdjustedPair& a) {
  return {
      {"e1", a.e1},
      {"rotation", {{"num", a.rotation.num}, {"den", a.rotation.den}, {"theta", a.theta}}},
      {"f1_terms", a.g1_shifted.size()},
      {"f2_terms", a.f2.size()},
      {"c_low", a.c_low},
      {"c_high", a.c_high},
      {"log_c_low", a.log_c_low},
      {"log_c_high", a.log_c_high},
      {"inner_min_log_ratio", a.inner_min_log_ratio},
      {"points", a.points},
      {"low_witness", {{"r", a.low_witness_r}, {"theta", a.low_witness_theta}}},
      {"high_witness", {{"r", a.high_witness_r}, {"theta", a.high_witness_theta}}},
  };
}

}  // namespace logweight
