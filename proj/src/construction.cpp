#include "logweight/construction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "logweight/errors.hpp"
#include "logweight/numeric.hpp"
#include "logweight/parallel.hpp"

namespace logweight {

namespace {

constexpr double kMaxExactInteger = 9007199254740992.0;  // 2^53

/// Finds the sign change of a non-increasing (sign = -1) or non-decreasing
/// (sign = +1) function g on (a, 0), starting from g(a) with the opposite
/// sign. Steps double geometrically toward 0, never crossing it.
struct Bracket {
  double lo;  // g has the starting sign here
  double hi;  // g has changed sign here
  double g_lo;
  double g_hi;
};

/// `magnitude(x)` bounds the size of the terms summed in g(x); rounding
/// below a few ulps of it is not counted as a monotonicity violation.
template <typename G, typename M>
Bracket bracket_toward_zero(G&& g, M&& magnitude, double a, double g_a, int sign, double root_tol, bool allow_flat,
                            const char* what) {
  double lo = a;
  double g_lo = g_a;
  double step = std::abs(a) * 0x1p-12;
  bool moved = false;
  for (int iter = 0; iter < 4000; ++iter) {
    double c = lo + step;
    if (c > lo / 2.0) c = lo / 2.0;  // halve the distance to 0 at most
    if (c >= -root_tol) {
      if (!moved) fail(ErrorKind::not_convex, std::string(what) + ": residual never changes");
      fail(ErrorKind::slow_growth, std::string(what) + ": no sign change before x = -root_tol");
    }
    const double g_c = g(c);
    if (!std::isfinite(g_c)) {
      // Phi overflowed past the root; move closer.
      if (c - lo <= std::abs(lo) * 1e-15) fail(ErrorKind::numeric, std::string(what) + ": Phi overflow near root");
      step = (c - lo) / 4.0;
      continue;
    }
    const double change = sign * (g_c - g_lo);
    const double noise = 1e-14 * std::max(std::abs(g_lo), magnitude(c));
    if (change > noise) {
      moved = true;
    } else if (!(allow_flat && change >= -noise)) {
      fail(ErrorKind::not_convex, std::string(what) + ": residual not strictly monotone at x = " +
                                      std::to_string(c));
    }
    if (sign * g_c >= 0.0) return {lo, c, g_lo, g_c};
    lo = c;
    g_lo = g_c;
    step *= 2.0;
  }
  fail(ErrorKind::slow_growth, std::string(what) + ": bracketing did not terminate");
}

/// Bisection to adjacent doubles.
template <typename G>
Bracket bisect(G&& g, Bracket b, int sign) {
  for (int iter = 0; iter < 2100; ++iter) {
    const double mid = b.lo + (b.hi - b.lo) / 2.0;
    if (mid <= b.lo || mid >= b.hi) break;
    const double g_mid = g(mid);
    if (!std::isfinite(g_mid) || sign * g_mid >= 0.0) {
      b.hi = mid;
      b.g_hi = g_mid;
    } else {
      b.lo = mid;
      b.g_lo = g_mid;
    }
  }
  return b;
}

std::vector<double> sample_interval(double a, double b, int n) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  xs.back() = b;
  return xs;
}

}  // namespace

TangentStep next_tangent(const WeightFunction& w, double x_prev, double h, double root_tol) {
  if (!(x_prev < 0.0)) fail(ErrorKind::domain, "next_tangent requires x_prev < 0");
  if (!(h > 0.0)) fail(ErrorKind::domain, "next_tangent requires h > 0");
  const bool piecewise = w.is_piecewise();
  const double phi_prev = w.phi(x_prev);
  if (!std::isfinite(phi_prev)) fail(ErrorKind::numeric, "Phi(x_prev) is not finite");

  // Gap at x_prev of the tangent drawn at xi, minus h; decreasing in xi.
  auto tangent_residual = [&](double xi) {
    return w.phi(xi) + w.phi_prime(xi) * (x_prev - xi) - phi_prev + h;
  };
  auto tangent_magnitude = [&](double xi) {
    return std::abs(w.phi(xi)) + std::abs(w.phi_prime(xi) * (x_prev - xi)) + std::abs(phi_prev);
  };
  Bracket b = bracket_toward_zero(tangent_residual, tangent_magnitude, x_prev, h, -1, root_tol, piecewise,
                                  "tangent solve");
  b = bisect(tangent_residual, b, -1);

  TangentStep step;
  const double phi_hi = w.phi(b.hi);
  const double jump_tol = 1e-9 * std::max(1.0, std::abs(phi_hi));
  if (b.g_lo - b.g_hi > jump_tol && b.g_lo > jump_tol && b.g_hi < -jump_tol) {
    // Corner of a piecewise Phi: take the supporting line through the
    // corner that passes exactly through (x_prev, Phi(x_prev) - h).
    const double slope = (phi_hi - phi_prev + h) / (b.hi - x_prev);
    const double left = w.phi_prime(b.lo);
    const double right = w.phi_prime(b.hi);
    const double slack = 1e-9 * std::max(1.0, std::abs(right));
    if (!(slope >= left - slack && slope <= right + slack)) {
      fail(ErrorKind::not_convex, "discontinuous tangent residual away from a corner");
    }
    step.line = {b.hi, slope, phi_hi - slope * b.hi};
    step.at_kink = true;
  } else {
    const double xi = std::abs(b.g_lo) <= std::abs(b.g_hi) ? b.lo : b.hi;
    const double delta = w.phi_prime(xi);
    step.line = {xi, delta, w.phi(xi) - delta * xi};
  }
  if (!(step.line.delta > 0.0) || !std::isfinite(step.line.log_a)) {
    fail(ErrorKind::numeric, "tangent line has non-positive slope or non-finite intercept");
  }

  const TangentLine line = step.line;
  // Phi - h above the line by this much; increasing for x > xi.
  auto chord_residual = [&](double x) { return w.phi(x) - h - line.at(x); };
  auto chord_magnitude = [&](double x) { return std::abs(w.phi(x)) + std::abs(line.log_a) + std::abs(line.delta * x); };
  Bracket c = bracket_toward_zero(chord_residual, chord_magnitude, line.xi, -h, +1, root_tol, piecewise,
                                  "chord solve");
  c = bisect(chord_residual, c, +1);
  step.x_next = std::abs(c.g_lo) <= std::abs(c.g_hi) ? c.lo : c.hi;
  if (!(x_prev < step.line.xi && step.line.xi < step.x_next && step.x_next < 0.0)) {
    fail(ErrorKind::not_convex, "tangent step produced out-of-order abscissas");
  }
  return step;
}

std::vector<double> convexity_gate_grid(const WeightFunction& w, double x0) {
  const double x_end = x0 / 1e6;
  if (!w.is_piecewise()) {
    // fast families (double_exp) overflow long before x0/1e6; gate the finite part
    std::vector<double> grid = geometric_x_grid(x0, x_end, 256);
    const auto bad = std::find_if(grid.begin(), grid.end(), [&](double x) {
      return !std::isfinite(w.phi(x)) || !std::isfinite(w.phi_prime(x));
    });
    grid.erase(bad, grid.end());
    return grid;
  }

  // One probe per linear piece, so slopes of distinct pieces are compared.
  std::vector<double> grid;
  const auto knots = w.knot_x();
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double mid = 0.5 * (knots[i] + knots[i + 1]);
    if (knots[i + 1] > x0 && mid < 0.0) grid.push_back(std::max(mid, x0));
  }
  const double last = knots.back();
  if (last < x_end) {
    const double start = std::max(last, x0);
    for (double x : geometric_x_grid(start, x_end, 64)) {
      if (x > start) grid.push_back(x);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

ConstructionState run_construction(const WeightFunction& w, const ConstructionParams& params) {
  if (!(params.h >= 2.0)) fail(ErrorKind::precondition, "h must be >= 2");
  if (!(params.x0 < 0.0)) fail(ErrorKind::precondition, "x0 must be negative");
  if (!(params.t_stop > 0.0 && params.t_stop < 1.0)) fail(ErrorKind::precondition, "t_stop must lie in (0,1)");
  if (params.k_max < 1) fail(ErrorKind::precondition, "k_max must be positive");
  if (!(params.root_tol > 0.0)) fail(ErrorKind::precondition, "root_tol must be positive");

  ConstructionParams p = params;
  for (int attempt = 0;; ++attempt) {
    const auto gate_grid = convexity_gate_grid(w, p.x0);
    if (gate_grid.size() >= 3) {
      const ConvexityReport gate = check_log_convexity(w, gate_grid);
      if (!gate.is_strictly_convex) {
        std::ostringstream msg;
        msg << "convexity gate failed on [" << p.x0 << ", " << p.x0 / 1e6 << "], min slope gap "
            << gate.min_slope_gap;
        if (!gate.violation_points.empty()) msg << " at x = " << gate.violation_points.front();
        fail(ErrorKind::not_convex, msg.str());
      }
    }

    ConstructionState state;
    state.params = p;
    state.restarts = attempt;
    state.xs.push_back(p.x0);
    state.ts.push_back(std::exp(p.x0));
    double x = p.x0;
    for (std::size_t k = 1; k <= p.k_max; ++k) {
      const TangentStep step = next_tangent(w, x, p.h, p.root_tol);
      if (!state.lines.empty() && !(step.line.delta > state.lines.back().delta)) {
        fail(ErrorKind::not_convex, "tangent slopes are not strictly increasing");
      }
      state.lines.push_back(step.line);
      x = step.x_next;
      state.xs.push_back(x);
      state.ts.push_back(std::exp(x));
      if (state.ts.back() > p.t_stop) break;
      if (k == p.k_max) state.hit_k_max = true;
    }

    bool collision = false;
    for (const TangentLine& line : state.lines) {
      if (!(line.delta < kMaxExactInteger)) {
        fail(ErrorKind::numeric, "slope exceeds the exactly representable integer range");
      }
      const auto e = static_cast<std::int64_t>(std::floor(line.delta)) + 1;
      if (!state.es.empty() && e <= state.es.back()) collision = true;
      state.es.push_back(e);
    }
    if (!collision) return state;
    if (!p.auto_restart || attempt >= p.max_restarts) {
      fail(ErrorKind::exponent_collision,
           "floor(delta_k) + 1 is not strictly increasing; choose x0 closer to 0 (currently " +
               std::to_string(p.x0) + ")");
    }
    p.x0 /= 2.0;
  }
}

double h_for_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) fail(ErrorKind::domain, "h_for_delta requires delta in (0, 1]");
  return std::max(2.0, std::log1p(4.0 / delta));
}

// ---- lemma verification ---------------------------------------------------

const InequalityCheck& LemmaReport::get(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  fail(ErrorKind::input, "no inequality named " + name);
}

namespace {

enum CheckId {
  kPicture1,
  kPicture2,
  kSegI,
  kSegII,
  kSegIII,
  kPrimedI,
  kPrimedII,
  kPrimedIII,
  kDeltaIII,
  kDeltaIIIPrimed,
  kCheckCount
};

constexpr const char* kCheckNames[kCheckCount] = {
    "picture_1", "picture_2", "segment_i", "segment_ii", "segment_iii",
    "primed_i",  "primed_ii", "primed_iii", "delta_iii", "delta_iii_primed"};

struct Worst {
  double rel = INFINITY;
  double raw = INFINITY;
  double x = 0.0;
  int k = 0;
  std::size_t count = 0;

  void offer(double raw_margin, double scale, double at_x, int at_k) {
    ++count;
    const double r = raw_margin / scale;
    if (r < rel) {
      rel = r;
      raw = raw_margin;
      x = at_x;
      k = at_k;
    }
  }
  void merge(const Worst& o) {
    count += o.count;
    if (o.rel < rel) {
      rel = o.rel;
      raw = o.raw;
      x = o.x;
      k = o.k;
    }
  }
};

struct Sample {
  double x;
  int interval;  // 1..K for [x_{k-1}, x_k]; K + 1 for (x_K, 0)
};

}  // namespace

LemmaReport verify_tangent_lemmas(const ConstructionState& state, const WeightFunction& w,
                                  int samples_per_interval, std::optional<double> delta) {
  const std::size_t K = state.lines.size();
  if (K == 0 || state.xs.size() != K + 1 || state.es.size() != K) {
    fail(ErrorKind::input, "construction state is malformed");
  }
  if (samples_per_interval < 2) fail(ErrorKind::input, "need at least 2 samples per interval");
  if (delta) {
    const double need = h_for_delta(*delta);
    if (state.h() < need * (1.0 - 1e-12)) {
      fail(ErrorKind::precondition, "state built with h = " + std::to_string(state.h()) +
                                        " but delta = " + std::to_string(*delta) + " needs h >= " +
                                        std::to_string(need));
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    const TangentLine& l = state.lines[k];
    const double right = w.phi_prime(l.xi);
    const double left = w.phi_prime(std::nextafter(l.xi, -INFINITY));
    const double slack = 1e-6 * std::max(1.0, l.delta);
    if (l.delta < std::min(left, right) - slack || l.delta > std::max(left, right) + slack) {
      fail(ErrorKind::input, "state/weight mismatch: slope of line " + std::to_string(k + 1) +
                                 " is not a derivative of Phi at its tangency point");
    }
  }

  const double h = state.h();
  const int S = samples_per_interval;
  std::vector<Sample> samples;
  for (std::size_t j = 1; j <= K; ++j) {
    for (double x : sample_interval(state.xs[j - 1], state.xs[j], S)) samples.push_back({x, static_cast<int>(j)});
  }
  for (int i = 1; i < S; ++i) {
    samples.push_back({state.xs[K] * (1.0 - static_cast<double>(i) / S), static_cast<int>(K) + 1});
  }

  const double log_half = std::log(0.5);
  const double log_primed_ii = std::log(0.9) - h;
  const double log_five_ninths = std::log(5.0 / 9.0);
  const double log_delta_half = delta ? std::log(*delta / 2.0) : 0.0;
  const double log_delta_primed = delta ? std::log(5.0 * *delta / 9.0) : 0.0;

  std::vector<std::array<Worst, kCheckCount>> per_sample(samples.size());
  parallel_for(samples.size(), [&](std::size_t si) {
    auto& out = per_sample[si];
    const double x = samples[si].x;
    const int j = samples[si].interval;
    const double phi = w.phi(x);
    const double scale = std::max(1.0, std::abs(phi));
    std::vector<double> lin(K), ex(K);
    for (std::size_t m = 0; m < K; ++m) {
      lin[m] = state.lines[m].at(x);
      ex[m] = state.lines[m].log_a + static_cast<double>(state.es[m]) * x;
    }
    for (std::size_t m = 0; m < K; ++m) {
      const int k = static_cast<int>(m) + 1;
      out[kSegI].offer(phi - lin[m], scale, x, k);
      out[kPrimedI].offer(phi - ex[m], scale, x, k);
    }
    // l_{k+1} >= l_{k+2} + h for x0 <= x <= x_k, k >= 0
    for (std::size_t k = 0; k + 2 <= K; ++k) {
      if (x <= state.xs[k]) out[kPicture1].offer(lin[k] - lin[k + 1] - h, scale, x, static_cast<int>(k));
    }
    // l_{k+1} >= l_k + h for x_{k+1} <= x < 0, k >= 1
    for (std::size_t k = 1; k + 1 <= K; ++k) {
      if (x >= state.xs[k + 1]) out[kPicture2].offer(lin[k] - lin[k - 1] - h, scale, x, static_cast<int>(k));
    }
    if (j <= static_cast<int>(K)) {
      const std::size_t k = static_cast<std::size_t>(j) - 1;
      out[kSegII].offer(lin[k] - phi + h, scale, x, j);
      out[kPrimedII].offer(ex[k] - (log_primed_ii + phi), scale, x, j);
      std::vector<double> far_lin, far_ex;
      for (std::size_t m = 0; m < K; ++m) {
        if (m + 2 <= k || m >= k + 2) {
          far_lin.push_back(lin[m]);
          far_ex.push_back(ex[m]);
        }
      }
      const double tail_lin = log_sum_exp<double>(far_lin);
      const double tail_ex = log_sum_exp<double>(far_ex);
      if (!far_lin.empty()) {
        out[kSegIII].offer(log_half + lin[k] - tail_lin, scale, x, j);
        out[kPrimedIII].offer(log_five_ninths + ex[k] - tail_ex, scale, x, j);
        if (delta) {
          out[kDeltaIII].offer(log_delta_half + lin[k] - tail_lin, scale, x, j);
          out[kDeltaIIIPrimed].offer(log_delta_primed + ex[k] - tail_ex, scale, x, j);
        }
      }
    }
  });

  LemmaReport report;
  for (int c = 0; c < kCheckCount; ++c) {
    if (!delta && (c == kDeltaIII || c == kDeltaIIIPrimed)) continue;
    Worst total;
    for (const auto& s : per_sample) total.merge(s[c]);
    InequalityCheck check;
    check.name = kCheckNames[c];
    check.worst_margin = total.rel;
    check.worst_raw_margin = total.raw;
    check.witness_x = total.x;
    check.witness_k = total.k;
    check.checked = total.count;
    check.passed = total.rel >= -report.tolerance;
    report.passed = report.passed && check.passed;
    report.checks.push_back(check);
  }
  return report;
}

// ---- JSON -------------------------------------------------------------------

namespace {

std::string fmt17(double v) {
  if (std::isnan(v)) return "null";
  if (std::isinf(v)) return v > 0 ? "1e999" : "-1e999";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string json_array(const std::vector<T>& values, F&& render) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += render(values[i]);
  }
  return out + "]";
}

}  // namespace

std::string state_to_json(const ConstructionState& s, const nlohmann::json* weight) {
  std::vector<double> xis, deltas, log_as;
  for (const auto& l : s.lines) {
    xis.push_back(l.xi);
    deltas.push_back(l.delta);
    log_as.push_back(l.log_a);
  }
  std::ostringstream o;
  o << "{\n";
  o << "  \"h\": " << fmt17(s.params.h) << ",\n";
  o << "  \"x0\": " << fmt17(s.params.x0) << ",\n";
  o << "  \"t_stop\": " << fmt17(s.params.t_stop) << ",\n";
  o << "  \"k_max\": " << s.params.k_max << ",\n";
  o << "  \"root_tol\": " << fmt17(s.params.root_tol) << ",\n";
  o << "  \"restarts\": " << s.restarts << ",\n";
  o << "  \"xs\": " << json_array(s.xs, fmt17) << ",\n";
  o << "  \"xis\": " << json_array(xis, fmt17) << ",\n";
  o << "  \"deltas\": " << json_array(deltas, fmt17) << ",\n";
  o << "  \"log_as\": " << json_array(log_as, fmt17) << ",\n";
  o << "  \"es\": " << json_array(s.es, [](std::int64_t e) { return std::to_string(e); });
  if (weight != nullptr) o << ",\n  \"weight\": " << weight->dump();
  o << "\n}\n";
  return o.str();
}

ConstructionState state_from_json(const nlohmann::json& j) {
  try {
    ConstructionState s;
    s.params.h = j.at("h").get<double>();
    s.params.x0 = j.at("x0").get<double>();
    if (j.contains("t_stop")) s.params.t_stop = j["t_stop"].get<double>();
    if (j.contains("k_max")) s.params.k_max = j["k_max"].get<std::size_t>();
    if (j.contains("root_tol")) s.params.root_tol = j["root_tol"].get<double>();
    if (j.contains("restarts")) s.restarts = j["restarts"].get<int>();
    s.xs = j.at("xs").get<std::vector<double>>();
    const auto deltas = j.at("deltas").get<std::vector<double>>();
    const auto log_as = j.at("log_as").get<std::vector<double>>();
    s.es = j.at("es").get<std::vector<std::int64_t>>();
    const std::size_t K = deltas.size();
    if (log_as.size() != K || s.es.size() != K || s.xs.size() != K + 1 || K == 0) {
      fail(ErrorKind::input, "state arrays have inconsistent lengths");
    }
    std::vector<double> xis;
    if (j.contains("xis")) {
      xis = j["xis"].get<std::vector<double>>();
      if (xis.size() != K) fail(ErrorKind::input, "state \"xis\" has the wrong length");
    }
    for (std::size_t k = 0; k < K; ++k) {
      // Without stored tangency points, x_k is a valid stand-in only for
      // the consumers that ignore xi.
      const double xi = xis.empty() ? 0.5 * (s.xs[k] + s.xs[k + 1]) : xis[k];
      s.lines.push_back({xi, deltas[k], log_as[k]});
    }
    for (double x : s.xs) s.ts.push_back(std::exp(x));
    for (std::size_t k = 0; k + 1 < s.xs.size(); ++k) {
      if (!(s.xs[k] < s.xs[k + 1])) fail(ErrorKind::input, "state xs must be strictly increasing");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, std::string("malformed state JSON: ") + e.what());
  }
}

nlohmann::json lemma_report_to_json(const LemmaReport& report) {
  nlohmann::json j;
  j["passed"] = report.passed;
  j["tolerance"] = report.tolerance;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["passed"] = c.passed;
    cj["checked"] = c.checked;
    cj["vacuous"] = c.checked == 0;
    if (c.checked > 0) {
      cj["worst_margin"] = c.worst_margin;
      cj["worst_raw_margin"] = c.worst_raw_margin;
      cj["witness_x"] = c.witness_x;
      cj["witness_k"] = c.witness_k;
    }
    checks.push_back(cj);
  }
  j["checks"] = checks;
  return j;
}

}  // namespace logweight
