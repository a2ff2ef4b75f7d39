#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "logweight/construction.hpp"
#include "logweight/errors.hpp"

using namespace logweight;

namespace {

/// Root of a x^2 + b x + c in (lo, hi), by the stable quadratic formula.
double quadratic_root_in(double a, double b, double c, double lo, double hi) {
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  const double q = -0.5 * (b + std::copysign(disc, b));
  for (double r : {q / a, c / q}) {
    if (r > lo && r < hi) return r;
  }
  FAIL("no root in range");
  return 0.0;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::numeric;
}

}  // namespace

TEST_CASE("one step on Phi(x) = -1/x has the closed form") {
  const auto w = WeightFunction::log_power(1.0);
  const auto step = next_tangent(w, -1.0, 2.0);
  CHECK(std::abs(step.line.xi - (1.0 - std::sqrt(2.0))) <= 1e-10);
  CHECK(std::abs(step.line.delta - (3.0 + 2.0 * std::sqrt(2.0))) <= 1e-10);
  CHECK(std::abs(step.x_next + (3.0 - 2.0 * std::sqrt(2.0))) <= 1e-10);
  CHECK_FALSE(step.at_kink);
}

TEST_CASE("steps on -1/x match the quadratic oracle for other starts and gaps") {
  const auto w = WeightFunction::log_power(1.0);
  for (double xp : {-3.0, -0.7, -0.05}) {
    for (double h : {2.0, 3.5, 6.0}) {
      CAPTURE(xp);
      CAPTURE(h);
      // tangent at xi is (x - 2 xi)/xi^2; meeting Phi - h at xp:
      // (-1/xp - h) xi^2 + 2 xi - xp = 0
      const double xi = quadratic_root_in(-1.0 / xp - h, 2.0, -xp, xp, 0.0);
      // -1/x - h = (x - 2 xi)/xi^2  =>  x^2 + (h xi^2 - 2 xi) x + xi^2 = 0
      const double x1 = quadratic_root_in(1.0, h * xi * xi - 2.0 * xi, xi * xi, xi, 0.0);
      const auto step = next_tangent(w, xp, h);
      CHECK(std::abs(step.line.xi - xi) <= 1e-12 * std::max(1.0, std::abs(xi)) * 100);
      CHECK(std::abs(step.x_next - x1) <= 1e-12 * std::max(1.0, std::abs(x1)) * 100);
      CHECK(step.line.delta == doctest::Approx(1.0 / (xi * xi)).epsilon(1e-9));
    }
  }
}

TEST_CASE("Ramey-Ullrich construction invariants") {
  const auto w = WeightFunction::ramey_ullrich();
  const auto st = run_construction(w, ConstructionParams::from_t0(0.95, 2.0, 0.9999));
  REQUIRE(st.size() >= 2);
  CHECK(st.ts.back() > 0.9999);
  CHECK_FALSE(st.hit_k_max);
  CHECK(st.t_verified() == 0.9999);
  for (std::size_t k = 0; k < st.size(); ++k) {
    const auto& l = st.lines[k];
    const double x_prev = st.xs[k];
    const double x_next = st.xs[k + 1];
    CHECK(x_prev < l.xi);
    CHECK(l.xi < x_next);
    CHECK(st.es[k] == static_cast<std::int64_t>(std::floor(l.delta)) + 1);
    const double scale = std::max(1.0, std::abs(w.phi(x_next)));
    CHECK(std::abs(l.at(x_prev) - (w.phi(x_prev) - 2.0)) <= 1e-9 * scale);
    CHECK(std::abs(l.at(x_next) - (w.phi(x_next) - 2.0)) <= 1e-9 * scale);
    CHECK(std::abs(l.at(l.xi) - w.phi(l.xi)) <= 1e-9 * scale);
    if (k > 0) {
      CHECK(st.es[k] > st.es[k - 1]);
      CHECK(l.delta > st.lines[k - 1].delta);
    }
  }
  // repeated runs are bit-identical
  const auto again = run_construction(w, ConstructionParams::from_t0(0.95, 2.0, 0.9999));
  CHECK(state_to_json(again) == state_to_json(st));
}

TEST_CASE("faster weights need more lines") {
  const auto st1 = run_construction(WeightFunction::exp_power(1.0), ConstructionParams::from_t0(0.95, 2.0, 0.999));
  CHECK(st1.size() > 10);
  const auto st2 = run_construction(WeightFunction::double_exp(1.0), ConstructionParams::from_t0(0.5, 2.0, 0.9));
  CHECK(st2.size() > 50);
  CHECK(st2.ts.back() > 0.9);
}

TEST_CASE("parameter validation and the convexity gate") {
  const auto ru = WeightFunction::ramey_ullrich();
  CHECK(kind_of([&] { run_construction(ru, ConstructionParams::from_t0(0.95, 1.0)); }) == ErrorKind::precondition);
  auto p = ConstructionParams::from_t0(0.95);
  p.t_stop = 1.0;
  CHECK(kind_of([&] { run_construction(ru, p); }) == ErrorKind::precondition);

  const auto saw = WeightFunction::perturbed(Perturbation::sawtooth);
  try {
    run_construction(saw, ConstructionParams::from_t0(0.5));
    FAIL("sawtooth weight passed the gate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_convex);
    CHECK(std::string(e.what()).find("not strictly convex") != std::string::npos);
  }
}

TEST_CASE("exponent collisions and the auto-restart") {
  // piecewise-linear Phi with slopes 1.05, 1.5, 1.95 on long pieces far from 0:
  // supporting lines at the kinks x = -28 and -16 both get exponent 2
  std::ifstream in(std::string(LOGWEIGHT_TEST_DATA) + "/slow_slopes.json");
  const auto w = WeightFunction::tabulated(nlohmann::json::parse(in).get<std::vector<std::pair<double, double>>>());
  ConstructionParams p;
  p.x0 = -40.0;
  p.t_stop = 0.9;
  CHECK(kind_of([&] { run_construction(w, p); }) == ErrorKind::exponent_collision);
  p.auto_restart = true;
  const auto st = run_construction(w, p);
  CHECK(st.restarts == 1);
  CHECK(st.params.x0 == -20.0);
  for (std::size_t k = 1; k < st.es.size(); ++k) CHECK(st.es[k] > st.es[k - 1]);
}

TEST_CASE("h_for_delta") {
  CHECK(h_for_delta(1.0) == 2.0);
  CHECK(h_for_delta(0.1) == doctest::Approx(std::log(41.0)));
  CHECK(h_for_delta(0.01) == doctest::Approx(std::log(401.0)));
  CHECK(h_for_delta(0.01) == doctest::Approx(5.99).epsilon(1e-3));
  CHECK(kind_of([] { h_for_delta(0.0); }) == ErrorKind::domain);
  CHECK(kind_of([] { h_for_delta(1.5); }) == ErrorKind::domain);
}

TEST_CASE("lemma estimates hold and detect tampering") {
  // the separation estimates compare lines two apart, so K >= 3 is needed
  const auto w = WeightFunction::ramey_ullrich();
  auto p = ConstructionParams::from_t0(0.95, 2.0, 0.99999999);
  p.root_tol = 1e-20;
  const auto st = run_construction(w, p);
  REQUIRE(st.size() >= 3);
  const auto rep = verify_tangent_lemmas(st, w, 50);
  CHECK(rep.passed);
  for (const auto& c : rep.checks) {
    CAPTURE(c.name);
    CHECK(c.checked > 0);
    CHECK(c.worst_margin >= -1e-9);
  }

  auto bad = st;
  bad.lines[1].log_a += 5.0;
  const auto tampered = verify_tangent_lemmas(bad, w, 50);
  CHECK_FALSE(tampered.passed);
}

TEST_CASE("delta-sharpened estimates need a large enough h") {
  const auto w = WeightFunction::exp_power(1.0);
  const auto st2 = run_construction(w, ConstructionParams::from_t0(0.95, 2.0, 0.999));
  CHECK(kind_of([&] { verify_tangent_lemmas(st2, w, 20, 0.01); }) == ErrorKind::precondition);
  const auto st = run_construction(w, ConstructionParams::from_t0(0.95, h_for_delta(0.01), 0.999));
  const auto rep = verify_tangent_lemmas(st, w, 20, 0.01);
  CHECK(rep.passed);
  CHECK(rep.get("delta_iii").checked > 0);
  CHECK(rep.get("delta_iii_primed").checked > 0);
}

TEST_CASE("state JSON round trip is exact") {
  const auto w = WeightFunction::exp_power(1.0);
  const auto st = run_construction(w, ConstructionParams::from_t0(0.95, 2.0, 0.999));
  const std::string text = state_to_json(st);
  const auto back = state_from_json(nlohmann::json::parse(text));
  CHECK(back.xs == st.xs);
  CHECK(back.es == st.es);
  REQUIRE(back.lines.size() == st.lines.size());
  for (std::size_t k = 0; k < st.lines.size(); ++k) {
    CHECK(back.lines[k].xi == st.lines[k].xi);
    CHECK(back.lines[k].delta == st.lines[k].delta);
    CHECK(back.lines[k].log_a == st.lines[k].log_a);
  }
  CHECK(state_to_json(back) == text);
  CHECK(kind_of([] { state_from_json(nlohmann::json{{"h", 2}}); }) == ErrorKind::input);
}
