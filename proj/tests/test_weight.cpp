#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "logweight/errors.hpp"
#include "logweight/weight.hpp"

using namespace logweight;

namespace {

std::vector<WeightFunction> analytic_families() {
  return {WeightFunction::ramey_ullrich(), WeightFunction::power(3.0),      WeightFunction::exp_power(0.5),
          WeightFunction::exp_power(1.0),  WeightFunction::exp_power(2.0), WeightFunction::double_exp(1.0),
          WeightFunction::log_power(1.0)};
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

TEST_CASE("omega values at known points") {
  const auto ru = WeightFunction::ramey_ullrich();
  CHECK(omega_eval(ru, 0.0).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(omega_eval(ru, 0.5).value == doctest::Approx(2.0).epsilon(1e-15));
  const auto e1 = omega_eval(WeightFunction::exp_power(1.0), 0.9);
  CHECK_FALSE(e1.is_log);
  CHECK(e1.value == doctest::Approx(std::exp(10.0)).epsilon(1e-12));
  CHECK(e1.value == doctest::Approx(22026.4658).epsilon(1e-9));
}

TEST_CASE("omega switches to log form when it overflows") {
  const auto v = omega_eval(WeightFunction::exp_power(1.0), 0.999);
  CHECK(v.is_log);
  CHECK(v.value == doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("Phi and Phi' for the reparametrized weight") {
  CHECK(big_F_eval(WeightFunction::ramey_ullrich(), std::log(0.5), 0) == doctest::Approx(std::log(2.0)));
  const auto lp = WeightFunction::log_power(1.0);
  CHECK(big_F_eval(lp, -1.0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(big_F_eval(lp, -1.0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(big_F_eval(lp, -0.25, 1) == doctest::Approx(16.0).epsilon(1e-14));
}

TEST_CASE("domain and input errors") {
  const auto ru = WeightFunction::ramey_ullrich();
  CHECK(kind_of([&] { omega_eval(ru, 1.0); }) == ErrorKind::domain);
  CHECK(kind_of([&] { omega_eval(ru, -0.1); }) == ErrorKind::domain);
  CHECK(kind_of([&] { big_F_eval(ru, 0.0, 0); }) == ErrorKind::domain);
  CHECK(kind_of([&] { big_F_eval(ru, -1.0, 2); }) == ErrorKind::input);
  CHECK(kind_of([&] { WeightFunction::power(-1.0); }) == ErrorKind::input);
  CHECK(kind_of([&] { WeightFunction::from_json({{"family", "nope"}}); }) == ErrorKind::input);
}

TEST_CASE("Ramey-Ullrich Phi is strictly convex on [-2, -0.01]") {
  const auto ru = WeightFunction::ramey_ullrich();
  std::vector<double> grid(100);
  for (int i = 0; i < 100; ++i) grid[static_cast<std::size_t>(i)] = -2.0 + (2.0 - 0.01) * i / 99.0;
  const auto rep = check_log_convexity(ru, grid);
  CHECK(rep.is_strictly_convex);
  CHECK(rep.violation_points.empty());
  // Phi'' = e^x / (1 - e^x)^2, differentiated by hand
  double oracle_min = INFINITY;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    auto d1 = [](double x) { return std::exp(x) / (1.0 - std::exp(x)); };
    oracle_min = std::min(oracle_min, d1(grid[i + 1]) - d1(grid[i]));
  }
  CHECK(rep.min_slope_gap == doctest::Approx(oracle_min).epsilon(1e-9));
}

TEST_CASE("tabulated weight with linear Phi is not strictly convex") {
  // omega = t^2 gives Phi(x) = 2x
  std::vector<std::pair<double, double>> table;
  for (double t : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) table.emplace_back(t, t * t);
  const auto w = WeightFunction::tabulated(table);
  std::vector<double> grid;
  for (int i = 0; i < 50; ++i) grid.push_back(std::log(0.1) + (std::log(0.99) - std::log(0.1)) * i / 49.0);
  const auto rep = check_log_convexity(w, grid);
  CHECK_FALSE(rep.is_strictly_convex);
  CHECK(std::abs(rep.min_slope_gap) < 1e-12);
  CHECK(big_F_eval(w, std::log(0.5), 0) == doctest::Approx(2.0 * std::log(0.5)));
}

TEST_CASE("sawtooth perturbation breaks convexity") {
  const auto w = WeightFunction::perturbed(Perturbation::sawtooth);
  const auto grid = geometric_x_grid(-1.0, -1e-4, 400);
  const auto rep = check_log_convexity(w, grid);
  CHECK_FALSE(rep.is_strictly_convex);
  CHECK_FALSE(rep.violation_points.empty());
}

TEST_CASE("doubling constants") {
  std::vector<double> s_grid;
  for (int i = 0; i <= 60; ++i) s_grid.push_back(std::pow(10.0, -6.0 * i / 60.0));
  const auto ru = check_doubling(WeightFunction::ramey_ullrich(), s_grid);
  CHECK(ru.is_doubling);
  CHECK(std::abs(ru.A_estimate - 2.0) <= 1e-12);
  const auto p3 = check_doubling(WeightFunction::power(3.0), s_grid);
  CHECK(p3.is_doubling);
  CHECK(std::abs(p3.A_estimate - 8.0) <= 1e-11);
  for (double alpha : {0.5, 1.0, 2.0}) {
    CAPTURE(alpha);
    CHECK_FALSE(check_doubling(WeightFunction::exp_power(alpha), s_grid).is_doubling);
  }
  CHECK(kind_of([&] { check_doubling(WeightFunction::ramey_ullrich(), std::vector<double>{1.5}); }) ==
        ErrorKind::domain);
}

TEST_CASE("finite-difference derivative agrees with the closed form") {
  for (const auto& w : analytic_families()) {
    CAPTURE(w.name());
    for (double x : {-2.0, -0.5, -0.1, -0.05, -0.01}) {
      if (!std::isfinite(w.phi(x)) || w.phi(x) > 1e12) continue;
      const double a = w.phi_prime_analytic(x);
      const double f = w.phi_prime_fd(x);
      CAPTURE(x);
      CHECK(std::abs(f - a) <= 1e-6 * std::abs(a));
    }
    const auto fd = w.with_derivative_mode(DerivativeMode::finite_difference);
    CHECK(fd.phi_prime(-0.3) == doctest::Approx(w.phi_prime(-0.3)).epsilon(1e-6));
  }
}

TEST_CASE("omega and exp(Phi(log t)) agree") {
  for (const auto& w : analytic_families()) {
    CAPTURE(w.name());
    for (double t : {0.05, 0.3, 0.6, 0.8, 0.9}) {
      const auto om = omega_eval(w, t);
      if (om.is_log) continue;
      CHECK(std::abs(om.value - std::exp(big_F_eval(w, std::log(t), 0))) <= 1e-12 * om.value);
    }
  }
}

TEST_CASE("Phi is non-decreasing for every builtin family") {
  auto all = analytic_families();
  all.push_back(WeightFunction::perturbed(Perturbation::bump));
  all.push_back(WeightFunction::perturbed(Perturbation::sawtooth));
  all.push_back(WeightFunction::perturbed(Perturbation::unbounded_sawtooth));
  const auto grid = geometric_x_grid(-3.0, -1e-3, 500);
  for (const auto& w : all) {
    CAPTURE(w.name());
    double prev = -INFINITY;
    for (double x : grid) {
      const double v = w.phi(x);
      if (!std::isfinite(v)) break;
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("unboundedness probe") {
  std::vector<double> t_grid{0.1, 0.5, 0.9, 0.99};
  for (const auto& w : analytic_families()) {
    CAPTURE(w.name());
    const auto d = validate_weight(w, t_grid);
    CHECK(d.positive);
    CHECK(d.monotone);
    CHECK(d.unbounded_checked);
    CHECK(d.unbounded);
  }
  const auto tab = WeightFunction::tabulated({{0.2, 1.0}, {0.6, 2.0}, {0.9, 5.0}});
  const auto d = validate_weight(tab, std::vector<double>{0.3, 0.5});
  CHECK_FALSE(d.unbounded_checked);
  CHECK_FALSE(d.warnings.empty());
}

TEST_CASE("weight JSON round trip") {
  auto all = analytic_families();
  all.push_back(WeightFunction::perturbed(Perturbation::bump));
  all.push_back(WeightFunction::perturbed(Perturbation::unbounded_sawtooth, {2.0, 0.3}));
  all.push_back(WeightFunction::tabulated({{0.2, 1.0}, {0.6, 2.0}, {0.9, 5.0}}));
  for (const auto& w : all) {
    CAPTURE(w.name());
    const auto back = WeightFunction::from_json(w.to_json());
    CHECK(back.name() == w.name());
    for (double x : {-1.0, -0.3, -0.12}) CHECK(back.phi(x) == w.phi(x));
  }
  const auto alias = WeightFunction::from_json({{"family", "perturbed_unbounded_sawtooth"}});
  CHECK(alias.name() == "perturbed_unbounded_sawtooth");
  const auto fd = WeightFunction::from_json({{"family", "exp_power"}, {"params", {1.0}}, {"derivative", "finite_difference"}});
  CHECK(fd.derivative_mode() == DerivativeMode::finite_difference);
}
