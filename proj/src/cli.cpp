#include "logweight/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "logweight/ball.hpp"
#include "logweight/construction.hpp"
#include "logweight/envelope.hpp"
#include "logweight/errors.hpp"
#include "logweight/series.hpp"
#include "logweight/weight.hpp"

namespace logweight {

namespace {

using nlohmann::json;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kBadInput = 2;

struct WeightOpts {
  std::string family;
  std::vector<double> params;
  std::string table;
  std::string weight_file;
  bool finite_difference = false;
};

struct ConstructOpts {
  std::optional<double> h;
  std::optional<double> t0;
  std::optional<double> x0;
  double t_stop = 0.9999;
  std::size_t k_max = 100000;
  double root_tol = 1e-13;
  bool auto_restart = false;
};

struct Options {
  WeightOpts weight;
  ConstructOpts construct;
  std::string state_file;
  std::string out_file;

  // verify / emit
  std::size_t t_points = 2000;
  int angles = 256;
  std::size_t ball_t_points = 200;
  std::size_t emit_t_points = 100;
  int emit_angles = 16;
  int samples = 50;
  std::optional<double> delta;
  bool adjust = false;
  int adjust_candidates = 720;

  std::size_t random_polys = 100;
  int max_degree = 30;
  std::uint64_t seed = 7;
  std::size_t r_points = 64;
  double r_min = 0.05;
  double r_max = 0.95;

  double x_min = std::log(0.5);
  double x_max = -1e-6;
  std::size_t x_points = 4000;
  double gap_bound = 50.0;

  std::string manifest;
  std::string kind = "monomial";
  int sphere_samples = 64;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::input, "malformed JSON in '" + path + "': " + e.what());
  }
}

/// Weight from --weight, else --family/--params/--table, else the state's
/// embedded spec.
WeightFunction resolve_weight(const Options& o, const json* state) {
  json spec;
  if (!o.weight.weight_file.empty()) {
    spec = read_json_file(o.weight.weight_file);
  } else if (!o.weight.family.empty()) {
    spec = {{"family", o.weight.family}, {"params", o.weight.params}};
    if (!o.weight.table.empty()) {
      json t = read_json_file(o.weight.table);
      spec["table"] = t.is_object() && t.contains("table") ? t["table"] : t;
    }
  } else if (state != nullptr && state->contains("weight")) {
    spec = (*state)["weight"];
  } else {
    fail(ErrorKind::input, "no weight given (use --family, --weight or a state with an embedded weight)");
  }
  if (o.weight.finite_difference) spec["derivative"] = "finite_difference";
  return WeightFunction::from_json(spec);
}

ConstructionParams construction_params(const ConstructOpts& c) {
  ConstructionParams p;
  p.h = c.h.value_or(2.0);
  if (c.x0 && c.t0) fail(ErrorKind::input, "give either --t0 or --x0, not both");
  if (c.x0) {
    p.x0 = *c.x0;
  } else {
    const double t0 = c.t0.value_or(0.95);
    if (!(t0 > 0.0 && t0 < 1.0)) fail(ErrorKind::precondition, "t0 must lie in (0,1)");
    p.x0 = std::log(t0);
  }
  p.t_stop = c.t_stop;
  p.k_max = c.k_max;
  p.root_tol = c.root_tol;
  p.auto_restart = c.auto_restart;
  return p;
}

struct Loaded {
  WeightFunction weight;
  ConstructionState state;
};

/// State from --state, or constructed on the spot from the weight flags.
Loaded load_state(const Options& o) {
  if (!o.state_file.empty()) {
    const json j = read_json_file(o.state_file);
    WeightFunction w = resolve_weight(o, &j);
    return {w, state_from_json(j)};
  }
  WeightFunction w = resolve_weight(o, nullptr);
  return {w, run_construction(w, construction_params(o.construct))};
}

void write_output(const Options& o, const std::string& text, std::ostream& out) {
  if (o.out_file.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.out_file);
  if (!f) fail(ErrorKind::input, "cannot write '" + o.out_file + "'");
  f << text;
}

void emit_report(const Options& o, const json& report, std::ostream& out) { write_output(o, report.dump(2) + "\n", out); }

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- commands --------------------------------------------------------------------

int cmd_construct(const Options& o, std::ostream& out, std::ostream& err) {
  const WeightFunction w = resolve_weight(o, nullptr);
  const ConstructionState st = run_construction(w, construction_params(o.construct));
  const json spec = w.to_json();
  write_output(o, state_to_json(st, &spec), out);
  err << "constructed " << st.size() << " lines for " << w.name() << ", t_K = " << st.ts.back()
      << (st.hit_k_max ? " (stopped at k_max)" : "") << "\n";
  return kPass;
}

int cmd_sandwich(const Options& o, std::ostream& out, std::ostream& err) {
  const Loaded l = load_state(o);
  const SeriesPair pair = split_parity(l.state);
  const auto grid = radius_grid(pair.t0, pair.t_verified, o.t_points);
  const SandwichReport rep = sandwich_check(pair, l.weight, grid, o.angles);
  json j = sandwich_report_to_json(rep);
  j["weight"] = l.weight.name();
  j["lines"] = l.state.size();
  j["t_range"] = {pair.t0, pair.t_verified};
  bool ok = rep.passed;
  if (o.adjust) {
    const AdjustedPair adj = zero_adjust(pair, l.weight, o.adjust_candidates, {}, grid, o.angles);
    j["zero_adjust"] = adjusted_pair_to_json(adj);
  }
  emit_report(o, j, out);
  err << "sandwich " << (ok ? "PASS" : "FAIL") << ": worst lower margin " << rep.worst_lower_margin
      << ", worst upper margin " << rep.worst_upper_margin << " over " << rep.points << " points\n";
  return ok ? kPass : kFail;
}

int cmd_lemmas(const Options& o, std::ostream& out, std::ostream& err) {
  Options local = o;
  // with --delta and no explicit --h, use the smallest admissible h
  if (o.delta && !o.construct.h && o.state_file.empty()) {
    local.construct.h = h_for_delta(*o.delta);
  }
  const Loaded l = load_state(local);
  const LemmaReport rep = verify_tangent_lemmas(l.state, l.weight, o.samples, o.delta);
  json j = lemma_report_to_json(rep);
  j["weight"] = l.weight.name();
  j["lines"] = l.state.size();
  j["h"] = l.state.h();
  emit_report(o, j, out);
  err << "lemmas " << (rep.passed ? "PASS" : "FAIL") << " (" << rep.checks.size() << " estimates, "
      << l.state.size() << " lines)\n";
  return rep.passed ? kPass : kFail;
}

int cmd_hadamard(const Options& o, std::ostream& out, std::ostream& err) {
  const auto polys = random_polynomials(o.random_polys, o.max_degree, o.seed);
  std::vector<ComplexFunction> fs(polys.begin(), polys.end());
  const auto radii = log_spaced_radii(o.r_min, o.r_max, o.r_points);
  // each polynomial is checked on its own, then the whole batch as one sum
  HadamardReport worst;
  worst.min_second_difference = INFINITY;
  for (std::size_t m = 0; m < fs.size(); ++m) {
    HadamardReport r = hadamard_check(std::span(&fs[m], 1), radii);
    if (r.min_second_difference < worst.min_second_difference) {
      worst = r;
      worst.witness_function = m;
    }
  }
  const HadamardReport batch = hadamard_check(fs, radii);
  const bool ok = worst.passed && batch.passed;
  json j = {{"passed", ok},
            {"functions", fs.size()},
            {"seed", o.seed},
            {"max_degree", o.max_degree},
            {"worst_single", hadamard_report_to_json(worst)},
            {"batch_sum", hadamard_report_to_json(batch)}};
  emit_report(o, j, out);
  err << "hadamard " << (ok ? "PASS" : "FAIL") << ": min second difference " << worst.min_second_difference
      << " (single), " << batch.min_second_difference << " (sum)\n";
  return ok ? kPass : kFail;
}

int cmd_envelope(const Options& o, std::ostream& out, std::ostream& err) {
  const WeightFunction w = resolve_weight(o, nullptr);
  const auto grid = envelope_grid(w, o.x_min, o.x_max, o.x_points);
  const EnvelopeResult env = log_convex_envelope(w, grid, o.gap_bound);
  json j = envelope_result_to_json(env);
  j["weight"] = w.name();
  emit_report(o, j, out);
  err << "envelope " << (env.equivalent ? "PASS" : "FAIL") << ": gap " << env.gap << " at x = " << env.gap_x
      << " (bound " << env.gap_bound << ")\n";
  return env.equivalent ? kPass : kFail;
}

int cmd_ball(const Options& o, std::ostream& out, std::ostream& err) {
  PolynomialFamily fam = !o.manifest.empty() ? PolynomialFamily::from_manifest(read_json_file(o.manifest))
                                             : PolynomialFamily::from_manifest({{"kind", o.kind}});
  if (o.delta) fam.delta_claimed = *o.delta;
  const Loaded l = load_state(o);
  std::set<std::int64_t> distinct(l.state.es.begin(), l.state.es.end());
  const std::vector<std::int64_t> degrees(distinct.begin(), distinct.end());
  const FamilyReport fr = verify_family(fam, degrees, o.sphere_samples, o.seed);
  json j = {{"family", fam.manifest()}, {"family_report", family_report_to_json(fr)}};
  bool ok = fr.passed;
  if (fr.passed) {
    if (l.state.h() < h_for_delta(fam.delta_claimed)) {
      fail(ErrorKind::precondition, "state built with h = " + std::to_string(l.state.h()) +
                                        " but delta = " + std::to_string(fam.delta_claimed) + " needs h >= " +
                                        std::to_string(h_for_delta(fam.delta_claimed)));
    }
    const BallFunctionSystem sys = build_ball_functions(l.state, fam, o.sphere_samples, o.seed);
    const SeriesPair& pair = sys.pair;
    const auto grid = radius_grid(pair.t0, pair.t_verified, o.ball_t_points);
    const BallBoundReport br = ball_lower_bound_check(sys, l.weight, grid, o.sphere_samples, o.seed);
    j["functions"] = sys.count();
    j["lower_bound"] = ball_report_to_json(br);
    ok = br.passed;
  }
  j["passed"] = ok;
  emit_report(o, j, out);
  err << "ball " << (ok ? "PASS" : "FAIL") << (fr.passed ? "" : ": polynomial family rejected") << "\n";
  return ok ? kPass : kFail;
}

int cmd_emit(const Options& o, std::ostream& out, std::ostream& err) {
  const Loaded l = load_state(o);
  const SeriesPair pair = split_parity(l.state);
  std::ostringstream csv;
  csv << "t,theta,log_g1_abs,log_g2_abs,log_sum,log_omega,lower_margin,upper_margin\n";
  const double lower_c = std::log(0.4) - pair.h;
  const double upper_c = std::log(4.0);
  if (o.emit_t_points > 0 && o.emit_angles > 0) {
    for (double t : radius_grid(pair.t0, pair.t_verified, o.emit_t_points)) {
      const RadialTerms r1 = radial_terms(pair.g1, t);
      const RadialTerms r2 = radial_terms(pair.g2, t);
      const double lw = log_omega_eval(l.weight, t);
      for (int j = 0; j < o.emit_angles; ++j) {
        const Turn a{j, o.emit_angles};
        const double l1 = sum_at_angle(r1, a).log_abs();
        const double l2 = sum_at_angle(r2, a).log_abs();
        const double ls = log_add_exp(l1, l2);
        csv << fmt17(t) << ',' << fmt17(a.radians()) << ',' << fmt17(l1) << ',' << fmt17(l2) << ',' << fmt17(ls)
            << ',' << fmt17(lw) << ',' << fmt17(ls - (lower_c + lw)) << ',' << fmt17(upper_c + lw - ls) << '\n';
      }
    }
  }
  write_output(o, csv.str(), out);
  err << "emitted " << o.emit_t_points * static_cast<std::size_t>(std::max(o.emit_angles, 0)) << " rows\n";
  return kPass;
}

void add_weight_flags(CLI::App* app, Options& o) {
  app->add_option("--family", o.weight.family, "weight family name");
  app->add_option("--params", o.weight.params, "family parameters")->delimiter(',');
  app->add_option("--table", o.weight.table, "JSON file with [[t, omega], ...] for the tabulated family");
  app->add_option("--weight", o.weight.weight_file, "JSON weight spec {\"family\", \"params\", \"table\"}");
  app->add_flag("--finite-difference", o.weight.finite_difference, "use the central-difference derivative");
}

void add_construct_flags(CLI::App* app, Options& o) {
  app->add_option("--h", o.construct.h, "vertical gap h (>= 2)");
  app->add_option("--t0", o.construct.t0, "starting radius");
  app->add_option("--x0", o.construct.x0, "starting abscissa log t0");
  app->add_option("--t-stop", o.construct.t_stop, "stop once t_k exceeds this");
  app->add_option("--k-max", o.construct.k_max, "cap on the number of lines");
  app->add_option("--root-tol", o.construct.root_tol, "bisection tolerance in x");
  app->add_flag("--auto-restart", o.construct.auto_restart, "retry with x0/2 on exponent collisions");
}

void add_state_flags(CLI::App* app, Options& o) {
  app->add_option("--state", o.state_file, "state JSON from `construct` (else constructed from the flags)");
  add_weight_flags(app, o);
  add_construct_flags(app, o);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Log-convex radial weights: lacunary constructions and verifiers", "logweight"};
  // "--h" is the gap parameter, so help is long-form only
  app.set_help_flag("--help", "print this help");
  app.require_subcommand(1);
  Options o;

  auto* construct = app.add_subcommand("construct", "run the tangent-line construction, print the state JSON");
  add_weight_flags(construct, o);
  add_construct_flags(construct, o);
  construct->add_option("--out", o.out_file, "write the state here instead of stdout");

  auto* verify = app.add_subcommand("verify", "run a verifier and print its JSON report");
  verify->require_subcommand(1);

  auto* sandwich = verify->add_subcommand("sandwich", "two-sided bound on a (t, theta) grid");
  add_state_flags(sandwich, o);
  sandwich->add_option("--t-points", o.t_points, "radii in (t0, t_stop]");
  sandwich->add_option("--angles", o.angles, "angles per radius");
  sandwich->add_flag("--adjust", o.adjust, "also run the zero adjustment and report its constants");
  sandwich->add_option("--adjust-candidates", o.adjust_candidates, "rotations tried by the zero adjustment");

  auto* lemmas = verify->add_subcommand("lemmas", "sampled tangent-line and segment estimates");
  add_state_flags(lemmas, o);
  lemmas->add_option("--samples", o.samples, "samples per interval");
  lemmas->add_option("--delta", o.delta, "also check the delta-sharpened estimates");

  auto* hadamard = verify->add_subcommand("hadamard", "three-circles convexity on random polynomials");
  hadamard->add_option("--random-polys", o.random_polys, "number of polynomials");
  hadamard->add_option("--max-degree", o.max_degree, "maximum degree");
  hadamard->add_option("--seed", o.seed, "sampling seed");
  hadamard->add_option("--r-points", o.r_points, "radii, log-spaced");
  hadamard->add_option("--r-min", o.r_min, "smallest radius");
  hadamard->add_option("--r-max", o.r_max, "largest radius");

  auto* envelope = verify->add_subcommand("envelope", "lower convex envelope of Phi and its gap");
  add_weight_flags(envelope, o);
  envelope->add_option("--x-min", o.x_min, "left end of the sampled range (negative)");
  envelope->add_option("--x-max", o.x_max, "right end of the sampled range (negative)");
  envelope->add_option("--points", o.x_points, "geometric sample count (feature points are added)");
  envelope->add_option("--gap-bound", o.gap_bound, "largest gap still called equivalent");

  auto* ball = verify->add_subcommand("ball", "family conditions and the lower bound on the unit ball");
  add_state_flags(ball, o);
  ball->add_option("--manifest", o.manifest, "family manifest {\"d\", \"Q\", \"delta\", \"kind\"}");
  ball->add_option("--kind", o.kind, "builtin family when no manifest is given");
  ball->add_option("--delta", o.delta, "override the claimed delta");
  ball->add_option("--t-points", o.ball_t_points, "radii in (t0, t_stop]");
  ball->add_option("--sphere-samples", o.sphere_samples, "points on the unit sphere (>= 64)");
  ball->add_option("--seed", o.seed, "sampling seed");

  auto* emit = app.add_subcommand("emit", "CSV of |G1|, |G2| and the bound margins on a grid");
  add_state_flags(emit, o);
  emit->add_option("--t-points", o.emit_t_points, "radii in (t0, t_stop]; 0 gives a header-only file");
  emit->add_option("--angles", o.emit_angles, "angles per radius");
  emit->add_option("--out", o.out_file, "write the CSV here instead of stdout");

  for (auto* sub : {sandwich, lemmas, hadamard, envelope, ball}) {
    sub->add_option("--out", o.out_file, "write the report here instead of stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kBadInput;
  }

  const bool verifying = static_cast<bool>(*verify);
  auto report_error = [&](const std::string& kind, const char* what) {
    err << "error: " << what << "\n";
    if (verifying) out << json{{"passed", false}, {"error", {{"kind", kind}, {"message", what}}}}.dump(2) << "\n";
    return kBadInput;
  };
  try {
    if (*construct) return cmd_construct(o, out, err);
    if (*emit) return cmd_emit(o, out, err);
    if (*sandwich) return cmd_sandwich(o, out, err);
    if (*lemmas) return cmd_lemmas(o, out, err);
    if (*hadamard) return cmd_hadamard(o, out, err);
    if (*envelope) return cmd_envelope(o, out, err);
    if (*ball) return cmd_ball(o, out, err);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  err << app.help();
  return kBadInput;
}

}  // namespace logweight
