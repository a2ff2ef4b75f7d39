#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "logweight/cli.hpp"
#include "logweight/construction.hpp"
#include "logweight/series.hpp"

using namespace logweight;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "logweight");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("logweight_test_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

const std::string data_dir = LOGWEIGHT_TEST_DATA;

}  // namespace

TEST_CASE("construct writes a state with the weight embedded") {
  const auto r = run({"construct", "--family", "ramey_ullrich", "--t0", "0.95", "--t-stop", "0.9999"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["weight"]["family"] == "ramey_ullrich");
  const auto st = state_from_json(j);
  CHECK(st.size() >= 2);
  CHECK(st.h() == 2.0);
}

TEST_CASE("a non-convex table is rejected with exit 2") {
  const auto r = run({"construct", "--family", "tabulated", "--table", data_dir + "/bad_nonconvex.json", "--t0", "0.5"});
  CHECK(r.code == 2);
  CHECK(r.err.find("not strictly convex") != std::string::npos);
}

TEST_CASE("bad arguments exit 2") {
  CHECK(run({"construct", "--family", "ramey_ullrich", "--h", "1"}).code == 2);
  CHECK(run({"construct", "--no-such-flag"}).code == 2);
  CHECK(run({"construct", "--family", "ramey_ullrich", "--t0"}).code == 2);
  CHECK(run({}).code == 2);
  const auto v = run({"verify", "sandwich", "--family", "ramey_ullrich", "--h", "1"});
  CHECK(v.code == 2);
  const auto j = nlohmann::json::parse(v.out);
  CHECK(j["passed"] == false);
  CHECK(j["error"]["kind"] == "precondition error");
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("verify sandwich from a saved state") {
  const std::string path = temp_path("state.json");
  REQUIRE(run({"construct", "--family", "ramey_ullrich", "--out", path}).code == 0);
  const auto r = run({"verify", "sandwich", "--state", path, "--t-points", "200", "--angles", "64"});
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["passed"] == true);
  std::remove(path.c_str());
}

TEST_CASE("verify envelope flags non-equivalent weights") {
  const auto bad = run({"verify", "envelope", "--family", "perturbed", "--params", "2"});
  CHECK(bad.code == 1);
  CHECK(nlohmann::json::parse(bad.out)["equivalent"] == false);
  const auto good = run({"verify", "envelope", "--family", "ramey_ullrich", "--points", "500"});
  CHECK(good.code == 0);
}

TEST_CASE("verify hadamard") {
  const auto r = run({"verify", "hadamard", "--random-polys", "10", "--r-points", "16"});
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["passed"] == true);
}

TEST_CASE("verify lemmas and ball") {
  CHECK(run({"verify", "lemmas", "--family", "ramey_ullrich", "--samples", "20"}).code == 0);
  CHECK(run({"verify", "ball", "--family", "ramey_ullrich", "--t-points", "50"}).code == 0);
  const auto coord = run({"verify", "ball", "--family", "ramey_ullrich", "--manifest", data_dir + "/coordinate_d2.json"});
  CHECK(coord.code == 1);
}

TEST_CASE("emit produces the documented CSV") {
  const std::string state_path = temp_path("emit_state.json");
  REQUIRE(run({"construct", "--family", "ramey_ullrich", "--out", state_path}).code == 0);
  const auto r = run({"emit", "--state", state_path, "--t-points", "10", "--angles", "4"});
  REQUIRE(r.code == 0);
  const auto lines = split(r.out, '\n');
  REQUIRE(lines.size() == 41);
  CHECK(lines[0] == "t,theta,log_g1_abs,log_g2_abs,log_sum,log_omega,lower_margin,upper_margin");

  const auto st = state_from_json(nlohmann::json::parse(slurp(state_path)));
  const auto pair = split_parity(st);
  const auto grid = radius_grid(pair.t0, pair.t_verified, 10);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    REQUIRE(f.size() == 8);
    const std::size_t ti = (i - 1) / 4;
    const int j = static_cast<int>((i - 1) % 4);
    CHECK(std::stod(f[0]) == grid[ti]);
    const double want = modulus_sum(pair, grid[ti], Turn{j, 4});
    CHECK(std::abs(std::stod(f[4]) - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    CHECK(std::stod(f[6]) > 0.0);
    CHECK(std::stod(f[7]) > 0.0);
  }

  const auto empty = run({"emit", "--state", state_path, "--t-points", "0"});
  CHECK(empty.code == 0);
  CHECK(split(empty.out, '\n').size() == 1);
  std::remove(state_path.c_str());
}

TEST_CASE("outputs are deterministic") {
  const std::vector<std::string> args{"construct", "--family", "exp_power", "--params", "1", "--t-stop", "0.999"};
  CHECK(run(args).out == run(args).out);
  const std::vector<std::string> h{"verify", "hadamard", "--random-polys", "5", "--r-points", "8"};
  CHECK(run(h).out == run(h).out);
}
