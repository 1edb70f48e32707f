// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "skelmax/grid_io.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;
};

/// Runs the CLI with stderr folded into the captured output.
Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + SKELMAX_CLI + std::string(" ") + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("apconst reports the closed-form constants") {
  for (int m : {8, 16}) {
    const double d = 1.0 / m;
    const Run sk = run("apconst --class skeleton --p 2 --delta 1/" + std::to_string(m) + " --weight constant");
    REQUIRE(sk.code == 0);
    const auto j = nlohmann::json::parse(sk.out);
    CHECK(std::abs(j["value"].get<double>() - d / (4 * (1 + d))) <= 1e-9 * d / (4 * (1 + d)));
    const Run nl = run("apconst --class nonlinear --p 2 --delta 1/" + std::to_string(m) + " --weight constant");
    REQUIRE(nl.code == 0);
    CHECK(std::abs(nlohmann::json::parse(nl.out)["value"].get<double>() - d / 16) <= 1e-9 * d / 16);
  }
}

TEST_CASE("invalid input exits with 2") {
  const Run bad_delta = run("field --delta 1/3.5");
  CHECK(bad_delta.code == 2);
  CHECK(bad_delta.out.find("delta must be 1/m") != std::string::npos);
  const Run unknown = run("verify --check duality --frobnicate");
  CHECK(unknown.code == 2);
  CHECK(unknown.out.find("Usage") != std::string::npos);
  CHECK(run("verify --check nothing").code == 2);
  CHECK(run("apconst --weight power:alpha=-3").code == 2);
  CHECK(run("apconst --p 0.5").code == 2);
  CHECK(run("scaling --deltas 1/8,1/16").code == 2);
  CHECK(run("verify --check sufficient --p 3 --delta 1/4").code == 2);
  CHECK(run("field --delta 1/4 --input does-not-exist.csv").code == 2);
  CHECK(run("apconst --out /nonexistent-dir/x.json").code == 2);
  CHECK(run("").code == 2);
}

TEST_CASE("verify emits a ledger row and exit code follows the check") {
  const Run ok = run("verify --check duality --p 2 --delta 1/8 --seed 7 --no-timing");
  REQUIRE(ok.code == 0);
  std::istringstream lines(ok.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "check,params_digest,lhs,rhs,slack,pass,seconds");
  CHECK(row.rfind("duality,", 0) == 0);
  CHECK(row.find(",true,0") != std::string::npos);
  const Run fail = run("verify --check sufficient --p 2 --delta 1/4 --constant 1e-6 --no-timing");
  CHECK(fail.code == 1);
  CHECK(fail.out.find(",false,") != std::string::npos);
  CHECK(run("select --delta 1/16 --u 100 --C 0.001").code == 1);
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
  const std::string args = " --p 2 --delta 1/8 --seed 3 --no-timing --check duality --instances 3";
  REQUIRE(run("--threads 1 --out cli_a.csv verify" + args).code == 0);
  REQUIRE(run("--threads 4 --out cli_b.csv verify" + args).code == 0);
  REQUIRE(run("--out cli_c.csv verify" + args, "SKELMAX_THREADS=2").code == 0);
  CHECK(slurp("cli_a.csv") == slurp("cli_b.csv"));
  CHECK(slurp("cli_a.csv") == slurp("cli_c.csv"));
  CHECK(!slurp("cli_a.csv").empty());
  REQUIRE(run("--out cli_a.json apconst --class skeleton --p 3/2 --delta 1/8 --weight twovalue:K=4").code == 0);
  REQUIRE(run("--threads 4 --out cli_b.json apconst --class skeleton --p 3/2 --delta 1/8 --weight twovalue:K=4").code == 0);
  CHECK(slurp("cli_a.json") == slurp("cli_b.json"));
}

TEST_CASE("append adds rows under one header") {
  std::remove("cli_ledger.csv");
  REQUIRE(run("--out cli_ledger.csv --no-timing verify --check duality --p 2 --delta 1/4 --seed 1").code == 0);
  REQUIRE(run("--out cli_ledger.csv --append --no-timing verify --check duality --p 2 --delta 1/4 --seed 2").code == 0);
  std::istringstream is(slurp("cli_ledger.csv"));
  std::string line;
  int headers = 0, rows = 0;
  while (std::getline(is, line)) (line.rfind("check,", 0) == 0 ? headers : rows) += 1;
  CHECK(headers == 1);
  CHECK(rows == 2);
}

TEST_CASE("config file overrides flags") {
  {
    std::ofstream os("cli_config.json");
    os << R"({"check": "duality", "p": "3/2", "delta": "1/4", "seeds": [5], "tolerances": {"tol": 1e-9}})";
  }
  const Run a = run("--config cli_config.json --no-timing verify --check limit");
  const Run b = run("--no-timing --p 3/2 --delta 1/4 --seed 5 verify --check duality");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("field output is a grid CSV that round-trips") {
  REQUIRE(run("--delta 1/4 --out cli_field.csv field --op skeleton --eval dense "
              "--f '{\"kind\":\"linear\",\"params\":{\"coeffs\":[0.25,0.5],\"offset\":3}}'")
              .code == 0);
  const skelmax::SampledField f = skelmax::load_grid_csv("cli_field.csv");
  CHECK(f.spec().dims[0] == 16);
  skelmax::save_grid_csv("cli_field2.csv", f);
  CHECK(slurp("cli_field.csv") == slurp("cli_field2.csv"));
  CHECK(skelmax::load_grid_csv("cli_field2.csv") == f);
  REQUIRE(run("--delta 1/4 --out cli_weight.csv field --op weight --weight twovalue:K=4 --eval dense").code == 0);
  CHECK((skelmax::load_grid_csv("cli_weight.csv").values() > 0).all());
}

TEST_CASE("select summary and load CSV") {
  const Run js = run("--delta 1/16 select --u 100");
  REQUIRE(js.code == 0);
  const auto j = nlohmann::json::parse(js.out);
  CHECK(j["u"] == 100);
  CHECK(j["exponent"] == 0.625);
  CHECK(j["pass"] == true);
  const Run csv = run("--delta 1/16 --format csv select --u 100");
  REQUIRE(csv.code == 0);
  CHECK(csv.out.rfind("plane_key,count\n", 0) == 0);
}

TEST_CASE("scaling report layout") {
  const Run r = run("--p 2 --no-timing scaling --deltas 1/2,1/3,1/4 --eval centers");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::ordered_json::parse(r.out);
  CHECK(j["deltas"].size() == 3);
  CHECK(j.contains("slope"));
  CHECK(j.contains("residuals"));
  CHECK(j["norm_kind"] == "empirical lower bound on the operator norm");
}
