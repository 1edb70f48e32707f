// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "oracle.hpp"
#include "skelmax/grid_io.hpp"
#include "skelmax/harness.hpp"
#include "skelmax/parallel.hpp"

using namespace skelmax;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(SKELMAX_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fmt(double v) { return format_real(v); }

bool rel_close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

const std::vector<IndexVec> kZ0 = {IndexVec::Zero(2)};

Outcome ac1() {
  Outcome o{true, ""};
  for (int m : {8, 16}) {
    const double d = 1.0 / m;
    const std::string delta = "1/" + std::to_string(m);
    const Run sk = run_cli("apconst --class skeleton --p 2 --delta " + delta + " --weight constant");
    const Run nl = run_cli("apconst --class nonlinear --p 2 --delta " + delta + " --weight constant");
    if (sk.code != 0 || nl.code != 0) return {false, "apconst exited with " + std::to_string(sk.code) + "/" + std::to_string(nl.code)};
    const double vs = nlohmann::json::parse(sk.out)["value"].get<double>();
    const double vn = nlohmann::json::parse(nl.out)["value"].get<double>();
    const bool ok = rel_close(vs, d / (4 * (1 + d)), 1e-9) && rel_close(vn, d / 16, 1e-9);
    o.pass = o.pass && ok;
    o.detail += "delta=" + delta + " skeleton=" + fmt(vs) + " nonlinear=" + fmt(vn) + "; ";
  }
  return o;
}

Outcome ac2() {
  std::size_t failures = 0, count = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (double p : {2.0, 1.5}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const CheckReport r = duality_instance(p, Delta{8}, seed);
      ++count;
      if (!r.pass || r.slack < 0) ++failures;
      min_slack = std::min(min_slack, r.slack);
    }
  }
  return {failures == 0, std::to_string(count) + " instances, " + std::to_string(failures) + " failures, min slack " + fmt(min_slack)};
}

Outcome ac3() {
  Outcome o{true, ""};
  for (std::size_t u : {64u, 256u, 1024u}) {
    const CheckReport r = selection_check(u, 100, 1000 * u);
    o.pass = o.pass && r.pass;
    o.detail += "u=" + std::to_string(u) + " max=" + fmt(r.lhs) + " bound=" + fmt(r.rhs) + " mean greedy/random=" +
                fmt(r.details["mean_greedy_max_load"].get<double>()) + "/" +
                fmt(r.details["mean_random_max_load"].get<double>()) + "; ";
  }
  return o;
}

Outcome ac4() {
  const std::vector<double> ps = {4.0 / 3, 1.5, 2, 3};
  const CheckReport r = monotone_check(Delta{8}, ps, 20, 0);
  return {r.pass, "20 weights, largest consecutive ratio " + fmt(r.lhs)};
}

Outcome ac5() {
  const std::vector<double> Ks = {1.5, 2, 4, 8, 16};
  const CheckReport r = limit_check(Delta{8}, 1.01, Ks);
  return {r.pass, "largest relative gap " + fmt(r.lhs) + " (limit 0.05)"};
}

const std::vector<Delta> kDeltas = {Delta{8}, Delta{16}, Delta{32}, Delta{64}};

std::string rows_of(const ScalingReport& s) {
  std::string out;
  for (const auto& row : s.rows) out += row.delta.str() + ":norm=" + fmt(row.norm) + ",C=" + fmt(row.fitted_c) + " ";
  return out;
}

ScalingReport& unweighted_p2() {
  static ScalingReport rep = scaling_experiment(2, kDeltas, WeightSpec{}, 0);
  return rep;
}

Outcome ac6() {
  const ScalingReport& one = unweighted_p2();
  const ScalingReport cb = scaling_experiment(2, kDeltas, WeightSpec::parse("checkerboard:K=4,period=1/2"), 0);
  const bool pass = one.c_ratio <= 2 && cb.c_ratio <= 2;
  return {pass, "constant C ratio " + fmt(one.c_ratio) + " [" + rows_of(one) + "]; checkerboard C ratio " +
                    fmt(cb.c_ratio) + " [" + rows_of(cb) + "]"};
}

Outcome ac7() {
  const ScalingReport& two = unweighted_p2();
  const ScalingReport one = scaling_experiment(1, kDeltas, WeightSpec{}, 0);
  const bool pass = two.slope <= 0.125 + 0.05 && one.slope <= 0.25 + 0.05;
  return {pass, "p=1 slope " + fmt(one.slope) + " (ceiling 0.3, max residual " + fmt(one.max_residual) +
                    "); p=2 slope " + fmt(two.slope) + " (ceiling 0.175, max residual " + fmt(two.max_residual) + ")"};
}

Outcome ac8() {
  const Delta d{8};
  const GridSpec g = covering_grid(kZ0, d);
  const auto sample = random_skeleton_samples(CellLattice(IndexVec::Zero(2), d), 100, 8);
  Outcome o{true, ""};
  for (const char* spec : {"twovalue:K=4", "power:alpha=1"}) {
    const CheckReport r = check_necessary_chain(make_weight(WeightSpec::parse(spec), g), 2, d, sample);
    o.pass = o.pass && r.pass;
    o.detail += std::string(spec) + ": containment failures " + r.details["containment_failures"].dump() +
                ", chain failures " + r.details["chain_failures"].dump() + "/100; ";
  }
  return o;
}

Outcome ac9() {
  const Delta d{8};
  const GridSpec g = covering_grid(kZ0, d, 4, 4);
  Outcome o{true, ""};
  for (const char* spec : {"constant", "twovalue:K=4", "power:alpha=1"}) {
    const CheckReport r = check_ap_embedding(make_weight(WeightSpec::parse(spec), g), 2, d, IndexVec::Zero(2));
    o.pass = o.pass && r.pass;
    o.detail += std::string(spec) + ": " + fmt(r.lhs) + " <= " + fmt(r.rhs) + "; ";
  }
  return o;
}

Outcome ac10() {
  const double rel = 1e-12;
  const Delta d{4};
  const GridSpec g = covering_grid(kZ0, d, 8);  // h = 1/32
  std::size_t checked = 0, bad = 0;
  double worst = 0;
  auto cmp = [&](double got, double want) {
    ++checked;
    const double e = std::abs(got - want) / std::max(std::abs(got), std::abs(want));
    worst = std::max(worst, e);
    if (!(e <= rel)) ++bad;
  };
  const SampledField f = oracle::random_field(g, 1, 0, 2);
  const PrefixTable ft(f);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 4);
  for (int t = 0; t < 50; ++t) {
    double a = u(rng), b = u(rng), c = u(rng), e = u(rng);
    const Box box = oracle::make_box(std::min(a, b), std::max(a, b) + 0.01, std::min(c, e), std::max(c, e) + 0.01);
    cmp(box_sum(ft, box), oracle::box_integral(f, box));
  }
  const CellLattice lat(IndexVec::Zero(2), d);
  const RhoAssignment rho = RhoAssignment::random(lat, 3);
  const FaceSelection sel = select_faces(rho.skeletons(), d);
  const Eigen::ArrayXd lin = linearized_maximal(ft, rho, sel, d.value());
  for (Eigen::Index i = 0; i < lat.size(); ++i) {
    const Point c = lat.center(i);
    const auto sides = oracle::square_faces(c[0], c[1], rho.radius(static_cast<std::size_t>(i)), d.value());
    cmp(lin[i], oracle::box_mean(f, sides[static_cast<std::size_t>(sel.choice[static_cast<std::size_t>(i)])]));
  }
  std::vector<Point> pts;
  for (Eigen::Index i = 0; i < lat.size(); i += 5) pts.push_back(lat.center(i));
  const Eigen::ArrayXd mx = skeleton_maximal(ft, SkeletonParams::lattice(d), pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    cmp(mx[static_cast<Eigen::Index>(i)], oracle::skeleton_maximal(f, pts[i][0], pts[i][1], d.m, d.value()));

  const WeightField w(random_weight_field(g, d, 4, 0.7), d);
  for (double p : {1.5, 2.0, 3.0}) {
    double upper = 0, local = 0;
    for (Eigen::Index i = 0; i < lat.size(); ++i) {
      const Point c = lat.center(i);
      for (int s = d.m; s <= 2 * d.m; ++s) {
        const auto sides = oracle::square_faces(c[0], c[1], static_cast<double>(s) / d.m, d.value());
        for (std::size_t j = 0; j < 4; ++j) {
          const double v = oracle::skeleton_term(w.field(), p, lat.cell(i), sides[j]);
          upper = std::max(upper, v);
          if (s == rho.steps()[static_cast<std::size_t>(i)] && static_cast<int>(j) == sel.choice[static_cast<std::size_t>(i)])
            local = std::max(local, v);
        }
      }
    }
    cmp(ap_skeleton_upper(w, p, kZ0).value, upper);
    cmp(ap_skeleton_local(w, rho, sel, p).value, local);
    double nl = 0;
    for (const auto& s : lattice_samples(kZ0, d)) nl = std::max(nl, oracle::nonlinear_term(w.field(), p, s.x[0], s.x[1], s.r, d.value()));
    cmp(ap_nonlinear(w, p, lattice_samples(kZ0, d)).value, nl);
  }
  double a1 = 0;
  for (Eigen::Index i = 0; i < lat.size(); ++i) {
    const Point c = lat.center(i);
    for (int s = d.m; s <= 2 * d.m; ++s)
      for (const auto& b : oracle::square_faces(c[0], c[1], static_cast<double>(s) / d.m, d.value()))
        a1 = std::max(a1, oracle::a1_term(w.field(), lat.cell(i), b));
  }
  cmp(a1_skeleton_upper(w, kZ0).value, a1);
  // Cubic constant over a 20 x 20 cell window.
  const Box window = oracle::make_box(0, 20.0 / 32, 0.25, 0.25 + 20.0 / 32);
  for (double p : {1.5, 2.0, 3.0}) cmp(ap_cubic(w.field(), p, {}, window).value, oracle::ap_cubic(w.field(), p, 96, 104, 20, 20));
  return {bad == 0, std::to_string(checked) + " comparisons, " + std::to_string(bad) + " beyond 1e-12, worst " + fmt(worst)};
}

Outcome ac11() {
  const std::vector<std::string> suite = {
      "--p 2 --delta 1/8 apconst --class skeleton --weight constant",
      "--p 2 --delta 1/16 apconst --class nonlinear --weight constant",
      "--p 3/2 --delta 1/8 apconst --class skeleton --weight twovalue:K=4",
      "--delta 1/8 apconst --class a1 --weight checkerboard:K=4",
      "--p 2 --delta 1/8 apconst --class cubic --weight power:alpha=1",
      "--p 2 --delta 1/8 --seed 0 verify --check duality --instances 50",
      "--p 3/2 --delta 1/8 --seed 0 verify --check duality --instances 50",
      "--p 2 --delta 1/8 --seed 0 verify --check domination --instances 10",
      "--seed 0 verify --check selection --u 1024 --instances 100",
      "--delta 1/8 --seed 0 verify --check monotone --instances 20",
      "--delta 1/8 verify --check limit --K 1.5,2,4,8,16",
      "--p 2 --delta 1/8 --weight twovalue:K=4 --seed 8 verify --check necessary --instances 100",
      "--p 2 --delta 1/8 --weight power:alpha=1 verify --check embedding",
      "--p 2 --delta 1/8 --weight checkerboard:K=4 verify --check sufficient",
      "--p 2 --delta 1/16 verify --check buckley",
      "--delta 1/16 --seed 0 select --u 256",
      "--delta 1/8 field --op skeleton --f '{\"kind\":\"box\",\"params\":{\"lower\":[0,0],\"upper\":[1,2],\"inside\":3,\"outside\":1}}'",
      "--delta 1/8 field --rho greedy --op linearized --f '{\"kind\":\"power\",\"params\":{\"alpha\":1,\"center\":[0.3,0.6]}}'",
      "--p 2 --weight checkerboard:K=4,period=1/2 scaling",
  };
  std::size_t differ = 0, failed = 0;
  std::string which;
  for (const auto& args : suite) {
    const Run a = run_cli("--no-timing --threads 1 " + args);
    const Run b = run_cli("--no-timing --threads 4 " + args);
    if (a.code != 0 || b.code != 0) {
      ++failed;
      which += "[exit " + std::to_string(a.code) + "/" + std::to_string(b.code) + ": " + args + "] ";
    }
    if (a.out != b.out || a.out.empty()) {
      ++differ;
      which += "[differs: " + args + "] ";
    }
  }
  return {differ == 0 && failed == 0,
          std::to_string(suite.size()) + " runs compared, " + std::to_string(differ) + " differ, " +
              std::to_string(failed) + " nonzero exits " + which};
}

}  // namespace

int main() {
  const struct {
    const char* id;
    const char* title;
    double budget_s;
    std::function<Outcome()> fn;
  } criteria[] = {
      {"AC1", "constant-weight constants", 10, ac1},
      {"AC2", "duality proposition", 120, ac2},
      {"AC3", "selection bound", 60, ac3},
      {"AC4", "monotonicity in p", 120, ac4},
      {"AC5", "p -> 1 limit", 60, ac5},
      {"AC6", "sufficiency scaling", 1200, ac6},
      {"AC7", "unweighted exponent ceiling", 1200, ac7},
      {"AC8", "necessary chain", 300, ac8},
      {"AC9", "embedding of cubic weights", 300, ac9},
      {"AC10", "oracle equivalence", 120, ac10},
      {"AC11", "determinism across thread counts", 1e9, ac11},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::ostringstream line;
    line << (pass ? "PASS " : "FAIL ") << c.id << " " << c.title << " (" << std::fixed << std::setprecision(1) << secs
         << " s";
    if (c.budget_s < 1e8) line << ", budget " << c.budget_s << " s";
    line << ")" << (in_time ? "" : " OVER BUDGET") << ": " << o.detail;
    std::cout << line.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria pass" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
