// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include "skelmax/harness.hpp"

#include <chrono>
#include <limits>
#include <random>

#include "skelmax/parallel.hpp"

namespace skelmax {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

IndexVec origin2() { return IndexVec::Zero(2); }

/// Random field, iid uniform on delta-cells inside a random box of 7Q_z with sides in [1, 7].
SampledField random_support_field(const LocalFrame& frame, std::mt19937_64& rng) {
  const Box pad = frame.padded_cube();
  FamilyMember m;
  m.kind = FamilyMember::Kind::random_field;
  m.box.lower.resize(frame.dim());
  m.box.upper.resize(frame.dim());
  for (int j = 0; j < frame.dim(); ++j) {
    const double side = std::uniform_real_distribution<double>(1.0, 7.0)(rng);
    const double lo = std::uniform_real_distribution<double>(pad.lower[j], pad.upper[j] - side)(rng);
    m.box.lower[j] = lo;
    m.box.upper[j] = lo + side;
  }
  m.seed = rng();
  const GridSpec grid = frame.grid();
  return materialize(m, grid, SampledField(grid, SampledField::Values::Ones(grid.size())), 2.0, frame.delta);
}

}  // namespace

SampledField random_weight_field(const GridSpec& grid, Delta delta, std::uint64_t seed, double sigma) {
  const auto per = static_cast<Eigen::Index>(std::llround(delta.value() / grid.h));
  if (per < 1) throw InvalidInput("quadrature grid coarser than delta");
  const IndexVec cdims = (grid.dims.array() + per - 1) / per;
  const GridSpec coarse(grid.origin, delta.value(), cdims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> vals(static_cast<std::size_t>(coarse.size()));
  for (auto& v : vals) v = std::exp(normal(rng));
  SampledField::Values out(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    IndexVec c = grid.unravel(i);
    for (int j = 0; j < grid.dim(); ++j) c[j] /= per;
    out[i] = vals[static_cast<std::size_t>(coarse.linear(c))];
  }
  return {grid, std::move(out)};
}

WeightSpec random_weight_spec(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  WeightSpec s;
  switch (seed % 3) {
    case 0:
      s.kind = "twovalue";
      s.K = std::exp(uniform(std::log(1.5), std::log(16.0)));
      s.axis = static_cast<int>(rng() % 2);
      s.split = uniform(-0.5, 1.5);
      break;
    case 1: {
      s.kind = "checkerboard";
      s.K = std::exp(uniform(std::log(1.5), std::log(16.0)));
      const double periods[] = {0.25, 0.5, 1.0};
      s.period = periods[rng() % 3];
      break;
    }
    default:
      s.kind = "power";
      s.alpha = uniform(-1.0, 2.0);
      s.center = {uniform(-0.5, 1.5), uniform(-0.5, 1.5)};
      break;
  }
  return s;
}

CheckReport duality_instance(double p, Delta delta, std::uint64_t seed) {
  const LocalFrame frame(origin2(), delta);
  std::mt19937_64 rng(seed);
  const SampledField w = random_weight_field(frame.grid(), delta, rng());
  const SampledField f = random_support_field(frame, rng);
  const RhoAssignment rho = RhoAssignment::random(frame.lattice(), rng());
  const auto skels = rho.skeletons(1);
  const auto strategy = seed % 2 == 0 ? SelectionStrategy::greedy : SelectionStrategy::random;
  const FaceSelection sel = select_faces(skels, delta, strategy, rng());
  CheckReport rep = check_duality_prop(f, w, p, rho, sel, frame);
  rep.details["seed"] = seed;
  rep.details["selection"] = strategy == SelectionStrategy::greedy ? "greedy" : "random";
  return rep;
}

CheckReport domination_instance(double p, Delta delta, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const LocalFrame frame(origin2(), delta);
  std::mt19937_64 rng(seed);
  const SampledField w = random_weight_field(frame.grid(), delta, rng());
  const SampledField f = random_support_field(frame, rng);
  const DominationReport d = check_local_domination(f, w, p, frame);
  CheckReport rep;
  rep.name = "domination";
  rep.digest = params_digest({{"check", "domination"}, {"p", p}, {"delta", delta.str()}, {"seed", seed}});
  rep.lhs = d.lhs;
  rep.rhs = d.rhs;
  rep.settle();
  rep.details["seed"] = seed;
  rep.seconds = seconds_since(t0);
  return rep;
}

CheckReport selection_check(std::size_t u, int families, std::uint64_t seed, double C) {
  const auto t0 = Clock::now();
  if (u < 1 || families < 1) throw InvalidInput("selection check needs u >= 1 and at least one family");
  int m = 1;
  while (static_cast<std::size_t>(m) * static_cast<std::size_t>(m) < u) ++m;
  const Delta delta{m};
  std::vector<int> greedy(static_cast<std::size_t>(families)), random(greedy.size());
  parallel_for(greedy.size(), [&](std::size_t t) {
    const auto skels = random_lattice_family(origin2(), delta, u, seed + t);
    greedy[t] = max_load(select_faces(skels, delta, SelectionStrategy::greedy));
    random[t] = max_load(select_faces(skels, delta, SelectionStrategy::random, seed + t));
  });
  const LoadReport bound = verify_selection_bound(FaceSelection{}, u, 2, 1, C);
  double mean_g = 0, mean_r = 0;
  int worst = 0;
  for (std::size_t t = 0; t < greedy.size(); ++t) {
    mean_g += greedy[t];
    mean_r += random[t];
    worst = std::max(worst, greedy[t]);
  }
  mean_g /= families;
  mean_r /= families;
  CheckReport rep;
  rep.name = "selection";
  rep.tol = 0;
  rep.digest = params_digest({{"check", "selection"}, {"u", u}, {"families", families}, {"seed", seed}, {"C", C}});
  rep.lhs = worst;
  rep.rhs = bound.threshold;
  rep.settle();
  rep.pass = rep.pass && mean_g <= mean_r;
  rep.details["delta"] = delta.str();
  rep.details["exponent"] = bound.exponent;
  rep.details["mean_greedy_max_load"] = mean_g;
  rep.details["mean_random_max_load"] = mean_r;
  rep.seconds = seconds_since(t0);
  return rep;
}

CheckReport monotone_check(Delta delta, std::span<const double> p_list, int weights, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const std::vector<IndexVec> zs = {origin2()};
  const GridSpec grid = covering_grid(zs, delta);
  double worst = 0;
  bool pass = true;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int t = 0; t < weights; ++t) {
    const WeightSpec spec = random_weight_spec(seed + static_cast<std::uint64_t>(t));
    const WeightField wf(make_weight(spec, grid), delta);
    RhoFamily fam;
    fam.seed = seed + static_cast<std::uint64_t>(t);
    const MonotoneTable table = check_p_monotone(wf, p_list, zs, fam);
    pass = pass && table.pass;
    nlohmann::ordered_json upper = nlohmann::ordered_json::array(), lower = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      upper.push_back(table.rows[i].upper);
      lower.push_back(table.rows[i].lower);
      if (i > 0) {
        worst = std::max(worst, table.rows[i].upper / table.rows[i - 1].upper);
        worst = std::max(worst, table.rows[i].lower / table.rows[i - 1].lower);
      }
    }
    rows.push_back({{"weight", nlohmann::ordered_json::parse(spec.str())}, {"upper", upper}, {"lower", lower},
                    {"pass", table.pass}});
  }
  CheckReport rep;
  rep.name = "monotone";
  rep.digest = params_digest({{"check", "monotone"}, {"delta", delta.str()}, {"p", std::vector<double>(p_list.begin(), p_list.end())},
                              {"weights", weights}, {"seed", seed}});
  rep.lhs = worst;
  rep.rhs = 1;
  rep.settle();
  rep.pass = rep.pass && pass;
  rep.details["lhs_kind"] = "largest ratio of consecutive constants";
  rep.details["rows"] = rows;
  rep.seconds = seconds_since(t0);
  return rep;
}

CheckReport limit_check(Delta delta, double p, std::span<const double> K_list) {
  const auto t0 = Clock::now();
  const std::vector<IndexVec> zs = {origin2()};
  const GridSpec grid = covering_grid(zs, delta);
  double worst = 0;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (double K : K_list) {
    WeightSpec spec;
    spec.kind = "twovalue";
    spec.K = K;
    spec.split = 0.5;
    const WeightField wf(make_weight(spec, grid), delta);
    const double a1 = a1_skeleton_upper(wf, zs).value;
    const double ap = ap_skeleton_upper(wf, p, zs).value;
    const double gap = std::abs(ap - a1) / a1;
    worst = std::max(worst, gap);
    rows.push_back({{"K", K}, {"A1", a1}, {"Ap", ap}, {"relative_gap", gap}});
  }
  CheckReport rep;
  rep.name = "limit";
  rep.tol = 0;
  rep.digest = params_digest({{"check", "limit"}, {"delta", delta.str()}, {"p", p},
                              {"K", std::vector<double>(K_list.begin(), K_list.end())}});
  rep.lhs = worst;
  rep.rhs = 0.05;
  rep.settle();
  rep.details["rows"] = rows;
  rep.seconds = seconds_since(t0);
  return rep;
}

CheckReport aggregate(const std::string& name, std::span<const CheckReport> reports) {
  if (reports.empty()) throw InvalidInput("nothing to aggregate");
  CheckReport out;
  out.name = name;
  double worst = -std::numeric_limits<double>::infinity();
  bool pass = true;
  std::size_t failures = 0;
  std::string digests;
  for (const auto& r : reports) {
    const double ratio = r.rhs > 0 ? r.lhs / r.rhs : std::numeric_limits<double>::infinity();
    if (ratio > worst) {
      worst = ratio;
      out.lhs = r.lhs;
      out.rhs = r.rhs;
      out.tol = r.tol;
    }
    pass = pass && r.pass;
    if (!r.pass) ++failures;
    out.seconds += r.seconds;
    digests += r.digest;
  }
  out.digest = params_digest({{"aggregate", name}, {"digests", digests}});
  out.slack = out.rhs - out.lhs;
  out.pass = pass;
  out.details["instances"] = reports.size();
  out.details["failures"] = failures;
  return out;
}

}  // namespace skelmax
