// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "skelmax/grid_io.hpp"
#include "skelmax/harness.hpp"
#include "skelmax/verify.hpp"

using namespace skelmax;
using oracle::pt;

namespace {

const std::vector<IndexVec> kZ0 = {IndexVec::Zero(2)};

}  // namespace

TEST_CASE("duality coefficients: examples") {
  Eigen::ArrayXd a(2);
  a << 3, 4;
  const Eigen::ArrayXd b = duality_coefficients(a, 2);
  CHECK(b[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(duality_coefficients(Eigen::ArrayXd::Zero(3), 2), InvalidInput);
  CHECK_THROWS_AS(duality_coefficients(-a, 2), InvalidInput);
  CHECK_THROWS_AS(duality_coefficients(a, 1), InvalidInput);
}

TEST_CASE("duality coefficients: Hoelder extremality on random vectors") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0, 1);
  for (double p : {4.0 / 3, 1.5, 2.0, 3.0}) {
    const double q = p / (p - 1);
    for (int t = 0; t < 1000; ++t) {
      const auto len = static_cast<Eigen::Index>(1 + rng() % 40);
      Eigen::ArrayXd a(len);
      for (Eigen::Index i = 0; i < len; ++i) a[i] = (rng() % 5 == 0) ? 0.0 : u(rng) * std::pow(10.0, static_cast<int>(rng() % 7) - 3);
      if (!(a.maxCoeff() > 0)) a[0] = 1;
      const Eigen::ArrayXd b = duality_coefficients(a, p);
      const double norm = std::pow(a.pow(p).sum(), 1 / p);
      CHECK(std::abs(b.pow(q).sum() - 1) <= 1e-12);
      CHECK(std::abs((a * b).sum() - norm) <= 1e-12 * norm);
    }
  }
}

TEST_CASE("indicator sums match the oracle") {
  const GridSpec g = oracle::square_grid(-3, -3, 1.0 / 32, 224);
  const CellLattice lat(IndexVec::Zero(2), Delta{4});
  const RhoAssignment rho = RhoAssignment::random(lat, 3);
  const FaceSelection sel = select_faces(rho.skeletons(), lat.delta());
  std::vector<FattenedFace> fs;
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    fs.push_back(face(rho.skeletons()[i], 0.25, sel.choice[i]));
    boxes.push_back(fs.back().box);
  }
  std::mt19937_64 rng(6);
  Eigen::ArrayXd t(static_cast<Eigen::Index>(fs.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = std::uniform_real_distribution<double>(0, 2)(rng);
  const SampledField sum = indicator_sum(t, boxes, g);
  for (Eigen::Index c = 0; c < g.size(); c += 7) {
    double want = 0;
    for (std::size_t i = 0; i < boxes.size(); ++i)
      if (oracle::cell_in_box(g, c, boxes[i])) want += t[static_cast<Eigen::Index>(i)];
    CHECK(std::abs(sum[c] - want) <= 1e-12 * std::max(1.0, want));
  }
  const SampledField w = oracle::random_field(g, 9, 0.5, 2);
  const Box region = oracle::make_box(-3, 4, -3, 4);
  for (double p : {1.5, 2.0, 3.0}) {
    const double q = p / (p - 1);
    long double s = 0;
    for (Eigen::Index c = 0; c < g.size(); ++c) {
      double v = 0;
      for (std::size_t i = 0; i < boxes.size(); ++i)
        if (oracle::cell_in_box(g, c, boxes[i])) v += t[static_cast<Eigen::Index>(i)];
      s += std::pow(v, q) * std::pow(w[c], 1 - q);
    }
    const double want = std::pow(static_cast<double>(s) / (32.0 * 32.0), 1 / q);
    CHECK(oracle::close(indicator_sum_norm(t, fs, w, p, region), want, 1e-12));
  }
}

TEST_CASE("indicator sum norm: disjoint unit faces with w = 1") {
  // Two disjoint faces of measure 2 delta (2 r + 2 delta) with coefficient 1: norm = (2 |face|)^(1/p').
  const LocalFrame frame(IndexVec::Zero(2), Delta{4});
  const GridSpec g = frame.grid();
  const SampledField w(g, SampledField::Values::Ones(g.size()));
  const Skeleton s(pt(0.5, 0.5), 1, 1);
  std::vector<FattenedFace> fs = {face(s, 0.25, 0), face(s, 0.25, 1)};
  Eigen::ArrayXd t = Eigen::ArrayXd::Ones(2);
  const double area = 0.5 * 2.5;
  CHECK(oracle::close(indicator_sum_norm(t, fs, w, 2, frame.padded_cube()), std::sqrt(2 * area), 1e-12));
  CHECK(oracle::close(indicator_sum_norm(t, fs, w, 3, frame.padded_cube()), std::pow(2 * area, 2.0 / 3), 1e-12));
}

TEST_CASE("duality proposition holds on random instances") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (double p : {1.5, 2.0, 3.0}) {
      const CheckReport rep = duality_instance(p, Delta{4}, seed);
      CAPTURE(seed);
      CHECK(rep.pass);
      CHECK(rep.slack >= 0);
    }
  }
}

TEST_CASE("duality proposition rejects negative f") {
  const LocalFrame frame(IndexVec::Zero(2), Delta{4});
  const GridSpec g = frame.grid();
  const SampledField f(g, -SampledField::Values::Ones(g.size()));
  const SampledField w(g, SampledField::Values::Ones(g.size()));
  const RhoAssignment rho = RhoAssignment::constant(frame.lattice(), 1);
  const FaceSelection sel = select_faces(rho.skeletons(), frame.delta);
  CHECK_THROWS_AS(check_duality_prop(f, w, 2, rho, sel, frame), InvalidInput);
}

TEST_CASE("function family composition") {
  const LocalFrame frame(IndexVec::Zero(2), Delta{8});
  const FunctionFamily fam = FunctionFamily::v1(frame, 2, 1);
  using K = FamilyMember::Kind;
  std::map<K, int> counts;
  for (const auto& m : fam.members) ++counts[m.kind];
  CHECK(fam.version == "v1");
  CHECK(counts[K::constant] == 1);
  CHECK(counts[K::skeleton] == 16 * 3);
  CHECK(counts[K::box] == 50);
  CHECK(counts[K::random_field] == 50);
  CHECK(counts[K::dual_skeleton] == 3);
  CHECK(counts[K::dual_box] == 2);
  const FunctionFamily one = FunctionFamily::v1(frame, 1, 1);
  CHECK(one.members.size() == fam.members.size() - 5);
  const FunctionFamily again = FunctionFamily::v1(frame, 2, 1);
  for (std::size_t i = 0; i < fam.members.size(); ++i) CHECK(again.members[i].label == fam.members[i].label);
}

TEST_CASE("materialized members") {
  const LocalFrame frame(IndexVec::Zero(2), Delta{4});
  const GridSpec g = frame.grid();
  const SampledField w = random_weight_field(g, Delta{4}, 2);
  const FunctionFamily fam = FunctionFamily::v1(frame, 2, 3, 2, 2);
  for (const auto& m : fam.members) {
    const SampledField f = materialize(m, g, w, 2, Delta{4});
    CHECK((f.values() >= 0).all());
    if (m.kind == FamilyMember::Kind::skeleton) {
      const double meas = f.values().sum() * g.cell_volume();
      CHECK(oracle::close(meas, skeleton_measure(m.skeleton, 0.25), 1e-12));
    }
    if (m.kind == FamilyMember::Kind::dual_box) {
      for (Eigen::Index i = 0; i < g.size(); ++i)
        if (f[i] != 0) CHECK(oracle::close(f[i], 1 / w[i], 1e-15));
    }
  }
}

TEST_CASE("empirical norm of one member against the oracle") {
  const LocalFrame frame(IndexVec::Zero(2), Delta{4});
  const GridSpec g = frame.grid();
  const SampledField w = random_weight_field(g, Delta{4}, 5, 0.5);
  FunctionFamily fam;
  FamilyMember m;
  m.kind = FamilyMember::Kind::skeleton;
  m.skeleton = Skeleton(pt(0.375, 0.625), 1.5, 1);
  m.label = "s";
  fam.members.push_back(m);
  const double p = 2;
  const OpNormResult got = empirical_opnorm(NormOperator::skeleton, w, p, frame, fam, EvalMode::centers);
  const SampledField f = materialize(m, g, w, p, Delta{4});
  const CellLattice lat = frame.lattice();
  long double num = 0, den = 0;
  for (Eigen::Index i = 0; i < lat.size(); ++i) {
    const Point c = lat.center(i);
    const double mv = oracle::skeleton_maximal(f, c[0], c[1], 4, 0.25);
    num += std::pow(mv, p) * oracle::box_integral(w, lat.cell(i));
  }
  for (Eigen::Index i = 0; i < g.size(); ++i) den += std::pow(f[i], p) * w[i] * g.cell_volume();
  CHECK(oracle::close(got.ratio, std::sqrt(static_cast<double>(num / den)), 1e-12));
}

TEST_CASE("constant member has ratio 1 for every weight") {
  const LocalFrame frame(IndexVec::Zero(2), Delta{4});
  FunctionFamily fam;
  fam.members.push_back({FamilyMember::Kind::constant, "constant", {}, {}, 0});
  const SampledField w = random_weight_field(frame.grid(), Delta{4}, 1);
  for (auto mode : {EvalMode::dense, EvalMode::centers})
    CHECK(oracle::close(empirical_opnorm(NormOperator::skeleton, w, 2, frame, fam, mode).ratio, 1, 1e-12));
  CHECK(oracle::close(empirical_opnorm(NormOperator::hardy_littlewood, w, 2, frame, fam).ratio, 1, 1e-12));
}

TEST_CASE("admissible exponents and default constant") {
  CHECK(admissible_sufficient_p(1));
  CHECK(admissible_sufficient_p(2));
  CHECK(admissible_sufficient_p(1.5));
  CHECK(admissible_sufficient_p(4.0 / 3));
  CHECK_FALSE(admissible_sufficient_p(3));
  CHECK_FALSE(admissible_sufficient_p(1.7));
  CHECK_FALSE(admissible_sufficient_p(0.5));
  CHECK(default_sufficient_constant(1) == doctest::Approx(3 * 392));
  CHECK(default_sufficient_constant(2) == doctest::Approx(3 * std::sqrt(392.0)));
}

TEST_CASE("sufficient bound with w = 1") {
  const LocalFrame frame(IndexVec::Zero(2), Delta{4});
  const SampledField w(frame.grid(), SampledField::Values::Ones(frame.grid().size()));
  const FunctionFamily fam = FunctionFamily::v1(frame, 2, 1, 5, 5);
  const SufficientResult res = check_sufficient(w, 2, frame, fam, {}, EvalMode::centers);
  CHECK(res.report.pass);
  CHECK(oracle::close(res.constant, 0.25 / (4 * 1.25), 1e-12));
  const double scale = std::pow(0.25, -5.0 / 8) * std::sqrt(res.constant);
  CHECK(oracle::close(res.fitted_c, res.report.lhs / scale, 1e-12));
  CHECK(oracle::close(res.report.rhs, default_sufficient_constant(2) * scale, 1e-12));
  CHECK_THROWS_AS(check_sufficient(w, 3, frame, fam), InvalidInput);
}

TEST_CASE("necessary chain with w = 1") {
  const Delta d{8};
  const GridSpec g = covering_grid(kZ0, d);
  const SampledField w(g, SampledField::Values::Ones(g.size()));
  const CellLattice lat(IndexVec::Zero(2), d);
  const auto sample = random_skeleton_samples(lat, 6, 4);
  const CheckReport rep = check_necessary_chain(w, 2, d, sample);
  CHECK(rep.pass);
  CHECK(rep.details["containment_failures"] == 0);
  // kappa is the count ratio (r + delta) / (4 (r + 4 delta)) of matching faces.
  const double r = rep.details["worst"]["r"].get<double>();
  const double dv = d.value();
  const double kappa = (r + dv) / (4 * (r + 4 * dv));
  CHECK(oracle::close(rep.details["worst"]["kappa"].get<double>(), kappa, 1e-12));
  CHECK(oracle::close(rep.lhs, kappa * kappa * dv * dv, 1e-12));
  // rhs = int over Q_delta(x~) of (M_{4 delta} 1_S)^2 by brute force.
  const auto wx = rep.details["worst"]["x"].get<std::vector<double>>();
  Point x = pt(wx[0], wx[1]);
  SampledField::Values fv = SampledField::Values::Zero(g.size());
  const auto sides = oracle::square_faces(x[0], x[1], r, dv);
  for (Eigen::Index i = 0; i < g.size(); ++i)
    for (const auto& b : sides)
      if (oracle::cell_in_box(g, i, b)) fv[i] = 1;
  const SampledField f(g, fv);
  long double rhs = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const Point y = g.midpoint(i);
    if ((y - x).cwiseAbs().maxCoeff() >= dv / 2) continue;
    rhs += std::pow(oracle::skeleton_maximal(f, y[0], y[1], d.m, 4 * dv), 2) * g.cell_volume();
  }
  CHECK(oracle::close(rep.rhs, static_cast<double>(rhs), 1e-12));
}

TEST_CASE("embedding with w = 1") {
  const Delta d{8};
  const GridSpec g = covering_grid(kZ0, d, 4, 4);
  const SampledField w(g, SampledField::Values::Ones(g.size()));
  const CheckReport rep = check_ap_embedding(w, 2, d, IndexVec::Zero(2));
  CHECK(rep.pass);
  CHECK(oracle::close(rep.lhs, 1.0 / 128, 1e-12));
  CHECK(oracle::close(rep.rhs, 16384, 1e-12));
  CHECK_THROWS_AS(check_ap_embedding(SampledField(covering_grid(kZ0, d), SampledField::Values::Ones(224 * 224)), 2, d,
                                     IndexVec::Zero(2)),
                  InvalidInput);
}

TEST_CASE("least-squares line") {
  const std::vector<double> x = {0, 1, 2, 3}, y = {1, 3, 5, 7};
  const auto [s, b] = fit_line(x, y);
  CHECK(s == doctest::Approx(2).epsilon(1e-13));
  CHECK(b == doctest::Approx(1).epsilon(1e-13));
  const std::vector<double> x1 = {1};
  CHECK_THROWS_AS(fit_line(x1, x1), InvalidInput);
  const std::vector<Delta> two = {Delta{8}, Delta{16}};
  CHECK_THROWS_AS(scaling_experiment(2, two, WeightSpec{}, 0), InvalidInput);
}

TEST_CASE("report serialization") {
  CheckReport r;
  r.name = "duality";
  r.digest = params_digest({{"a", 1}, {"b", "x"}});
  r.lhs = 0.1;
  r.rhs = 0.30000000000000004;
  r.settle();
  r.seconds = 1.25;
  CHECK(r.pass);
  CHECK(r.digest.size() == 16);
  CHECK(r.digest == params_digest({{"a", 1}, {"b", "x"}}));
  CHECK(r.digest != params_digest({{"b", "x"}, {"a", 1}}));
  CHECK(ledger_header() == "check,params_digest,lhs,rhs,slack,pass,seconds");
  const std::string row = ledger_row(r);
  CHECK(row == "duality," + r.digest + ",0.1,0.30000000000000004," + format_real(r.slack) + ",true,1.25");
  const std::string quiet = ledger_row(r, false);
  CHECK(quiet.substr(quiet.size() - 7) == ",true,0");
  CheckReport bad = r;
  bad.lhs = 1;
  bad.settle();
  CHECK_FALSE(bad.pass);
  CHECK(bad.slack < 0);
  const auto j = to_json(r, false);
  CHECK(j["seconds"] == 0.0);
  CHECK(j.begin().key() == "check");
}
