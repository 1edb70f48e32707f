// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include "skelmax/verify.hpp"

#include <chrono>
#include <cstdio>
#include <limits>
#include <random>

#include "skelmax/grid_io.hpp"
#include "skelmax/parallel.hpp"

namespace skelmax {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string field_hash(const SampledField& f) {
  std::uint64_t h = fnv1a(f.values().data(), static_cast<std::size_t>(f.values().size()) * sizeof(double));
  h = fnv1a(f.spec().dims.data(), static_cast<std::size_t>(f.spec().dims.size()) * sizeof(Eigen::Index), h);
  h = fnv1a(f.spec().origin.data(), static_cast<std::size_t>(f.spec().origin.size()) * sizeof(double), h);
  return hex64(fnv1a(&f.spec().h, sizeof(double), h));
}

std::vector<double> to_vec(const Point& x) { return {x.data(), x.data() + x.size()}; }
std::vector<Eigen::Index> to_vec(const IndexVec& x) { return {x.data(), x.data() + x.size()}; }

void require_p(double p) {
  if (!(p > 1) || !std::isfinite(p)) throw InvalidInput("p must be > 1");
}

double conjugate(double p) { return p / (p - 1); }

void require_grid(const SampledField& f, const GridSpec& grid, const char* what) {
  if (!(f.spec() == grid)) throw InvalidInput(std::string(what) + " must live on the frame grid");
}

}  // namespace

void CheckReport::settle() {
  slack = rhs - lhs;
  pass = lhs <= rhs * (1 + tol);
}

std::string params_digest(const nlohmann::ordered_json& params) {
  const std::string s = params.dump();
  return hex64(fnv1a(s.data(), s.size()));
}

Eigen::ArrayXd duality_coefficients(const Eigen::ArrayXd& a, double p) {
  require_p(p);
  if ((a < 0).any()) throw InvalidInput("duality coefficients need a nonnegative vector");
  const double norm = std::pow(pairwise_sum(a.pow(p)), 1.0 / p);
  if (!(norm > 0)) throw InvalidInput("duality coefficients need a nonzero vector");
  return (a / norm).pow(p - 1);
}

SampledField indicator_sum(const Eigen::ArrayXd& t, std::span<const Box> boxes, const GridSpec& grid) {
  if (t.size() != static_cast<Eigen::Index>(boxes.size())) throw InvalidInput("one coefficient per box required");
  const int n = grid.dim();
  std::vector<long double> diff(static_cast<std::size_t>(grid.size()), 0.0L);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const CellRange r = snap(grid, boxes[b]);
    if (r.empty()) continue;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
      IndexVec c(n);
      bool inside = true;
      int sign = 1;
      for (int j = 0; j < n; ++j) {
        if (corner & (1u << j)) {
          c[j] = r.hi[j];
          sign = -sign;
          inside = inside && c[j] < grid.dims[j];
        } else {
          c[j] = r.lo[j];
        }
      }
      if (inside) diff[static_cast<std::size_t>(grid.linear(c))] += sign * static_cast<long double>(t[static_cast<Eigen::Index>(b)]);
    }
  }
  Eigen::Index stride = 1;
  for (int j = 0; j < n; ++j) {
    const Eigen::Index len = grid.dims[j];
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      if ((i / stride) % len != 0) diff[static_cast<std::size_t>(i)] += diff[static_cast<std::size_t>(i - stride)];
    stride *= len;
  }
  SampledField::Values v(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) v[i] = static_cast<double>(diff[static_cast<std::size_t>(i)]);
  return {grid, std::move(v)};
}

double indicator_sum_norm(const Eigen::ArrayXd& t, std::span<const FattenedFace> faces, const SampledField& w,
                          double p, const Box& region) {
  require_p(p);
  if ((t < 0).any()) throw InvalidInput("indicator coefficients must be nonnegative");
  if ((w.values() <= 0).any()) throw DomainError("weight must be strictly positive");
  std::vector<Box> boxes;
  boxes.reserve(faces.size());
  for (const auto& f : faces) boxes.push_back(f.box);
  const SampledField g = indicator_sum(t, boxes, w.spec());
  const double q = conjugate(p);
  const SampledField dual = w.map([q](double v) { return std::pow(v, 1 - q); });
  return lp_norm(g, dual, q, region);
}

CheckReport check_duality_prop(const SampledField& f, const SampledField& w, double p, const RhoAssignment& rho,
                               const FaceSelection& sel, const LocalFrame& frame, double tol) {
  const auto t0 = Clock::now();
  require_p(p);
  const GridSpec grid = frame.grid();
  require_grid(f, grid, "f");
  require_grid(w, grid, "w");
  if ((f.values() < 0).any()) throw InvalidInput("duality check needs f >= 0");
  if (sel.size() != rho.size()) throw InvalidInput("selection and rho sizes differ");

  CheckReport rep;
  rep.name = "duality";
  rep.tol = tol;
  rep.digest = params_digest({{"check", "duality"}, {"p", p}, {"delta", frame.delta.str()}, {"z", to_vec(frame.z)},
                              {"f", field_hash(f)}, {"w", field_hash(w)}, {"rho", rho.steps()}, {"sel", sel.choice}});

  const Delta delta = frame.delta;
  const PrefixTable ft(f), wt(w);
  const Eigen::ArrayXd mt = linearized_maximal(ft, rho, sel, delta.value());
  const CellLattice& lattice = rho.lattice();
  const Box region = frame.padded_cube();
  const double fnorm = lp_norm(f, w, p, region);

  std::vector<std::vector<int>> classes;
  std::vector<std::string> names;
  if (sel.n == 2 && sel.k == 1) {
    auto part = orientation_partition(sel);
    classes = {std::move(part.vertical), std::move(part.horizontal)};
    names = {"vertical", "horizontal"};
  } else {
    classes = orientation_classes(sel);
    for (std::size_t c = 0; c < classes.size(); ++c) names.push_back("class" + std::to_string(c));
  }

  const auto skels = rho.skeletons(sel.k);
  rep.lhs = 0;
  rep.rhs = 0;
  double worst = -1;
  bool all_pass = true;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& E = classes[c];
    if (E.empty()) continue;
    Eigen::ArrayXd a(static_cast<Eigen::Index>(E.size())), mass(a.size());
    std::vector<FattenedFace> fs;
    for (std::size_t e = 0; e < E.size(); ++e) {
      const auto i = static_cast<Eigen::Index>(E[e]);
      mass[static_cast<Eigen::Index>(e)] = box_sum(wt, lattice.cell(i));
      // f >= 0, so a negative average is prefix-table cancellation.
      a[static_cast<Eigen::Index>(e)] = std::max(mt[i], 0.0) * std::pow(mass[static_cast<Eigen::Index>(e)], 1.0 / p);
      fs.push_back(face(skels[static_cast<std::size_t>(i)], delta.value(), sel.choice[static_cast<std::size_t>(i)]));
    }
    const double lhs = std::pow(pairwise_sum(a.pow(p)), 1.0 / p);
    double K = 0;
    if (lhs > 0) {
      const Eigen::ArrayXd b = duality_coefficients(a, p);
      Eigen::ArrayXd t(a.size());
      for (Eigen::Index e = 0; e < a.size(); ++e)
        t[e] = b[e] / snapped_measure(grid, fs[static_cast<std::size_t>(e)].box) * std::pow(mass[e], 1.0 / p);
      K = indicator_sum_norm(t, fs, w, p, region);
    }
    const double rhs = K * fnorm;
    const bool ok = lhs <= rhs * (1 + tol);
    all_pass = all_pass && ok;
    const double ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? std::numeric_limits<double>::infinity() : 0);
    if (ratio > worst) {
      worst = ratio;
      rep.lhs = lhs;
      rep.rhs = rhs;
    }
    per.push_back({{"class", names[c]}, {"size", E.size()}, {"lhs", lhs}, {"rhs", rhs}, {"K", K}, {"pass", ok}});
  }
  rep.vacuous = !(fnorm > 0);
  rep.slack = rep.rhs - rep.lhs;
  rep.pass = all_pass;
  rep.details["f_norm"] = fnorm;
  rep.details["classes"] = per;
  rep.seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Test-function family

FunctionFamily FunctionFamily::v1(const LocalFrame& frame, double p, std::uint64_t seed, int boxes, int fields) {
  FunctionFamily fam;
  const int n = frame.dim();
  const Delta delta = frame.delta;
  const CellLattice lattice = frame.lattice();
  const auto radii = enumerate_radii(delta);
  const std::vector<double> picks = {radii.front(), radii[radii.size() / 2], radii.back()};

  fam.members.push_back({FamilyMember::Kind::constant, "constant", {}, {}, 0});

  const int stride = std::max(1, (delta.m + 3) / 4);
  const GridSpec& lg = lattice.grid();
  for (Eigen::Index i = 0; i < lattice.size(); ++i) {
    const IndexVec c = lg.unravel(i);
    if ((c.array().unaryExpr([stride](Eigen::Index v) { return v % stride; }) != 0).any()) continue;
    for (double r : picks) {
      FamilyMember m;
      m.kind = FamilyMember::Kind::skeleton;
      m.skeleton = Skeleton(lattice.center(i), r, 1);
      m.label = "skeleton:i=" + std::to_string(i) + ",r=" + format_real(r);
      fam.members.push_back(std::move(m));
    }
  }

  std::mt19937_64 rng(seed);
  const Box pad = frame.padded_cube();
  auto random_box = [&] {
    Box b;
    b.lower.resize(n);
    b.upper.resize(n);
    for (int j = 0; j < n; ++j) {
      const double side = std::uniform_real_distribution<double>(delta.value(), 2.0)(rng);
      const double lo = std::uniform_real_distribution<double>(pad.lower[j], pad.upper[j] - side)(rng);
      b.lower[j] = lo;
      b.upper[j] = lo + side;
    }
    return b;
  };
  for (int t = 0; t < boxes; ++t) {
    FamilyMember m;
    m.kind = FamilyMember::Kind::box;
    m.box = random_box();
    m.label = "box:" + std::to_string(t);
    fam.members.push_back(std::move(m));
  }
  for (int t = 0; t < fields; ++t) {
    FamilyMember m;
    m.kind = FamilyMember::Kind::random_field;
    m.box = random_box();
    m.seed = rng();
    m.label = "field:" + std::to_string(t);
    fam.members.push_back(std::move(m));
  }

  if (p > 1) {
    const Eigen::Index mid = lattice.grid().linear(IndexVec::Constant(n, delta.m / 2));
    for (double r : picks) {
      FamilyMember m;
      m.kind = FamilyMember::Kind::dual_skeleton;
      m.skeleton = Skeleton(lattice.center(mid), r, 1);
      m.label = "dual_skeleton:r=" + format_real(r);
      fam.members.push_back(std::move(m));
    }
    const Point z = frame.z.cast<double>();
    FamilyMember m;
    m.kind = FamilyMember::Kind::dual_box;
    m.box = Box((z.array() - 2 - delta.value()).matrix(), (z.array() + 3 + delta.value()).matrix());
    m.label = "dual_box";
    fam.members.push_back(m);
    m.box = frame.unit_cube();
    m.label = "dual_cube";
    fam.members.push_back(std::move(m));
  }
  return fam;
}

SampledField materialize(const FamilyMember& m, const GridSpec& grid, const SampledField& w, double p, Delta delta) {
  using Kind = FamilyMember::Kind;
  SampledField::Values v = SampledField::Values::Zero(grid.size());
  auto fill = [&](const Box& b, auto&& value) {
    for_each_cell(grid, snap(grid, b), [&](Eigen::Index i) { v[i] = value(i); });
  };
  auto dual = [&](Eigen::Index i) { return std::pow(w[i], -1.0 / (p - 1)); };
  auto one = [](Eigen::Index) { return 1.0; };
  if (m.kind == Kind::dual_skeleton || m.kind == Kind::dual_box) {
    require_p(p);
    if (!(w.spec() == grid)) throw InvalidInput("weight must live on the frame grid");
  }
  switch (m.kind) {
    case Kind::constant:
      v.setOnes();
      break;
    case Kind::skeleton:
      for (const auto& f : faces(m.skeleton, delta.value())) fill(f.box, one);
      break;
    case Kind::dual_skeleton:
      for (const auto& f : faces(m.skeleton, delta.value())) fill(f.box, dual);
      break;
    case Kind::box:
      fill(m.box, one);
      break;
    case Kind::dual_box:
      fill(m.box, dual);
      break;
    case Kind::random_field: {
      const int n = grid.dim();
      const auto per = static_cast<Eigen::Index>(std::llround(delta.value() / grid.h));
      if (per < 1) throw InvalidInput("quadrature grid coarser than delta");
      const IndexVec cdims = (grid.dims.array() + per - 1) / per;
      const GridSpec coarse(grid.origin, delta.value(), cdims);
      std::mt19937_64 rng(m.seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> vals(static_cast<std::size_t>(coarse.size()));
      for (auto& x : vals) x = u(rng);
      fill(m.box, [&](Eigen::Index i) {
        IndexVec c = grid.unravel(i);
        for (int j = 0; j < n; ++j) c[j] /= per;
        return vals[static_cast<std::size_t>(coarse.linear(c))];
      });
      break;
    }
  }
  return {grid, std::move(v)};
}

OpNormResult empirical_opnorm(NormOperator op, const SampledField& w, double p, const LocalFrame& frame,
                              const FunctionFamily& family, EvalMode mode, const CubeFamily& hl_family) {
  if (!(p >= 1)) throw InvalidInput("p must be >= 1");
  if (family.members.empty()) throw InvalidInput("function family must not be empty");
  const GridSpec grid = frame.grid();
  require_grid(w, grid, "w");
  const PrefixTable wt(w);
  const Box region = frame.padded_cube();
  const GridSpec eval = op == NormOperator::hardy_littlewood || mode == EvalMode::dense ? frame.inner_grid()
                                                                                         : frame.lattice().grid();
  const Eigen::ArrayXd masses = cell_masses(wt, eval);
  const double inner = std::pow(pairwise_sum(masses), 1.0 / p);
  const SkeletonParams params = SkeletonParams::lattice(frame.delta, 1);

  OpNormResult res;
  res.ratios.assign(family.members.size(), 0.0);
  parallel_for(family.members.size(), [&](std::size_t t) {
    const FamilyMember& m = family.members[t];
    const SampledField f = materialize(m, grid, w, p, frame.delta);
    const double den = m.kind == FamilyMember::Kind::constant ? inner : lp_norm(f, w, p, region);
    if (!(den > 0)) return;
    double num = 0;
    if (op == NormOperator::skeleton) {
      const MaximalField mf = skeleton_maximal(PrefixTable(f), params, eval);
      num = lp_norm_masses(mf.values(), masses, p);
    } else {
      const MaximalField mf = hl_maximal(f, frame.unit_cube(), hl_family);
      if (!(mf.spec() == eval)) throw DomainError("Hardy-Littlewood evaluation grid mismatch");
      num = lp_norm_masses(mf.values(), masses, p);
    }
    res.ratios[t] = num / den;
  });
  for (std::size_t t = 0; t < res.ratios.size(); ++t) {
    if (res.ratios[t] > res.ratio) {
      res.ratio = res.ratios[t];
      res.best = t;
    }
  }
  res.best_label = family.members[res.best].label;
  return res;
}

// ---------------------------------------------------------------------------
// Sufficient bound

bool admissible_sufficient_p(double p) {
  if (p == 1) return true;
  if (!(p > 1) || !std::isfinite(p)) return false;
  const double q = conjugate(p);
  return std::abs(q - std::round(q)) <= 1e-9 * q && std::round(q) >= 2;
}

double default_sufficient_constant(double p) { return 3 * std::pow(2.0 * 49.0 * 4.0, 1.0 / p); }

namespace {

/// delta^(-n e / p) with e the selection exponent: delta^(-5/(4p)) for n=2, k=1.
double delta_factor(Delta delta, int n, int k, double p) {
  return std::pow(delta.value(), -n * lemma_exponent(n, k) / p);
}

double skeleton_constant(const SampledField& w, Delta delta, double p, const IndexVec& z) {
  const WeightField wf(w, delta);
  const std::vector<IndexVec> zs = {z};
  return p == 1 ? a1_skeleton_upper(wf, zs).value : ap_skeleton_upper(wf, p, zs).value;
}

}  // namespace

SufficientResult check_sufficient(const SampledField& w, double p, const LocalFrame& frame,
                                  const FunctionFamily& family, std::optional<double> C, EvalMode mode, double tol) {
  const auto t0 = Clock::now();
  if (!admissible_sufficient_p(p))
    throw InvalidInput("sufficient bound needs p = 1 or an integer conjugate exponent p' >= 2");
  const double c = C.value_or(default_sufficient_constant(p));
  const OpNormResult norm = empirical_opnorm(NormOperator::skeleton, w, p, frame, family, mode);
  SufficientResult out;
  out.constant = skeleton_constant(w, frame.delta, p, frame.z);
  const double scale = delta_factor(frame.delta, frame.dim(), 1, p) * std::pow(out.constant, 1.0 / p);
  out.fitted_c = norm.ratio / scale;

  CheckReport& rep = out.report;
  rep.name = "sufficient";
  rep.tol = tol;
  rep.digest = params_digest({{"check", "sufficient"}, {"p", p}, {"delta", frame.delta.str()},
                              {"z", to_vec(frame.z)}, {"refine", frame.refine}, {"w", field_hash(w)},
                              {"family", family.version}, {"members", family.members.size()},
                              {"mode", mode == EvalMode::dense ? "dense" : "centers"}, {"C", c}});
  rep.lhs = norm.ratio;
  rep.rhs = c * scale;
  rep.settle();
  rep.details["lhs_kind"] = "empirical lower bound on the operator norm";
  rep.details["best_member"] = norm.best_label;
  rep.details["C"] = c;
  rep.details["skeleton_constant"] = out.constant;
  rep.details["fitted_C"] = out.fitted_c;
  rep.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Necessary chain

std::vector<SkeletonSample> random_skeleton_samples(const CellLattice& lattice, std::size_t count,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto radii = enumerate_radii(lattice.delta());
  std::uniform_int_distribution<Eigen::Index> pick_i(0, lattice.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_r(0, radii.size() - 1);
  std::vector<SkeletonSample> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const Eigen::Index i = pick_i(rng);
    out.push_back({lattice.center(i), radii[pick_r(rng)]});
  }
  return out;
}

namespace {

struct ChainSample {
  bool contained = true;
  double lhs = 0;        // kappa^p w(Q) (min face average)^p
  double rhs = 0;        // C_emp * int_S g
  double c_emp = 0;
  double kappa = 0;
  double nonlinear = 0;  // nonlinear term at (x~, r)
};

ChainSample chain_sample(const WeightField& wf, double p, const SkeletonSample& s) {
  const GridSpec& grid = wf.field().spec();
  const int n = grid.dim();
  const int k = wf.k();
  const double d = wf.delta().value();
  ChainSample out;

  // (a) containment at the corners of Q_delta(x~) and at x~; the valid set is a box.
  for (unsigned corner = 0; corner <= (1u << n); ++corner) {
    Point x = s.x;
    if (corner < (1u << n))
      for (int j = 0; j < n; ++j) x[j] += (corner & (1u << j)) ? d / 2 : -d / 2;
    out.contained = out.contained && containment_4delta(s.x, x, s.r, d, k);
  }

  // f = g 1_{S_delta(x~, r)}, g = w^(-p'/p)
  const SampledField g = wf.dual_field(p);
  const auto small = faces(Skeleton(s.x, s.r, k), d);
  SampledField::Values fv = SampledField::Values::Zero(grid.size());
  for (const auto& f : small) {
    if (!grid.covered().contains(f.box, 1e-9 * grid.h)) throw InvalidInput("skeleton leaves the weight grid");
    for_each_cell(grid, snap(grid, f.box), [&](Eigen::Index i) { fv[i] = g[i]; });
  }
  const SampledField f(grid, std::move(fv));
  const double integral_g = pairwise_sum(f.values()) * grid.cell_volume();
  if (!(integral_g > 0)) throw DomainError("degenerate weight on skeleton");

  // Evaluation cells of Q_delta(x~)
  const Point half = Point::Constant(n, d / 2);
  const Box cube((s.x - half).eval(), (s.x + half).eval());
  const CellRange qr = snap(grid, cube);
  std::vector<Point> ys;
  std::vector<double> wy;
  for_each_cell(grid, qr, [&](Eigen::Index i) {
    ys.push_back(grid.midpoint(i));
    wy.push_back(wf.field()[i]);
  });

  const SkeletonParams big{4 * d, enumerate_radii(wf.delta()), k};
  const Eigen::ArrayXd M = skeleton_maximal(PrefixTable(f), big, ys);

  // kappa: smallest snapped-count ratio over faces and evaluation points
  std::vector<Eigen::Index> small_counts;
  for (const auto& fc : small) small_counts.push_back(snap(grid, fc.box).count());
  double kappa = std::numeric_limits<double>::infinity();
  for (const auto& y : ys) {
    const auto large = faces(Skeleton(y, s.r, k), 4 * d);
    for (std::size_t j = 0; j < large.size(); ++j)
      kappa = std::min(kappa, static_cast<double>(small_counts[j]) /
                                  static_cast<double>(snap(grid, large[j].box).count()));
  }

  double min_avg = std::numeric_limits<double>::infinity();
  for (const auto& fc : small) min_avg = std::min(min_avg, box_average(wf.dual(p), fc.box));

  std::vector<double> num_terms(ys.size()), mass_terms(ys.size());
  for (std::size_t t = 0; t < ys.size(); ++t) {
    num_terms[t] = std::pow(M[static_cast<Eigen::Index>(t)], p) * wy[t];
    mass_terms[t] = wy[t];
  }
  const double hv = grid.cell_volume();
  const double num = pairwise_sum<double>(num_terms) * hv;
  const double wq = pairwise_sum<double>(mass_terms) * hv;

  out.kappa = kappa;
  out.c_emp = num / integral_g;
  out.lhs = std::pow(kappa, p) * wq * std::pow(min_avg, p);
  out.rhs = num;
  out.nonlinear = nonlinear_term(wf, p, s.x, s.r).value;
  return out;
}

}  // namespace

CheckReport check_necessary_chain(const SampledField& w, double p, Delta delta, std::span<const SkeletonSample> sample,
                                  double tol) {
  const auto t0 = Clock::now();
  require_p(p);
  if (sample.empty()) throw InvalidInput("necessary chain needs at least one sample");
  const WeightField wf(w, delta);
  (void)wf.dual(p);

  std::vector<ChainSample> res(sample.size());
  parallel_for(sample.size(), [&](std::size_t s) { res[s] = chain_sample(wf, p, sample[s]); });

  CheckReport rep;
  rep.name = "necessary";
  rep.tol = tol;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& s : sample) pts.push_back({to_vec(s.x), s.r});
  rep.digest = params_digest({{"check", "necessary"}, {"p", p}, {"delta", delta.str()}, {"w", field_hash(w)},
                              {"sample", pts}});

  std::size_t containment_failures = 0, chain_failures = 0, worst = 0, top = 0;
  double worst_ratio = -1;
  for (std::size_t s = 0; s < res.size(); ++s) {
    if (!res[s].contained) ++containment_failures;
    if (!(res[s].lhs <= res[s].rhs * (1 + tol))) ++chain_failures;
    const double ratio = res[s].rhs > 0 ? res[s].lhs / res[s].rhs : std::numeric_limits<double>::infinity();
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst = s;
    }
    if (res[s].nonlinear > res[top].nonlinear) top = s;
  }
  rep.lhs = res[worst].lhs;
  rep.rhs = res[worst].rhs;
  rep.slack = rep.rhs - rep.lhs;
  rep.pass = containment_failures == 0 && chain_failures == 0;
  rep.details["samples"] = sample.size();
  rep.details["containment_failures"] = containment_failures;
  rep.details["chain_failures"] = chain_failures;
  rep.details["worst"] = {{"x", to_vec(sample[worst].x)}, {"r", sample[worst].r}, {"kappa", res[worst].kappa},
                          {"C_emp", res[worst].c_emp}};
  const double bound = res[top].c_emp / std::pow(res[top].kappa, p);
  rep.details["nonlinear_witness"] = {{"x", to_vec(sample[top].x)}, {"r", sample[top].r},
                                      {"nonlinear", res[top].nonlinear}, {"implied_bound", bound}};
  rep.seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Embedding of cubic weights

CheckReport check_ap_embedding(const SampledField& w, double p, Delta delta, const IndexVec& z, double tol) {
  const auto t0 = Clock::now();
  require_p(p);
  const int n = w.spec().dim();
  if (z.size() != n) throw InvalidInput("z has the wrong dimension");
  const Point zc = z.cast<double>();
  const Box region((zc.array() - 4).matrix(), (zc.array() + 5).matrix());
  if (!w.spec().covered().contains(region, 1e-9 * w.spec().h))
    throw InvalidInput("embedding check needs the weight grid to cover z + [-4, 5]^n");

  const WeightField wf(w, delta);
  const std::vector<IndexVec> zs = {z};
  const auto samples = lattice_samples(zs, delta);
  const ApReport nonlinear = ap_nonlinear(wf, p, samples);
  const ApReport cubic = ap_cubic(w, p, CubeFamily{}, region);
  const double factor = std::pow(4.0, 2 * p) / std::pow(delta.value(), p);

  // Per sample: nonlinear term against the cubic term of C(x~, 2r).
  const PrefixTable& dual = wf.dual(p);
  std::vector<double> ratio(samples.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    const Point reach = Point::Constant(n, 2 * samples[s].r);
    const Box cube((samples[s].x - reach).eval(), (samples[s].x + reach).eval());
    const double lhs = nonlinear_term(wf, p, samples[s].x, samples[s].r).value;
    ratio[s] = lhs / (factor * cubic_term(wf.mass(), dual, p, cube));
  });
  std::size_t worst = 0;
  for (std::size_t s = 1; s < ratio.size(); ++s)
    if (ratio[s] > ratio[worst]) worst = s;

  CheckReport rep;
  rep.name = "embedding";
  rep.tol = tol;
  rep.digest = params_digest({{"check", "embedding"}, {"p", p}, {"delta", delta.str()}, {"z", to_vec(z)},
                              {"w", field_hash(w)}});
  rep.lhs = nonlinear.value;
  rep.rhs = factor * cubic.value;
  rep.settle();
  const bool per_sample = ratio[worst] <= 1 + tol;
  rep.pass = rep.pass && per_sample;
  rep.details["nonlinear"] = to_json(nonlinear);
  rep.details["cubic"] = to_json(cubic);
  rep.details["factor"] = factor;
  rep.details["worst_intermediate_ratio"] = ratio[worst];
  rep.details["worst_intermediate_sample"] = {{"x", to_vec(samples[worst].x)}, {"r", samples[worst].r}};
  rep.seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Hardy-Littlewood baseline

CheckReport check_buckley(std::span<const WeightSpec> weights, double p, const LocalFrame& frame, std::uint64_t seed,
                          std::vector<BuckleyRow>* rows_out) {
  const auto t0 = Clock::now();
  require_p(p);
  if (weights.empty()) throw InvalidInput("Buckley check needs at least one weight");
  const GridSpec grid = frame.grid();
  const FunctionFamily family = FunctionFamily::v1(frame, p, seed);
  std::vector<BuckleyRow> rows;
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const auto& spec : weights) {
    const SampledField w = make_weight(spec, grid);
    BuckleyRow row;
    row.weight = spec.str();
    row.opnorm = empirical_opnorm(NormOperator::hardy_littlewood, w, p, frame, family).ratio;
    row.ap = ap_cubic(w, p).value;
    row.c_fit = row.opnorm / std::pow(row.ap, 1.0 / (p - 1));
    rows.push_back(row);
    names.push_back(nlohmann::ordered_json::parse(spec.str()));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    lo = std::min(lo, r.c_fit);
    hi = std::max(hi, r.c_fit);
    table.push_back({{"weight", nlohmann::ordered_json::parse(r.weight)}, {"opnorm", r.opnorm}, {"A_p", r.ap},
                     {"C_fit", r.c_fit}});
  }
  CheckReport rep;
  rep.name = "buckley";
  rep.tol = 1e-9;
  rep.digest = params_digest({{"check", "buckley"}, {"p", p}, {"delta", frame.delta.str()}, {"z", to_vec(frame.z)},
                              {"refine", frame.refine}, {"seed", seed}, {"weights", names}});
  rep.lhs = hi;
  rep.rhs = 2 * lo;
  rep.settle();
  rep.details["lhs_kind"] = "largest fitted constant; norms are empirical lower bounds";
  rep.details["rows"] = table;
  if (rows_out) *rows_out = rows;
  rep.seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Scaling

std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("line fit needs at least two points");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    A(static_cast<Eigen::Index>(i), 0) = x[i];
    A(static_cast<Eigen::Index>(i), 1) = 1;
    b[static_cast<Eigen::Index>(i)] = y[i];
  }
  const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
  return {sol[0], sol[1]};
}

ScalingReport scaling_experiment(double p, std::span<const Delta> deltas, const WeightSpec& weight,
                                 std::uint64_t seed, EvalMode mode, int refine) {
  const auto t0 = Clock::now();
  if (deltas.size() < 3) throw InvalidInput("scaling needs at least three delta values");
  if (!admissible_sufficient_p(p))
    throw InvalidInput("scaling needs p = 1 or an integer conjugate exponent p' >= 2");
  const int n = 2, k = 1;
  ScalingReport rep;
  rep.p = p;
  rep.weight = weight.str();
  rep.weighted = weight.kind != "constant";
  rep.exponent = static_cast<double>(n - k) / (2.0 * n * p);

  std::vector<double> xs, ys;
  for (const Delta& d : deltas) {
    const LocalFrame frame(IndexVec::Zero(n), d, refine);
    const SampledField w = make_weight(weight, frame.grid());
    const FunctionFamily family = FunctionFamily::v1(frame, p, seed);
    const OpNormResult norm = empirical_opnorm(NormOperator::skeleton, w, p, frame, family, mode);
    ScalingRow row;
    row.delta = d;
    row.norm = norm.ratio;
    row.best_label = norm.best_label;
    row.constant = skeleton_constant(w, d, p, frame.z);
    row.fitted_c = row.norm / (delta_factor(d, n, k, p) * std::pow(row.constant, 1.0 / p));
    rep.rows.push_back(row);
    xs.push_back(std::log(1.0 / d.value()));
    ys.push_back(std::log(row.norm));
  }
  std::tie(rep.slope, rep.intercept) = fit_line(xs, ys);
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (rep.slope * xs[i] + rep.intercept);
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, std::abs(r));
    lo = std::min(lo, rep.rows[i].fitted_c);
    hi = std::max(hi, rep.rows[i].fitted_c);
  }
  rep.c_ratio = hi / lo;
  rep.margin = rep.weighted ? 2 - rep.c_ratio : rep.exponent + 0.05 - rep.slope;
  rep.pass = rep.margin >= 0;
  rep.seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

std::string ledger_header() { return "check,params_digest,lhs,rhs,slack,pass,seconds"; }

std::string ledger_row(const CheckReport& r, bool timing) {
  return r.name + ',' + r.digest + ',' + format_real(r.lhs) + ',' + format_real(r.rhs) + ',' + format_real(r.slack) +
         ',' + (r.pass ? "true" : "false") + ',' + format_real(timing ? r.seconds : 0.0);
}

nlohmann::ordered_json to_json(const CheckReport& r, bool timing) {
  nlohmann::ordered_json j;
  j["check"] = r.name;
  j["params_digest"] = r.digest;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack;
  j["pass"] = r.pass;
  j["vacuous"] = r.vacuous;
  j["tol"] = r.tol;
  j["seconds"] = timing ? r.seconds : 0.0;
  j["details"] = r.details;
  return j;
}

nlohmann::ordered_json to_json(const ScalingReport& r, bool timing) {
  nlohmann::ordered_json j;
  j["p"] = r.p;
  j["weight"] = nlohmann::ordered_json::parse(r.weight);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::vector<std::string> deltas;
  for (const auto& row : r.rows) {
    deltas.push_back(row.delta.str());
    rows.push_back({{"delta", row.delta.str()}, {"norm", row.norm}, {"skeleton_constant", row.constant},
                    {"fitted_C", row.fitted_c}, {"best_member", row.best_label}});
  }
  j["deltas"] = deltas;
  j["norm_kind"] = "empirical lower bound on the operator norm";
  j["rows"] = rows;
  j["slope"] = r.slope;
  j["intercept"] = r.intercept;
  j["residuals"] = r.residuals;
  j["max_residual"] = r.max_residual;
  j["exponent"] = r.exponent;
  j["weighted"] = r.weighted;
  j["C_ratio"] = r.c_ratio;
  j["margin"] = r.margin;
  j["pass"] = r.pass;
  j["seconds"] = timing ? r.seconds : 0.0;
  return j;
}

}  // namespace skelmax
