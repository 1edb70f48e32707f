// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include "skelmax/weights.hpp"

#include <limits>
#include <sstream>

#include "skelmax/grid_io.hpp"
#include "skelmax/parallel.hpp"

namespace skelmax {

namespace {

double conjugate(double p) { return p / (p - 1); }

void require_p(double p) {
  if (!(p > 1) || !std::isfinite(p)) throw InvalidInput("p must be > 1");
}

Point center_or_origin(const std::vector<double>& c, int n) {
  if (c.empty()) return Point::Zero(n);
  if (static_cast<int>(c.size()) != n) throw InvalidInput("weight center has wrong dimension");
  return Eigen::Map<const Eigen::VectorXd>(c.data(), n);
}

double fraction_or_real(const std::string& s) {
  if (auto slash = s.find('/'); slash != std::string::npos)
    return parse_real(s.substr(0, slash)) / parse_real(s.substr(slash + 1));
  return parse_real(s);
}

/// Best (value, index) with lowest index on ties.
struct Best {
  double value = -std::numeric_limits<double>::infinity();
  Witness witness;

  void offer(double v, const Witness& w) {
    if (v > value) {
      value = v;
      witness = w;
    }
  }
};

}  // namespace

WeightSpec WeightSpec::from_json(const nlohmann::json& j) {
  WeightSpec s;
  if (!j.is_object() || !j.contains("kind")) throw InvalidInput("weight descriptor needs 'kind'");
  s.kind = j.at("kind").get<std::string>();
  const auto params = j.value("params", nlohmann::json::object());
  try {
    s.value = params.value("value", s.value);
    s.alpha = params.value("alpha", s.alpha);
    s.K = params.value("K", s.K);
    s.axis = params.value("axis", s.axis);
    s.split = params.value("split", s.split);
    s.period = params.value("period", s.period);
    s.r = params.value("r", s.r);
    s.height = params.value("height", s.height);
    s.width = params.value("width", s.width);
    if (params.contains("center")) s.center = params.at("center").get<std::vector<double>>();
    s.path = params.value("path", s.path);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("weight params: ") + e.what());
  }
  return s;
}

WeightSpec WeightSpec::parse(const std::string& text) {
  if (!text.empty() && text.front() == '{') {
    try {
      return from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput(std::string("weight JSON: ") + e.what());
    }
  }
  WeightSpec s;
  const auto colon = text.find(':');
  s.kind = text.substr(0, colon);
  if (colon == std::string::npos) return s;
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidInput("weight parameter '" + item + "' needs key=value");
    const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    if (key == "value") s.value = fraction_or_real(val);
    else if (key == "alpha") s.alpha = fraction_or_real(val);
    else if (key == "K") s.K = fraction_or_real(val);
    else if (key == "axis") s.axis = static_cast<int>(parse_real(val));
    else if (key == "split") s.split = fraction_or_real(val);
    else if (key == "period") s.period = fraction_or_real(val);
    else if (key == "r") s.r = fraction_or_real(val);
    else if (key == "height") s.height = fraction_or_real(val);
    else if (key == "width") s.width = fraction_or_real(val);
    else if (key == "path") s.path = val;
    else if (key == "center") {
      s.center.clear();
      std::stringstream cs(val);
      std::string c;
      while (std::getline(cs, c, ';')) s.center.push_back(fraction_or_real(c));
    } else throw InvalidInput("unknown weight parameter '" + key + "'");
  }
  return s;
}

nlohmann::json WeightSpec::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  if (kind == "constant") params["value"] = value;
  else if (kind == "power") params["alpha"] = alpha;
  else if (kind == "twovalue") {
    params["K"] = K;
    params["axis"] = axis;
    params["split"] = split;
  } else if (kind == "checkerboard") {
    params["K"] = K;
    params["period"] = period;
  } else if (kind == "skeleton_bump") {
    params["r"] = r;
    params["height"] = height;
    params["width"] = width;
  } else if (kind == "grid") params["path"] = path;
  if (!center.empty() && (kind == "power" || kind == "skeleton_bump")) params["center"] = center;
  return {{"kind", kind}, {"params", params}};
}

SampledField make_weight(const WeightSpec& s, const GridSpec& grid) {
  const int n = grid.dim();
  SampledField w;
  if (s.kind == "constant") {
    if (!(s.value > 0)) throw InvalidInput("constant weight must be positive");
    w = SampledField(grid, SampledField::Values::Constant(grid.size(), s.value));
  } else if (s.kind == "power") {
    if (!(s.alpha > -n)) throw InvalidInput("power weight needs alpha > -n for local integrability");
    const Point c = center_or_origin(s.center, n);
    const double a = s.alpha;
    w = build_field(grid, [&](const Point& x) { return std::pow((x - c).norm(), a); });
  } else if (s.kind == "twovalue") {
    if (!(s.K > 0)) throw InvalidInput("twovalue weight needs K > 0");
    if (s.axis < 0 || s.axis >= n) throw InvalidInput("twovalue split axis out of range");
    w = build_field(grid, [&](const Point& x) { return x[s.axis] < s.split ? 1.0 : s.K; });
  } else if (s.kind == "checkerboard") {
    if (!(s.K > 0) || !(s.period > 0)) throw InvalidInput("checkerboard needs K > 0 and period > 0");
    w = build_field(grid, [&](const Point& x) {
      long long sum = 0;
      for (int j = 0; j < n; ++j) sum += static_cast<long long>(std::floor(x[j] / s.period));
      return (sum % 2 != 0) ? s.K : 1.0;
    });
  } else if (s.kind == "skeleton_bump") {
    if (!(s.height >= 0) || !(s.width > 0)) throw InvalidInput("skeleton_bump needs height >= 0 and width > 0");
    const auto fs = faces(Skeleton(center_or_origin(s.center, n), s.r, n - 1), s.width);
    w = build_field(grid, [&](const Point& x) {
      for (const auto& f : fs)
        if ((f.box.lower.array() <= x.array()).all() && (x.array() < f.box.upper.array()).all())
          return 1.0 + s.height;
      return 1.0;
    });
  } else if (s.kind == "grid") {
    w = load_grid_csv(s.path);
    if (!(w.spec() == grid)) throw InvalidInput("grid weight file does not match the working grid");
  } else {
    throw InvalidInput("unknown weight kind '" + s.kind + "'");
  }
  if ((w.values() <= 0).any()) throw DomainError("weight must be strictly positive on the sampled grid");
  return w;
}

GridSpec covering_grid(std::span<const IndexVec> z_set, Delta delta, int refine, int pad) {
  if (z_set.empty()) throw InvalidInput("z_set must not be empty");
  IndexVec lo = z_set.front(), hi = z_set.front();
  for (const auto& z : z_set) {
    if (z.size() != lo.size()) throw InvalidInput("z_set dimensions differ");
    lo = lo.cwiseMin(z);
    hi = hi.cwiseMax(z);
  }
  const Point origin = (lo.cast<double>().array() - pad).matrix();
  const IndexVec dims = ((hi - lo).array() + 1 + 2 * pad) * static_cast<Eigen::Index>(delta.m) * refine;
  return {origin, delta.value() / refine, dims};
}

WeightField::WeightField(SampledField w, Delta delta, int k) : w_(std::move(w)), delta_(delta), k_(k), mass_(w_) {
  if ((w_.values() <= 0).any()) throw DomainError("weight must be strictly positive on the sampled grid");
  if (k_ < 0 || k_ >= w_.spec().dim()) throw InvalidInput("skeleton face dimension must satisfy 0 <= k < n");
}

SampledField WeightField::dual_field(double p) const {
  const double e = 1 - conjugate(p);
  return w_.map([e](double v) { return std::pow(v, e); });
}

const PrefixTable& WeightField::dual(double p) const {
  require_p(p);
  std::lock_guard lock(mu_);
  auto& slot = dual_[p];
  if (!slot) slot = std::make_unique<PrefixTable>(dual_field(p));
  return *slot;
}

double WeightField::min_on(const Box& b) const {
  const CellRange r = snap(w_.spec(), b);
  if (r.empty()) throw DomainError("degenerate box");
  double m = std::numeric_limits<double>::infinity();
  for_each_cell(w_.spec(), r, [&](Eigen::Index i) { m = std::min(m, w_[i]); });
  return m;
}

namespace {

struct FaceStats {
  double measure = 0;
  long double sum = 0;
  Eigen::Index cells = 0;
};

FaceStats face_stats(const PrefixTable& t, const Box& b) {
  const CellRange r = snap(t.spec(), b);
  if (r.empty()) throw DomainError("zero snapped face measure");
  return {static_cast<double>(r.count()) * t.spec().cell_volume(), t.range_sum(r), r.count()};
}

void check_inside(const GridSpec& g, const Box& b) {
  if (!g.covered().contains(b, 1e-9 * g.h)) throw InvalidInput("skeleton face leaves the weight grid; enlarge the grid");
}

double term_from(double cell_mass, const FaceStats& face, double p) {
  const double avg = static_cast<double>(face.sum / static_cast<long double>(face.cells));
  return cell_mass / face.measure * std::pow(avg, p - 1);
}

}  // namespace

double skeleton_term(const WeightField& w, double p, const CellLattice& lattice, Eigen::Index i, double r, int face_index) {
  require_p(p);
  const Box cell = lattice.cell(i);
  const FattenedFace f = face(Skeleton(lattice.center(i), r, w.k()), lattice.delta().value(), face_index);
  check_inside(w.field().spec(), f.box);
  return term_from(box_sum(w.mass(), cell), face_stats(w.dual(p), f.box), p);
}

double a1_term(const WeightField& w, const CellLattice& lattice, Eigen::Index i, double r, int face_index) {
  const FattenedFace f = face(Skeleton(lattice.center(i), r, w.k()), lattice.delta().value(), face_index);
  check_inside(w.field().spec(), f.box);
  const double measure = snapped_measure(w.field().spec(), f.box);
  if (!(measure > 0)) throw DomainError("zero snapped face measure");
  return box_sum(w.mass(), lattice.cell(i)) / measure / w.min_on(f.box);
}

namespace {

template <typename Term>
ApReport local_constant(const RhoAssignment& rho, const FaceSelection& sel, Term&& term) {
  if (sel.size() != rho.size()) throw InvalidInput("selection and rho sizes differ");
  std::vector<double> vals(rho.size());
  parallel_for(rho.size(), [&](std::size_t i) {
    vals[i] = term(static_cast<Eigen::Index>(i), rho.radius(i), sel.choice[i]);
  });
  Best best;
  for (std::size_t i = 0; i < vals.size(); ++i)
    best.offer(vals[i], Witness{rho.lattice().z(), static_cast<Eigen::Index>(i), rho.radius(i), sel.choice[i], {}, 0});
  ApReport rep;
  rep.delta = rho.lattice().delta();
  rep.value = best.value;
  rep.witness = best.witness;
  return rep;
}

/// Max over every (z, i, r, face), first occurrence winning ties.
template <typename Term>
ApReport all_faces_constant(const WeightField& w, std::span<const IndexVec> z_set, Term&& term) {
  const Delta delta = w.delta();
  const auto radii = enumerate_radii(delta);
  const int nf = face_count(w.field().spec().dim(), w.k());
  Best best;
  for (const auto& z : z_set) {
    const CellLattice lattice(z, delta);
    std::vector<Best> per(static_cast<std::size_t>(lattice.size()));
    parallel_for(per.size(), [&](std::size_t i) {
      for (double r : radii)
        for (int j = 0; j < nf; ++j)
          per[i].offer(term(lattice, static_cast<Eigen::Index>(i), r, j),
                       Witness{z, static_cast<Eigen::Index>(i), r, j, {}, 0});
    });
    for (const auto& b : per) best.offer(b.value, b.witness);
  }
  ApReport rep;
  rep.delta = delta;
  rep.value = best.value;
  rep.witness = best.witness;
  return rep;
}

}  // namespace

ApReport ap_skeleton_local(const WeightField& w, const RhoAssignment& rho, const FaceSelection& sel, double p) {
  require_p(p);
  (void)w.dual(p);
  const CellLattice& lattice = rho.lattice();
  ApReport rep = local_constant(rho, sel, [&](Eigen::Index i, double r, int f) {
    return skeleton_term(w, p, lattice, i, r, f);
  });
  rep.cls = "skeleton-local";
  rep.p = p;
  return rep;
}

ApReport a1_skeleton_local(const WeightField& w, const RhoAssignment& rho, const FaceSelection& sel) {
  const CellLattice& lattice = rho.lattice();
  ApReport rep = local_constant(rho, sel, [&](Eigen::Index i, double r, int f) { return a1_term(w, lattice, i, r, f); });
  rep.cls = "a1-local";
  rep.p = 1;
  return rep;
}

SharedFamily build_family(const WeightField& w, std::span<const IndexVec> z_set, double p, const RhoFamily& spec) {
  SharedFamily fam;
  const Delta delta = w.delta();
  auto add = [&](RhoAssignment rho) {
    const auto skels = rho.skeletons(w.k());
    fam.selections.push_back(select_faces(skels, delta, SelectionStrategy::greedy));
    fam.rhos.push_back(std::move(rho));
  };
  std::uint64_t seed = spec.seed;
  for (const auto& z : z_set) {
    const CellLattice lattice(z, delta);
    if (spec.greedy) add(greedy_rho(w.dual(p), lattice, delta.value(), w.k()));
    if (spec.constant_slices)
      for (double r : enumerate_radii(delta)) add(RhoAssignment::constant(lattice, r));
    for (int t = 0; t < spec.random_count; ++t) add(RhoAssignment::random(lattice, seed++));
  }
  return fam;
}

ApReport ap_skeleton_upper(const WeightField& w, double p, std::span<const IndexVec> z_set) {
  require_p(p);
  (void)w.dual(p);
  ApReport rep = all_faces_constant(w, z_set, [&](const CellLattice& l, Eigen::Index i, double r, int f) {
    return skeleton_term(w, p, l, i, r, f);
  });
  rep.cls = "skeleton";
  rep.p = p;
  return rep;
}

ApReport ap_skeleton_lower(const WeightField& w, double p, const SharedFamily& family) {
  require_p(p);
  ApReport best;
  best.value = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < family.rhos.size(); ++t) {
    ApReport r = ap_skeleton_local(w, family.rhos[t], family.selections[t], p);
    if (r.value > best.value) best = r;
  }
  best.cls = "skeleton-lower";
  best.p = p;
  best.delta = w.delta();
  return best;
}

ApReport ap_skeleton_global(const WeightField& w, double p, std::span<const IndexVec> z_set, const RhoFamily& rho_family) {
  ApReport upper = ap_skeleton_upper(w, p, z_set);
  const ApReport lower = ap_skeleton_lower(w, p, build_family(w, z_set, p, rho_family));
  upper.bracket = std::make_pair(lower.value, upper.value);
  return upper;
}

ApReport a1_skeleton_upper(const WeightField& w, std::span<const IndexVec> z_set) {
  ApReport rep = all_faces_constant(w, z_set, [&](const CellLattice& l, Eigen::Index i, double r, int f) {
    return a1_term(w, l, i, r, f);
  });
  rep.cls = "a1";
  rep.p = 1;
  return rep;
}

ApReport a1_skeleton_lower(const WeightField& w, const SharedFamily& family) {
  ApReport best;
  best.value = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < family.rhos.size(); ++t) {
    ApReport r = a1_skeleton_local(w, family.rhos[t], family.selections[t]);
    if (r.value > best.value) best = r;
  }
  best.cls = "a1-lower";
  best.p = 1;
  best.delta = w.delta();
  return best;
}

ApReport a1_skeleton(const WeightField& w, std::span<const IndexVec> z_set, const RhoFamily& rho_family) {
  ApReport upper = a1_skeleton_upper(w, z_set);
  // greedy_rho needs a dual power; p = 2 gives w^-1, the function whose sup enters A^S_1.
  const ApReport lower = a1_skeleton_lower(w, build_family(w, z_set, 2.0, rho_family));
  upper.bracket = std::make_pair(lower.value, upper.value);
  return upper;
}

NonlinearTerm nonlinear_term(const WeightField& w, double p, const Point& x, double r) {
  require_p(p);
  const PrefixTable& g = w.dual(p);
  const GridSpec& grid = w.field().spec();
  const double delta = w.delta().value();
  const auto fs = faces(Skeleton(x, r, w.k()), delta);
  NonlinearTerm t;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Box> boxes;
  for (const auto& f : fs) {
    check_inside(grid, f.box);
    const FaceStats st = face_stats(g, f.box);
    const double avg = static_cast<double>(st.sum / static_cast<long double>(st.cells));
    if (avg < best) {
      best = avg;
      t.face = f.face_index;
    }
    boxes.push_back(f.box);
  }
  t.min_face_average = best;
  t.skeleton_integral = inclusion_exclusion(boxes, [&](const Box& b) { return box_sum(g, b); });
  t.skeleton_measure = inclusion_exclusion(boxes, [&](const Box& b) { return snapped_measure(grid, b); });
  const Point half = Point::Constant(x.size(), delta / 2);
  Box cell;
  cell.lower = x - half;
  cell.upper = x + half;
  t.cell_mass = box_sum(w.mass(), cell);
  if (!(t.skeleton_integral > 0)) throw DomainError("degenerate weight on skeleton");
  const double skel_avg = t.skeleton_integral / t.skeleton_measure;
  t.value = t.cell_mass / t.skeleton_measure * std::pow(best, p) / skel_avg;
  return t;
}

std::vector<SkeletonSample> lattice_samples(std::span<const IndexVec> z_set, Delta delta) {
  std::vector<SkeletonSample> out;
  const auto radii = enumerate_radii(delta);
  for (const auto& z : z_set) {
    const CellLattice lattice(z, delta);
    for (Eigen::Index i = 0; i < lattice.size(); ++i)
      for (double r : radii) out.push_back({lattice.center(i), r});
  }
  return out;
}

ApReport ap_nonlinear(const WeightField& w, double p, std::span<const SkeletonSample> sample) {
  require_p(p);
  (void)w.dual(p);
  std::vector<NonlinearTerm> terms(sample.size());
  parallel_for(sample.size(), [&](std::size_t s) { terms[s] = nonlinear_term(w, p, sample[s].x, sample[s].r); });
  Best best;
  for (std::size_t s = 0; s < sample.size(); ++s) {
    Witness wit;
    wit.i = static_cast<Eigen::Index>(s);
    wit.point = sample[s].x;
    wit.r = sample[s].r;
    wit.face = terms[s].face;
    best.offer(terms[s].value, wit);
  }
  ApReport rep;
  rep.cls = "nonlinear";
  rep.p = p;
  rep.delta = w.delta();
  rep.value = best.value;
  rep.witness = best.witness;
  return rep;
}

double cubic_term(const PrefixTable& w, const PrefixTable& dual, double p, const Box& cube) {
  return box_average(w, cube) * std::pow(box_average(dual, cube), p - 1);
}

ApReport ap_cubic(const SampledField& w, double p, const CubeFamily& family, std::optional<Box> region) {
  require_p(p);
  if ((w.values() <= 0).any()) throw DomainError("weight must be strictly positive");
  if (family.min_side < 1 || family.side_step < 1) throw InvalidInput("bad cube family");
  const GridSpec& g = w.spec();
  const int n = g.dim();
  const PrefixTable mass(w);
  const double e = 1 - conjugate(p);
  const PrefixTable dual(w.map([e](double v) { return std::pow(v, e); }));
  const CellRange reg = snap(g, region.value_or(g.covered()));
  const IndexVec ext = reg.hi - reg.lo;
  const Eigen::Index limit = ext.minCoeff();
  const Eigen::Index max_side = family.max_side > 0 ? std::min(family.max_side, limit) : limit;

  std::vector<Eigen::Index> sides;
  for (Eigen::Index L = family.min_side; L <= max_side; L += family.side_step) sides.push_back(L);
  std::vector<Best> per(sides.size());
  parallel_for(sides.size(), [&](std::size_t s) {
    const Eigen::Index L = sides[s];
    const GridSpec corners(Point::Zero(n), 1.0, (ext.array() - L + 1).matrix());
    const long double vol = std::pow(static_cast<long double>(L), n);
    for (Eigen::Index t = 0; t < corners.size(); ++t) {
      const IndexVec c = corners.unravel(t) + reg.lo;
      const CellRange cube{c, (c.array() + L).matrix()};
      const double aw = static_cast<double>(mass.range_sum(cube) / vol);
      const double ad = static_cast<double>(dual.range_sum(cube) / vol);
      const double v = aw * std::pow(ad, p - 1);
      if (v > per[s].value) {
        per[s].value = v;
        per[s].witness.point = g.origin + g.h * c.cast<double>();
        per[s].witness.side = g.h * static_cast<double>(L);
        per[s].witness.i = t;
      }
    }
  });
  Best best;
  for (const auto& b : per) best.offer(b.value, b.witness);
  ApReport rep;
  rep.cls = "cubic";
  rep.p = p;
  rep.value = best.value;
  rep.witness = best.witness;
  return rep;
}

MonotoneTable check_p_monotone(const WeightField& w, std::span<const double> p_list, std::span<const IndexVec> z_set,
                               const RhoFamily& rho_family, double tol) {
  if (p_list.empty()) throw InvalidInput("p list must not be empty");
  for (std::size_t t = 1; t < p_list.size(); ++t)
    if (!(p_list[t] >= p_list[t - 1])) throw InvalidInput("p list must be ascending");
  const SharedFamily family = build_family(w, z_set, p_list.front(), rho_family);
  MonotoneTable table;
  table.pass = true;
  for (double p : p_list) {
    table.rows.push_back({p, ap_skeleton_upper(w, p, z_set).value, ap_skeleton_lower(w, p, family).value});
    if (table.rows.size() > 1) {
      const auto& a = table.rows[table.rows.size() - 2];
      const auto& b = table.rows.back();
      table.pass = table.pass && b.upper <= a.upper * (1 + tol) && b.lower <= a.lower * (1 + tol);
    }
  }
  return table;
}

LimitTable a1_limit_scan(const WeightField& w, std::span<const double> p_sequence, std::span<const IndexVec> z_set) {
  for (std::size_t t = 0; t < p_sequence.size(); ++t) {
    require_p(p_sequence[t]);
    if (t > 0 && !(p_sequence[t] < p_sequence[t - 1])) throw InvalidInput("p sequence must decrease towards 1");
  }
  LimitTable table;
  table.a1 = a1_skeleton_upper(w, z_set).value;
  for (double p : p_sequence) {
    const double v = ap_skeleton_upper(w, p, z_set).value;
    table.rows.push_back({p, v, v - table.a1});
  }
  return table;
}

nlohmann::ordered_json to_json(const ApReport& rep) {
  nlohmann::ordered_json j;
  j["class"] = rep.cls;
  j["p"] = rep.p;
  j["delta"] = rep.delta.str();
  j["value"] = rep.value;
  nlohmann::ordered_json wit;
  std::vector<Eigen::Index> z(rep.witness.z.data(), rep.witness.z.data() + rep.witness.z.size());
  wit["z"] = z;
  wit["i"] = rep.witness.i;
  wit["r"] = rep.witness.r;
  wit["face"] = rep.witness.face;
  if (rep.witness.point.size() > 0) {
    wit["point"] = std::vector<double>(rep.witness.point.data(), rep.witness.point.data() + rep.witness.point.size());
  }
  if (rep.witness.side > 0) wit["side"] = rep.witness.side;
  j["witness"] = wit;
  if (rep.bracket) j["bracket"] = {{"lower", rep.bracket->first}, {"upper", rep.bracket->second}};
  return j;
}

}  // namespace skelmax
