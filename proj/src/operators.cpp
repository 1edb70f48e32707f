// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include "skelmax/operators.hpp"

#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include "skelmax/grid_io.hpp"
#include "skelmax/parallel.hpp"

namespace skelmax {

RhoAssignment::RhoAssignment(CellLattice lattice, std::vector<int> steps)
    : lattice_(std::move(lattice)), steps_(std::move(steps)) {
  if (static_cast<Eigen::Index>(steps_.size()) != lattice_.size())
    throw InvalidInput("rho assignment needs one radius per lattice cell");
  const int m = lattice_.delta().m;
  for (int s : steps_)
    if (s < m || s > 2 * m) throw InvalidInput("rho radius outside [1,2]");
}

std::vector<Skeleton> RhoAssignment::skeletons(int k) const {
  std::vector<Skeleton> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i)
    out.emplace_back(lattice_.center(static_cast<Eigen::Index>(i)), radius(i), k);
  return out;
}

RhoAssignment RhoAssignment::constant(const CellLattice& lattice, double r) {
  const int s = radius_steps(r, lattice.delta());
  return {lattice, std::vector<int>(static_cast<std::size_t>(lattice.size()), s)};
}

RhoAssignment RhoAssignment::random(const CellLattice& lattice, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int m = lattice.delta().m;
  std::uniform_int_distribution<int> pick(m, 2 * m);
  std::vector<int> steps(static_cast<std::size_t>(lattice.size()));
  for (auto& s : steps) s = pick(rng);
  return {lattice, std::move(steps)};
}

SkeletonParams SkeletonParams::lattice(Delta delta, int k, double width_factor) {
  return {width_factor * delta.value(), enumerate_radii(delta), k};
}

namespace {

/// Face boxes relative to the skeleton center, per (radius, face).
struct FaceOffsets {
  int faces_per_radius = 0;
  std::vector<Point> lower;
  std::vector<Point> upper;
};

FaceOffsets face_offsets(int n, const SkeletonParams& params) {
  FaceOffsets off;
  off.faces_per_radius = face_count(n, params.k);
  const Point origin = Point::Zero(n);
  for (double r : params.radii) {
    for (const auto& f : faces(Skeleton(origin, r, params.k), params.width)) {
      off.lower.push_back(f.box.lower);
      off.upper.push_back(f.box.upper);
    }
  }
  return off;
}

Box shifted(const Point& x, const Point& lo, const Point& hi) {
  Box b;
  b.lower = x + lo;
  b.upper = x + hi;
  return b;
}

void check_margin(const GridSpec& spec, const Point& x, double reach) {
  const Box dom = spec.covered();
  const double tol = 1e-9 * spec.h;
  for (int j = 0; j < spec.dim(); ++j) {
    if (x[j] - reach < dom.lower[j] - tol || x[j] + reach > dom.upper[j] + tol) {
      std::ostringstream msg;
      msg << "evaluation point (";
      for (int t = 0; t < x.size(); ++t) msg << (t ? "," : "") << format_real(x[t]);
      msg << ") is closer than " << format_real(reach) << " to the grid boundary";
      throw InvalidInput(msg.str());
    }
  }
}

double average(const PrefixTable& f, const Box& b) {
  const CellRange r = snap(f.spec(), b);
  const Eigen::Index cnt = r.count();
  if (cnt == 0) throw DomainError("degenerate box");
  return static_cast<double>(f.range_sum(r) / static_cast<long double>(cnt));
}

double maximal_at(const PrefixTable& f, const FaceOffsets& off, std::size_t radii, const Point& x) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t ri = 0; ri < radii; ++ri) {
    double lo = std::numeric_limits<double>::infinity();
    for (int j = 0; j < off.faces_per_radius; ++j) {
      const std::size_t t = ri * static_cast<std::size_t>(off.faces_per_radius) + static_cast<std::size_t>(j);
      lo = std::min(lo, average(f, shifted(x, off.lower[t], off.upper[t])));
      if (lo <= best) break;
    }
    best = std::max(best, lo);
  }
  return best;
}

}  // namespace

Eigen::ArrayXd skeleton_maximal(const PrefixTable& f, const SkeletonParams& params, std::span<const Point> points) {
  if (params.radii.empty()) throw InvalidInput("skeleton_maximal: empty radius grid");
  const int n = f.spec().dim();
  const FaceOffsets off = face_offsets(n, params);
  const double reach = *std::max_element(params.radii.begin(), params.radii.end()) + params.width;
  for (const auto& x : points) check_margin(f.spec(), x, reach);
  Eigen::ArrayXd out(static_cast<Eigen::Index>(points.size()));
  parallel_for(points.size(), [&](std::size_t i) {
    out[static_cast<Eigen::Index>(i)] = maximal_at(f, off, params.radii.size(), points[i]);
  });
  return out;
}

MaximalField skeleton_maximal(const PrefixTable& f, const SkeletonParams& params, const GridSpec& eval) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(eval.size()));
  for (Eigen::Index i = 0; i < eval.size(); ++i) pts.push_back(eval.midpoint(i));
  return {eval, skeleton_maximal(f, params, pts)};
}

Eigen::ArrayXd linearized_maximal(const PrefixTable& f, const RhoAssignment& rho, const FaceSelection& sel,
                                  double width) {
  if (sel.size() != rho.size()) throw InvalidInput("linearized_maximal: selection and rho sizes differ");
  const auto skels = rho.skeletons(sel.k);
  for (const auto& s : skels) check_margin(f.spec(), s.center, s.r + width);
  Eigen::ArrayXd out(static_cast<Eigen::Index>(rho.size()));
  parallel_for(rho.size(), [&](std::size_t i) {
    out[static_cast<Eigen::Index>(i)] = average(f, face(skels[i], width, sel.choice[i]).box);
  });
  return out;
}

Eigen::ArrayXd max_face_maximal(const PrefixTable& f, const RhoAssignment& rho, double width, int k) {
  const auto skels = rho.skeletons(k);
  for (const auto& s : skels) check_margin(f.spec(), s.center, s.r + width);
  Eigen::ArrayXd out(static_cast<Eigen::Index>(rho.size()));
  parallel_for(rho.size(), [&](std::size_t i) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& fc : faces(skels[i], width)) best = std::max(best, average(f, fc.box));
    out[static_cast<Eigen::Index>(i)] = best;
  });
  return out;
}

RhoAssignment greedy_rho(const PrefixTable& f, const CellLattice& lattice, double width, int k) {
  const SkeletonParams params{width, enumerate_radii(lattice.delta()), k};
  const FaceOffsets off = face_offsets(lattice.dim(), params);
  std::vector<int> steps(static_cast<std::size_t>(lattice.size()));
  const double reach = 2.0 + width;
  for (Eigen::Index i = 0; i < lattice.size(); ++i) check_margin(f.spec(), lattice.center(i), reach);
  parallel_for(steps.size(), [&](std::size_t i) {
    const Point x = lattice.center(static_cast<Eigen::Index>(i));
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t ri = 0; ri < params.radii.size(); ++ri) {
      double lo = std::numeric_limits<double>::infinity();
      for (int j = 0; j < off.faces_per_radius; ++j) {
        const std::size_t t = ri * static_cast<std::size_t>(off.faces_per_radius) + static_cast<std::size_t>(j);
        lo = std::min(lo, average(f, shifted(x, off.lower[t], off.upper[t])));
        if (lo <= best) break;
      }
      if (lo > best) {
        best = lo;
        arg = ri;
      }
    }
    steps[i] = lattice.delta().m + static_cast<int>(arg);
  });
  return {lattice, std::move(steps)};
}

double lp_norm_masses(const Eigen::ArrayXd& g, const Eigen::ArrayXd& masses, double p) {
  if (g.size() != masses.size()) throw InvalidInput("lp_norm_masses: size mismatch");
  const Eigen::ArrayXd terms = g.abs().pow(p) * masses;
  return std::pow(pairwise_sum(terms), 1.0 / p);
}

Eigen::ArrayXd cell_masses(const PrefixTable& w, const GridSpec& eval) {
  Eigen::ArrayXd m(eval.size());
  const Point half = Point::Constant(eval.dim(), eval.h / 2);
  for (Eigen::Index i = 0; i < eval.size(); ++i) {
    const Point c = eval.midpoint(i);
    m[i] = box_sum(w, shifted(c, -half, half));
  }
  return m;
}

DominationReport check_local_domination(const SampledField& f, const SampledField& w, double p,
                                        const LocalFrame& frame, double tol) {
  if (!(f.spec() == frame.grid()) || !(w.spec() == frame.grid()))
    throw InvalidInput("check_local_domination: fields must live on the frame grid");
  if (!(p >= 1)) throw InvalidInput("check_local_domination: p must be >= 1");
  if (frame.pad > 3) {
    const LocalFrame seven(frame.z, frame.delta, frame.refine, 3);
    const CellRange inside = snap(f.spec(), seven.padded_cube());
    for (Eigen::Index i = 0; i < f.spec().size(); ++i) {
      const IndexVec c = f.spec().unravel(i);
      const bool in = ((c.array() >= inside.lo.array()) && (c.array() < inside.hi.array())).all();
      if (!in && f[i] != 0) throw InvalidInput("check_local_domination: f must be supported on 7Q_z");
    }
  }
  const PrefixTable ft(f), wt(w);
  const Delta delta = frame.delta;
  const GridSpec dense = frame.inner_grid();
  const MaximalField m = skeleton_maximal(ft, SkeletonParams::lattice(delta, 1), dense);
  DominationReport rep;
  rep.lhs = lp_norm_masses(m.values(), cell_masses(wt, dense), p);

  const CellLattice lattice = frame.lattice();
  const RhoAssignment rho = greedy_rho(ft, lattice, delta.value());
  const Eigen::ArrayXd mt = max_face_maximal(ft, rho, 3 * delta.value());
  rep.rhs = 3 * lp_norm_masses(mt, cell_masses(wt, lattice.grid()), p);
  rep.pass = rep.lhs <= rep.rhs * (1 + tol);
  return rep;
}

namespace {

/// Sliding max along one axis. Input index t on that axis stands for corner
/// c_lo + t; output index s stands for eval cell e_lo + s and takes the max
/// over corners in [e - L + 1, e].
std::vector<double> sliding_max_axis(const std::vector<double>& in, IndexVec& dims, int axis, Eigen::Index c_lo,
                                     Eigen::Index e_lo, Eigen::Index e_hi, Eigen::Index L) {
  const int n = static_cast<int>(dims.size());
  IndexVec out_dims = dims;
  out_dims[axis] = e_hi - e_lo;
  Eigen::Index stride = 1;
  for (int j = 0; j < axis; ++j) stride *= dims[j];
  const Eigen::Index len_in = dims[axis], len_out = out_dims[axis];
  Eigen::Index outer = 1;
  for (int j = axis + 1; j < n; ++j) outer *= dims[j];

  std::vector<double> out(static_cast<std::size_t>(out_dims.prod()));
  std::deque<Eigen::Index> dq;
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (Eigen::Index s = 0; s < stride; ++s) {
      const Eigen::Index base_in = o * len_in * stride + s;
      const Eigen::Index base_out = o * len_out * stride + s;
      dq.clear();
      Eigen::Index next = 0;
      for (Eigen::Index e = 0; e < len_out; ++e) {
        const Eigen::Index hi = std::min(len_in - 1, e_lo + e - c_lo);
        const Eigen::Index lo = std::max<Eigen::Index>(0, e_lo + e - L + 1 - c_lo);
        for (; next <= hi; ++next) {
          const double v = in[static_cast<std::size_t>(base_in + next * stride)];
          while (!dq.empty() && in[static_cast<std::size_t>(base_in + dq.back() * stride)] <= v) dq.pop_back();
          dq.push_back(next);
        }
        while (dq.front() < lo) dq.pop_front();
        out[static_cast<std::size_t>(base_out + e * stride)] = in[static_cast<std::size_t>(base_in + dq.front() * stride)];
      }
    }
  }
  dims = out_dims;
  return out;
}

}  // namespace

MaximalField hl_maximal(const SampledField& f, const Box& region, const CubeFamily& family) {
  const GridSpec& spec = f.spec();
  const int n = spec.dim();
  const CellRange eval = snap(spec, region);
  if (eval.empty()) throw InvalidInput("hl_maximal: region misses the grid");
  const PrefixTable table(f);
  const Eigen::Index limit = spec.dims.minCoeff();
  const Eigen::Index max_side = family.max_side > 0 ? std::min(family.max_side, limit) : limit;
  if (family.min_side < 1 || family.side_step < 1) throw InvalidInput("hl_maximal: bad cube family");

  const IndexVec edims = eval.hi - eval.lo;
  Eigen::ArrayXd best = Eigen::ArrayXd::Constant(edims.prod(), -std::numeric_limits<double>::infinity());
  for (Eigen::Index L = family.min_side; L <= max_side; L += family.side_step) {
    IndexVec c_lo(n), c_hi(n);
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      c_lo[j] = std::max<Eigen::Index>(0, eval.lo[j] - L + 1);
      c_hi[j] = std::min(spec.dims[j] - L, eval.hi[j] - 1);
      ok = ok && c_lo[j] <= c_hi[j];
    }
    if (!ok) continue;
    IndexVec dims = (c_hi - c_lo).array() + 1;
    const GridSpec corner_grid(Point::Zero(n), 1.0, dims);
    std::vector<double> avg(static_cast<std::size_t>(dims.prod()));
    const long double vol = std::pow(static_cast<long double>(L), n);
    for (Eigen::Index t = 0; t < corner_grid.size(); ++t) {
      const IndexVec c = (corner_grid.unravel(t) + c_lo).eval();
      const CellRange cube{c, (c.array() + L).matrix()};
      avg[static_cast<std::size_t>(t)] = static_cast<double>(table.range_sum(cube) / vol);
    }
    for (int j = 0; j < n; ++j) avg = sliding_max_axis(avg, dims, j, c_lo[j], eval.lo[j], eval.hi[j], L);
    for (Eigen::Index t = 0; t < best.size(); ++t) best[t] = std::max(best[t], avg[static_cast<std::size_t>(t)]);
  }
  const Point origin = (spec.origin.array() + spec.h * eval.lo.cast<double>().array()).matrix();
  return {GridSpec(origin, spec.h, edims), std::move(best)};
}

}  // namespace skelmax
