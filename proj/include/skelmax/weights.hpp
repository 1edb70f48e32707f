// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skelmax/geometry.hpp"
#include "skelmax/operators.hpp"
#include "skelmax/selection.hpp"

namespace skelmax {

/// Analytic or file-backed weight.
///   constant:       value
///   power:          |x - center|^alpha
///   twovalue:       1 where x[axis] < split, K elsewhere
///   checkerboard:   K on cells of the period-lattice with odd index sum, 1 elsewhere
///   skeleton_bump:  1 + height on the width-fattened skeleton S(center, r)
///   grid:           values read from a grid CSV
struct WeightSpec {
  std::string kind = "constant";
  double value = 1;
  double alpha = 1;
  double K = 4;
  int axis = 0;
  double split = 0;
  double period = 0.5;
  double r = 1;
  double height = 1;
  double width = 0.125;
  std::vector<double> center;
  std::string path;

  static WeightSpec parse(const std::string& text);  // "kind:key=val,..." or JSON
  static WeightSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string str() const { return to_json().dump(); }
};

SampledField make_weight(const WeightSpec& spec, const GridSpec& grid);

/// Grid covering z + [-pad, 1 + pad]^n for every z in z_set.
GridSpec covering_grid(std::span<const IndexVec> z_set, Delta delta, int refine = 4, int pad = 3);

/// Attaining configuration of a constant. Skeleton constants use (z, i, r, face);
/// cubic ones the cube (point = lower corner, side); nonlinear ones (point, r, face).
struct Witness {
  IndexVec z;
  Eigen::Index i = -1;
  double r = 0;
  int face = -1;
  Point point;
  double side = 0;
};

struct ApReport {
  std::string cls;
  double p = 0;
  Delta delta;
  double value = 0;
  Witness witness;
  std::optional<std::pair<double, double>> bracket;  // (lower, upper)
};

/// A positive weight on a grid, with cached prefix tables of w and of the
/// dual powers w^(1-p').
class WeightField {
 public:
  WeightField(SampledField w, Delta delta, int k = 1);

  const SampledField& field() const { return w_; }
  Delta delta() const { return delta_; }
  int k() const { return k_; }
  const PrefixTable& mass() const { return mass_; }
  /// Prefix table of w^(1-p') = w^(-p'/p).
  const PrefixTable& dual(double p) const;
  SampledField dual_field(double p) const;
  /// Smallest w over the cells snapped to b.
  double min_on(const Box& b) const;

 private:
  SampledField w_;
  Delta delta_;
  int k_;
  PrefixTable mass_;
  mutable std::mutex mu_;
  mutable std::map<double, std::unique_ptr<PrefixTable>> dual_;
};

/// (1/|l|) w(Q_z(i)) (avg_l w^(1-p'))^(p-1) for face `face` of S(x_i, r).
double skeleton_term(const WeightField& w, double p, const CellLattice& lattice, Eigen::Index i, double r, int face);
/// (1/|l|) w(Q_z(i)) ||w^-1||_{L^inf(l)}.
double a1_term(const WeightField& w, const CellLattice& lattice, Eigen::Index i, double r, int face);

/// [w]_{A^S_{p,rho,z}} for a fixed radius assignment and face selection.
ApReport ap_skeleton_local(const WeightField& w, const RhoAssignment& rho, const FaceSelection& sel, double p);
ApReport a1_skeleton_local(const WeightField& w, const RhoAssignment& rho, const FaceSelection& sel);

/// Radius assignments tried for the lower estimate: greedy_rho on w^(-p'/p),
/// every constant radius, and `random_count` seeded random assignments.
struct RhoFamily {
  bool greedy = true;
  bool constant_slices = true;
  int random_count = 4;
  std::uint64_t seed = 0;
};

/// An explicit list of (z, rho, greedy selection) shared between evaluations.
struct SharedFamily {
  std::vector<RhoAssignment> rhos;
  std::vector<FaceSelection> selections;
};
SharedFamily build_family(const WeightField& w, std::span<const IndexVec> z_set, double p, const RhoFamily& spec);

/// Upper estimate: max over (z, i, r, every face) of skeleton_term.
ApReport ap_skeleton_upper(const WeightField& w, double p, std::span<const IndexVec> z_set);
/// Lower estimate: max of ap_skeleton_local over the shared family.
ApReport ap_skeleton_lower(const WeightField& w, double p, const SharedFamily& family);

/// Bracketed [w]_{A^S_p}; value is the upper estimate.
ApReport ap_skeleton_global(const WeightField& w, double p, std::span<const IndexVec> z_set,
                            const RhoFamily& rho_family = {});

ApReport a1_skeleton_upper(const WeightField& w, std::span<const IndexVec> z_set);
ApReport a1_skeleton_lower(const WeightField& w, const SharedFamily& family);
/// Bracketed [w]_{A^S_1}; value is the upper estimate.
ApReport a1_skeleton(const WeightField& w, std::span<const IndexVec> z_set, const RhoFamily& rho_family = {});

/// Pieces of the nonlinear skeleton quantity at one (x, r).
struct NonlinearTerm {
  double value = 0;
  int face = 0;                 // argmin face, smallest index on ties
  double min_face_average = 0;  // avg over that face of w^(-p'/p)
  double skeleton_integral = 0; // integral of w^(-p'/p) over S_delta(x, r)
  double skeleton_measure = 0;  // snapped |S_delta(x, r)|
  double cell_mass = 0;         // w(Q_delta(x))
};
NonlinearTerm nonlinear_term(const WeightField& w, double p, const Point& x, double r);

struct SkeletonSample {
  Point x;
  double r = 1;
};
/// Lattice centers of every z in z_set crossed with every radius.
std::vector<SkeletonSample> lattice_samples(std::span<const IndexVec> z_set, Delta delta);

ApReport ap_nonlinear(const WeightField& w, double p, std::span<const SkeletonSample> sample);

/// (avg_Q w)(avg_Q w^(1-p'))^(p-1) on one cube.
double cubic_term(const PrefixTable& w, const PrefixTable& dual, double p, const Box& cube);
/// Classical [w]_{A_p} over a cube family inside `region` (whole grid when empty).
ApReport ap_cubic(const SampledField& w, double p, const CubeFamily& family = {}, std::optional<Box> region = {});

struct MonotoneRow {
  double p = 0;
  double upper = 0;
  double lower = 0;
};
struct MonotoneTable {
  std::vector<MonotoneRow> rows;
  bool pass = false;
};
/// Constants for ascending p with one shared (rho, z, selection) family.
MonotoneTable check_p_monotone(const WeightField& w, std::span<const double> p_list, std::span<const IndexVec> z_set,
                               const RhoFamily& rho_family = {}, double tol = 1e-9);

struct LimitRow {
  double p = 0;
  double value = 0;
  double gap = 0;  // value - [w]_{A^S_1}
};
struct LimitTable {
  double a1 = 0;
  std::vector<LimitRow> rows;
};
LimitTable a1_limit_scan(const WeightField& w, std::span<const double> p_sequence, std::span<const IndexVec> z_set);

nlohmann::ordered_json to_json(const ApReport& rep);

}  // namespace skelmax
