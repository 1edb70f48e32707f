// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "skelmax/geometry.hpp"
#include "skelmax/grid.hpp"
#include "skelmax/selection.hpp"

namespace skelmax {

/// Operator output sampled on an evaluation grid (one value per cell midpoint).
using MaximalField = SampledField;

/// Radius per lattice cell, stored as integer steps r = steps * delta.
class RhoAssignment {
 public:
  RhoAssignment(CellLattice lattice, std::vector<int> steps);

  const CellLattice& lattice() const { return lattice_; }
  const std::vector<int>& steps() const { return steps_; }
  std::size_t size() const { return steps_.size(); }
  double radius(std::size_t i) const { return static_cast<double>(steps_[i]) / lattice_.delta().m; }

  /// The skeletons S(x_i, rho(x_i)).
  std::vector<Skeleton> skeletons(int k = 1) const;

  static RhoAssignment constant(const CellLattice& lattice, double r);
  static RhoAssignment random(const CellLattice& lattice, std::uint64_t seed);

 private:
  CellLattice lattice_;
  std::vector<int> steps_;
};

/// Fattening width, radius grid and face dimension of a skeleton average.
struct SkeletonParams {
  double width = 0;
  std::vector<double> radii;
  int k = 1;

  /// Width factor * delta with radii [1,2] on the delta grid.
  static SkeletonParams lattice(Delta delta, int k = 1, double width_factor = 1.0);
};

/// max over radii of min over faces of the face average of f.
Eigen::ArrayXd skeleton_maximal(const PrefixTable& f, const SkeletonParams& params, std::span<const Point> points);
MaximalField skeleton_maximal(const PrefixTable& f, const SkeletonParams& params, const GridSpec& eval);

/// Face averages of f over the selected face of S(x_i, rho(x_i)), one per lattice cell.
Eigen::ArrayXd linearized_maximal(const PrefixTable& f, const RhoAssignment& rho, const FaceSelection& sel,
                                  double width);

/// Per-cell largest face average at radius rho(x_i) (the max-face proxy).
Eigen::ArrayXd max_face_maximal(const PrefixTable& f, const RhoAssignment& rho, double width, int k = 1);

/// Per cell, the radius maximizing the min-over-faces average at x_i; ties
/// go to the smallest radius.
RhoAssignment greedy_rho(const PrefixTable& f, const CellLattice& lattice, double width, int k = 1);

struct DominationReport {
  double lhs = 0;
  double rhs = 0;
  bool pass = false;
};

/// ||M_delta f||_{L^p(Q_z,w)} against 3 ||M~_{rho,3 delta} f||_{L^p(Q_z,w)} with rho
/// from greedy_rho and the largest face average per cell.
DominationReport check_local_domination(const SampledField& f, const SampledField& w, double p,
                                        const LocalFrame& frame, double tol = 1e-9);

/// Axis-parallel cubes with corners on the quadrature lattice and side
/// lengths (in cells) min_side, min_side + side_step, ..., up to max_side
/// (0 means as large as the grid allows).
struct CubeFamily {
  Eigen::Index min_side = 1;
  Eigen::Index max_side = 0;
  Eigen::Index side_step = 1;
};

/// Hardy-Littlewood maximal function over a cube family, on the quadrature
/// cells of region.
MaximalField hl_maximal(const SampledField& f, const Box& region, const CubeFamily& family = {});

/// L^p(w) norm of g sampled on eval cells, using the exact w-mass of each cell:
/// (sum_c |g_c|^p w(cell_c))^(1/p).
double lp_norm_masses(const Eigen::ArrayXd& g, const Eigen::ArrayXd& masses, double p);

/// w-mass of every cell of an evaluation grid.
Eigen::ArrayXd cell_masses(const PrefixTable& w, const GridSpec& eval);

}  // namespace skelmax
