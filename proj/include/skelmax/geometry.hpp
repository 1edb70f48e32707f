// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "skelmax/grid.hpp"

namespace skelmax {

/// Boundary k-skeleton of the cube center + [-r, r]^n.
struct Skeleton {
  Point center;
  double r = 1;
  int k = 1;

  Skeleton() = default;
  Skeleton(Point c, double radius, int face_dim);

  int n() const { return static_cast<int>(center.size()); }
};

/// C(n,k) * 2^(n-k).
int face_count(int n, int k);

/// Faces are enumerated by long-axis mask (ascending k-subsets of the axes),
/// then by the signs of the normal axes in binary order. For n=2, k=1:
/// 0 bottom, 1 top, 2 left, 3 right.
struct FaceShape {
  unsigned long_axes = 0;  // bit j set: the face extends along axis j
  unsigned signs = 0;      // bit t set: t-th normal axis sits at +r
};
FaceShape face_shape(int n, int k, int face_index);

/// Affine coordinate k-plane containing a face: the normal axes and their
/// integer offsets on the delta/2-shifted delta-lattice.
struct PlaneKey {
  unsigned normal_axes = 0;
  std::array<std::int64_t, kMaxDim> offsets{};  // indexed by axis; zero on long axes

  auto operator<=>(const PlaneKey&) const = default;
  bool operator==(const PlaneKey&) const = default;

  /// `axis:index` per normal axis, joined by ';'.
  std::string str() const;
};

struct FattenedFace {
  Box box;
  int face_index = 0;
  unsigned long_axes = 0;
  Point anchor;  // coordinates of the face's plane on the normal axes; center on long axes
  double width = 0;
};

/// Sup-metric width-neighborhoods of the k-faces: long axes span
/// [c - r - width, c + r + width], normal axes [c +- r - width, c +- r + width].
std::vector<FattenedFace> faces(const Skeleton& s, double width);
FattenedFace face(const Skeleton& s, double width, int face_index);

/// Lebesgue measure of the union of the fattened faces (16 delta r for n=2, k=1).
double skeleton_measure(const Skeleton& s, double width);

/// Sum over non-empty subsets T of (-1)^(|T|+1) measure(intersection of T).
template <typename Measure>
double inclusion_exclusion(std::span<const Box> boxes, Measure&& measure) {
  double total = 0;
  auto recurse = [&](auto&& self, std::size_t next, const Box& acc, int depth) -> void {
    for (std::size_t i = next; i < boxes.size(); ++i) {
      const Box inter = depth == 0 ? boxes[i] : acc.intersect(boxes[i]);
      if (inter.empty()) continue;
      total += (depth % 2 == 0 ? 1.0 : -1.0) * measure(inter);
      self(self, i + 1, inter, depth + 1);
    }
  };
  recurse(recurse, 0, Box{}, 0);
  return total;
}

/// [1,2] intersected with delta Z, ascending.
std::vector<double> enumerate_radii(Delta delta);

/// Radius step count r / delta, which must be an integer in [m, 2m].
int radius_steps(double r, Delta delta);

/// The delta-cells Q_z(1..u) of the unit cube with lower corner z.
class CellLattice {
 public:
  CellLattice(IndexVec z, Delta delta);

  const IndexVec& z() const { return z_; }
  Delta delta() const { return delta_; }
  int dim() const { return static_cast<int>(z_.size()); }
  Eigen::Index size() const { return grid_.size(); }

  /// The lattice as a grid whose cell midpoints are the centers x_i.
  const GridSpec& grid() const { return grid_; }
  Point center(Eigen::Index i) const { return grid_.midpoint(i); }
  Box cell(Eigen::Index i) const;
  Box unit_cube() const { return grid_.covered(); }

  /// Index of the cell containing x (the map x -> x^*).
  Eigen::Index psi(const Point& x) const;

 private:
  IndexVec z_;
  Delta delta_;
  GridSpec grid_;
};

CellLattice cell_lattice(const IndexVec& z, Delta delta);

/// Quadrature frame around Q_z: cells of width delta / refine covering
/// z + [-pad, 1 + pad]^n. pad = 3 gives 7Q_z.
struct LocalFrame {
  IndexVec z;
  Delta delta;
  int refine = 4;
  int pad = 3;

  LocalFrame(IndexVec z_, Delta d, int refine_ = 4, int pad_ = 3);

  int dim() const { return static_cast<int>(z.size()); }
  double h() const { return delta.value() / refine; }
  GridSpec grid() const;
  /// Quadrature cells inside Q_z.
  GridSpec inner_grid() const;
  CellLattice lattice() const { return {z, delta}; }
  Box unit_cube() const;
  Box padded_cube() const;
};

/// Exact key of the plane containing the face; throws DomainError
/// "unquantizable plane" when the face is off the lattice.
PlaneKey face_plane(const FattenedFace& f, Delta lattice);

/// Whether every face box of (x_tilde, r, delta) lies inside the matching
/// face box of (x, r, 4 delta).
bool containment_4delta(const Point& x_tilde, const Point& x, double r, double delta, int k = 1);

/// CSV rows `cx,cy,r` (plus cz when n = 3).
void write_skeletons_csv(std::ostream& os, std::span<const Skeleton> skeletons);
std::vector<Skeleton> read_skeletons_csv(std::istream& is, int k = 1);

}  // namespace skelmax
