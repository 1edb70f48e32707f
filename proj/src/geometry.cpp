// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include "skelmax/geometry.hpp"

#include <bit>
#include <istream>
#include <ostream>
#include <sstream>

#include "skelmax/grid_io.hpp"

namespace skelmax {

namespace {

constexpr double kRadiusTol = 1e-12;
constexpr double kLatticeTol = 1e-6;

int binomial(int n, int k) {
  int c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

std::vector<unsigned> long_axis_masks(int n, int k) {
  std::vector<unsigned> masks;
  for (unsigned m = 0; m < (1u << n); ++m)
    if (std::popcount(m) == k) masks.push_back(m);
  return masks;
}

}  // namespace

Skeleton::Skeleton(Point c, double radius, int face_dim) : center(std::move(c)), r(radius), k(face_dim) {
  if (center.size() < 1 || center.size() > kMaxDim) throw InvalidInput("skeleton dimension must be 1..3");
  if (k < 0 || k >= center.size()) throw InvalidInput("skeleton face dimension must satisfy 0 <= k < n");
  if (!(r >= 1 - kRadiusTol && r <= 2 + kRadiusTol)) throw InvalidInput("skeleton radius must lie in [1,2]");
}

int face_count(int n, int k) { return binomial(n, k) << (n - k); }

FaceShape face_shape(int n, int k, int face_index) {
  const auto masks = long_axis_masks(n, k);
  const int per_mask = 1 << (n - k);
  if (face_index < 0 || face_index >= static_cast<int>(masks.size()) * per_mask)
    throw InvalidInput("face index out of range");
  return {masks[static_cast<std::size_t>(face_index / per_mask)], static_cast<unsigned>(face_index % per_mask)};
}

std::string PlaneKey::str() const {
  std::string s;
  for (int j = 0; j < kMaxDim; ++j) {
    if (!((normal_axes >> j) & 1u)) continue;
    if (!s.empty()) s += ';';
    s += std::to_string(j) + ":" + std::to_string(offsets[static_cast<std::size_t>(j)]);
  }
  return s;
}

FattenedFace face(const Skeleton& s, double width, int face_index) {
  if (!(width > 0)) throw InvalidInput("fattening width must be positive");
  const int n = s.n();
  const FaceShape shape = face_shape(n, s.k, face_index);
  FattenedFace f;
  f.face_index = face_index;
  f.long_axes = shape.long_axes;
  f.width = width;
  f.anchor = s.center;
  Point lo(n), hi(n);
  int t = 0;
  for (int j = 0; j < n; ++j) {
    if ((shape.long_axes >> j) & 1u) {
      lo[j] = s.center[j] - s.r - width;
      hi[j] = s.center[j] + s.r + width;
    } else {
      const double c = ((shape.signs >> t) & 1u) ? s.center[j] + s.r : s.center[j] - s.r;
      ++t;
      f.anchor[j] = c;
      lo[j] = c - width;
      hi[j] = c + width;
    }
  }
  f.box = Box(lo, hi);
  return f;
}

std::vector<FattenedFace> faces(const Skeleton& s, double width) {
  const int count = face_count(s.n(), s.k);
  std::vector<FattenedFace> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) out.push_back(face(s, width, j));
  return out;
}

double skeleton_measure(const Skeleton& s, double width) {
  std::vector<Box> boxes;
  for (const auto& f : faces(s, width)) boxes.push_back(f.box);
  return inclusion_exclusion(boxes, [](const Box& b) { return b.volume(); });
}

std::vector<double> enumerate_radii(Delta delta) {
  std::vector<double> r;
  for (int k = delta.m; k <= 2 * delta.m; ++k) r.push_back(static_cast<double>(k) / delta.m);
  return r;
}

int radius_steps(double r, Delta delta) {
  const double t = r * delta.m;
  const double k = std::round(t);
  if (std::abs(t - k) > kLatticeTol || k < delta.m || k > 2 * delta.m)
    throw InvalidInput("radius " + format_real(r) + " is not in [1,2] on the delta grid");
  return static_cast<int>(k);
}

CellLattice::CellLattice(IndexVec z, Delta delta)
    : z_(std::move(z)),
      delta_(delta),
      grid_(z_.cast<double>(), delta.value(), IndexVec::Constant(z_.size(), delta.m)) {
  if (delta.m < 1) throw InvalidInput("delta must be 1/m with m >= 1");
}

Box CellLattice::cell(Eigen::Index i) const {
  const IndexVec c = grid_.unravel(i);
  const Point lo = (z_.cast<double>().array() + c.cast<double>().array() / delta_.m).matrix();
  const Point hi = (z_.cast<double>().array() + (c.cast<double>().array() + 1) / delta_.m).matrix();
  return {lo, hi};
}

Eigen::Index CellLattice::psi(const Point& x) const {
  if (x.size() != dim()) throw InvalidInput("psi: point dimension mismatch");
  IndexVec c(dim());
  for (int j = 0; j < dim(); ++j) {
    const double t = (x[j] - static_cast<double>(z_[j])) * delta_.m;
    const auto f = static_cast<Eigen::Index>(std::floor(t));
    if (f < 0 || f >= delta_.m) throw InvalidInput("psi: point outside Q_z");
    c[j] = f;
  }
  return grid_.linear(c);
}

CellLattice cell_lattice(const IndexVec& z, Delta delta) { return {z, delta}; }

LocalFrame::LocalFrame(IndexVec z_, Delta d, int refine_, int pad_)
    : z(std::move(z_)), delta(d), refine(refine_), pad(pad_) {
  if (refine < 1) throw InvalidInput("quadrature refinement must be >= 1");
  if (pad < 0) throw InvalidInput("frame padding must be >= 0");
  if (z.size() < 1 || z.size() > kMaxDim) throw InvalidInput("frame dimension must be 1..3");
}

GridSpec LocalFrame::grid() const {
  const Point origin = (z.cast<double>().array() - pad).matrix();
  const Eigen::Index cells = static_cast<Eigen::Index>(1 + 2 * pad) * delta.m * refine;
  return {origin, h(), IndexVec::Constant(dim(), cells)};
}

GridSpec LocalFrame::inner_grid() const {
  return {z.cast<double>(), h(), IndexVec::Constant(dim(), static_cast<Eigen::Index>(delta.m) * refine)};
}

Box LocalFrame::unit_cube() const {
  const Point lo = z.cast<double>();
  return {lo, (lo.array() + 1).matrix()};
}

Box LocalFrame::padded_cube() const {
  const Point lo = (z.cast<double>().array() - pad).matrix();
  return {lo, (lo.array() + 1 + 2 * pad).matrix()};
}

PlaneKey face_plane(const FattenedFace& f, Delta lattice) {
  PlaneKey key;
  for (int j = 0; j < f.anchor.size(); ++j) {
    if ((f.long_axes >> j) & 1u) continue;
    const double t = f.anchor[j] * lattice.m - 0.5;
    const double k = std::round(t);
    if (std::abs(t - k) > kLatticeTol) throw DomainError("unquantizable plane");
    key.normal_axes |= 1u << j;
    key.offsets[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(k);
  }
  return key;
}

bool containment_4delta(const Point& x_tilde, const Point& x, double r, double delta, int k) {
  const Skeleton inner(x_tilde, r, k), outer(x, r, k);
  const auto small = faces(inner, delta);
  const auto big = faces(outer, 4 * delta);
  for (std::size_t j = 0; j < small.size(); ++j)
    if (!big[j].box.contains(small[j].box, 1e-12)) return false;
  return true;
}

void write_skeletons_csv(std::ostream& os, std::span<const Skeleton> skeletons) {
  for (const auto& s : skeletons) {
    for (int j = 0; j < s.n(); ++j) os << format_real(s.center[j]) << ',';
    os << format_real(s.r) << '\n';
  }
}

std::vector<Skeleton> read_skeletons_csv(std::istream& is, int k) {
  std::vector<Skeleton> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(parse_real(cell));
    if (v.size() < 3 || v.size() > 4) throw InvalidInput("skeleton CSV rows need cx,cy[,cz],r");
    Point c(static_cast<Eigen::Index>(v.size() - 1));
    for (std::size_t j = 0; j + 1 < v.size(); ++j) c[static_cast<Eigen::Index>(j)] = v[j];
    out.emplace_back(c, v.back(), k);
  }
  return out;
}

}  // namespace skelmax
