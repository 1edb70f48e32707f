// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "skelmax/error.hpp"

namespace skelmax {

inline constexpr int kMaxDim = 3;

template <typename Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Point = VecT<double>;
using IndexVec = VecT<Eigen::Index>;

/// Cells whose midpoint lies within a bound that is this many cell widths away
/// are snapped as if the midpoint lay exactly on it.
inline constexpr double kSnapTolerance = 1e-9;

/// Lattice width \f$\delta = 1/m\f$, kept as the integer m so lattice
/// coordinates stay exact.
struct Delta {
  int m = 1;

  double value() const { return 1.0 / m; }
  friend bool operator==(const Delta&, const Delta&) = default;

  /// Accepts "1/m" or a decimal whose reciprocal is an integer.
  static Delta parse(std::string_view text);
  std::string str() const { return "1/" + std::to_string(m); }
};

inline Delta Delta::parse(std::string_view text) {
  auto fail = [&] { return InvalidInput("delta must be 1/m, got '" + std::string(text) + "'"); };
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  if (s.empty()) throw fail();
  if (auto slash = s.find('/'); slash != std::string::npos) {
    if (s.substr(0, slash) != "1") throw fail();
    const std::string den = s.substr(slash + 1);
    if (den.empty() || !std::all_of(den.begin(), den.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw fail();
    const long m = std::stol(den);
    if (m < 1 || m > 1 << 20) throw fail();
    return Delta{static_cast<int>(m)};
  }
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(s, &used);
    if (used != s.size()) throw fail();
  } catch (const std::logic_error&) {
    throw fail();
  }
  if (!(v > 0) || v > 1) throw fail();
  const double m = std::round(1.0 / v);
  if (std::abs(1.0 / v - m) > 1e-9 * m) throw fail();
  return Delta{static_cast<int>(m)};
}

/// Half-open axis-aligned box [lower, upper).
template <typename Scalar>
struct BoxT {
  VecT<Scalar> lower;
  VecT<Scalar> upper;

  BoxT() = default;
  BoxT(VecT<Scalar> lo, VecT<Scalar> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw InvalidInput("box corners differ in dimension");
    for (Eigen::Index j = 0; j < lower.size(); ++j)
      if (!(lower[j] <= upper[j])) throw InvalidInput("box has lower > upper");
  }

  int dim() const { return static_cast<int>(lower.size()); }
  Scalar volume() const { return (upper - lower).prod(); }

  bool contains(const VecT<Scalar>& other_lower, const VecT<Scalar>& other_upper, Scalar tol = 0) const {
    return ((lower.array() - tol) <= other_lower.array()).all() &&
           (other_upper.array() <= (upper.array() + tol)).all();
  }
  bool contains(const BoxT& b, Scalar tol = 0) const { return contains(b.lower, b.upper, tol); }

  /// Intersection; empty when any axis collapses (lower is clamped to upper).
  BoxT intersect(const BoxT& b) const {
    BoxT r;
    r.lower = lower.cwiseMax(b.lower);
    r.upper = upper.cwiseMin(b.upper);
    r.upper = r.upper.cwiseMax(r.lower);
    return r;
  }
  bool empty() const { return ((upper - lower).array() <= 0).any(); }
};
using Box = BoxT<double>;

/// Uniform axis-aligned grid: cell c covers origin + h*[c, c+1).
template <typename Scalar>
struct GridSpecT {
  VecT<Scalar> origin;
  Scalar h = 1;
  IndexVec dims;

  GridSpecT() = default;
  GridSpecT(VecT<Scalar> o, Scalar spacing, IndexVec d) : origin(std::move(o)), h(spacing), dims(std::move(d)) {
    if (origin.size() != dims.size() || dims.size() < 1 || dims.size() > kMaxDim)
      throw InvalidInput("grid dimension must be between 1 and 3");
    if (!(h > 0) || !std::isfinite(static_cast<double>(h))) throw InvalidInput("grid spacing must be positive");
    if ((dims.array() < 1).any()) throw InvalidInput("grid dims must be >= 1");
  }

  int dim() const { return static_cast<int>(dims.size()); }
  Eigen::Index size() const { return dims.prod(); }
  Scalar cell_volume() const { return std::pow(h, dim()); }

  BoxT<Scalar> covered() const {
    return {origin, (origin.array() + h * dims.template cast<Scalar>().array()).matrix()};
  }

  /// Row-major with axis 0 fastest.
  Eigen::Index linear(const IndexVec& c) const {
    Eigen::Index idx = 0;
    for (int j = dim() - 1; j >= 0; --j) idx = idx * dims[j] + c[j];
    return idx;
  }
  IndexVec unravel(Eigen::Index idx) const {
    IndexVec c(dim());
    for (int j = 0; j < dim(); ++j) {
      c[j] = idx % dims[j];
      idx /= dims[j];
    }
    return c;
  }
  VecT<Scalar> midpoint(const IndexVec& c) const {
    return (origin.array() + h * (c.template cast<Scalar>().array() + Scalar(0.5))).matrix();
  }
  VecT<Scalar> midpoint(Eigen::Index idx) const { return midpoint(unravel(idx)); }

  friend bool operator==(const GridSpecT& a, const GridSpecT& b) {
    return a.dims.size() == b.dims.size() && a.h == b.h && a.origin == b.origin && a.dims == b.dims;
  }
};
using GridSpec = GridSpecT<double>;

/// Half-open index range [lo, hi) of cells, clamped to the grid.
struct CellRange {
  IndexVec lo;
  IndexVec hi;

  bool empty() const { return ((hi - lo).array() <= 0).any(); }
  Eigen::Index count() const { return empty() ? 0 : (hi - lo).prod(); }
};

/// Cells whose midpoints lie in the half-open box b.
template <typename Scalar>
CellRange snap(const GridSpecT<Scalar>& spec, const BoxT<Scalar>& b) {
  if (b.dim() != spec.dim()) throw InvalidInput("box and grid dimensions differ");
  CellRange r{IndexVec(spec.dim()), IndexVec(spec.dim())};
  for (int j = 0; j < spec.dim(); ++j) {
    const double lo = (static_cast<double>(b.lower[j] - spec.origin[j])) / spec.h - 0.5;
    const double hi = (static_cast<double>(b.upper[j] - spec.origin[j])) / spec.h - 0.5;
    auto first = static_cast<Eigen::Index>(std::ceil(lo - kSnapTolerance));
    auto last = static_cast<Eigen::Index>(std::ceil(hi - kSnapTolerance));
    r.lo[j] = std::clamp<Eigen::Index>(first, 0, spec.dims[j]);
    r.hi[j] = std::clamp<Eigen::Index>(last, 0, spec.dims[j]);
  }
  return r;
}

template <typename Scalar>
Scalar snapped_measure(const GridSpecT<Scalar>& spec, const BoxT<Scalar>& b) {
  return static_cast<Scalar>(snap(spec, b).count()) * spec.cell_volume();
}

/// Calls fn(linear_index) for every cell of the range in row-major order.
template <typename Scalar, typename Fn>
void for_each_cell(const GridSpecT<Scalar>& spec, const CellRange& r, Fn&& fn) {
  if (r.empty()) return;
  const int n = spec.dim();
  IndexVec c = r.lo;
  while (true) {
    const Eigen::Index base = spec.linear(c);
    for (Eigen::Index i = 0; i < r.hi[0] - r.lo[0]; ++i) fn(base + i);
    int j = 1;
    for (; j < n; ++j) {
      if (++c[j] < r.hi[j]) break;
      c[j] = r.lo[j];
    }
    if (j == n) return;
  }
}

/// Pairwise (cascade) summation in fixed order.
template <typename T>
T pairwise_sum(std::span<const T> v) {
  constexpr std::size_t kBlock = 32;
  if (v.size() <= kBlock) {
    T s = 0;
    for (const T& x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

template <typename Derived>
typename Derived::Scalar pairwise_sum(const Eigen::DenseBase<Derived>& v) {
  using T = typename Derived::Scalar;
  const auto& ev = v.derived().eval();
  return pairwise_sum<T>(std::span<const T>(ev.data(), static_cast<std::size_t>(ev.size())));
}

template <typename Scalar>
class SampledFieldT {
 public:
  using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  SampledFieldT() = default;
  SampledFieldT(GridSpecT<Scalar> spec, Values values) : spec_(std::move(spec)), values_(std::move(values)) {
    if (values_.size() != spec_.size()) throw InvalidInput("field value count does not match grid");
    if (!values_.allFinite()) throw InvalidInput("field values must be finite");
  }

  const GridSpecT<Scalar>& spec() const { return spec_; }
  const Values& values() const { return values_; }
  Scalar operator[](Eigen::Index i) const { return values_[i]; }

  /// Same grid, values transformed elementwise.
  template <typename Fn>
  SampledFieldT map(Fn&& fn) const {
    return SampledFieldT(spec_, values_.unaryExpr(std::forward<Fn>(fn)).eval());
  }

  friend bool operator==(const SampledFieldT& a, const SampledFieldT& b) {
    return a.spec_ == b.spec_ && (a.values_ == b.values_).all();
  }

 private:
  GridSpecT<Scalar> spec_;
  Values values_;
};
using SampledField = SampledFieldT<double>;

/// Samples fn at every cell midpoint.
template <typename Scalar, typename Sampler>
SampledFieldT<Scalar> build_field(const GridSpecT<Scalar>& spec, Sampler&& sampler) {
  typename SampledFieldT<Scalar>::Values values(spec.size());
  for (Eigen::Index i = 0; i < spec.size(); ++i) {
    const VecT<Scalar> x = spec.midpoint(i);
    const Scalar v = sampler(x);
    if (!std::isfinite(static_cast<double>(v))) {
      std::ostringstream msg;
      msg << "sampler returned a non-finite value at (";
      for (int j = 0; j < x.size(); ++j) msg << (j ? "," : "") << x[j];
      msg << ")";
      throw InvalidInput(msg.str());
    }
    values[i] = v;
  }
  return SampledFieldT<Scalar>(spec, std::move(values));
}

template <typename Scalar>
struct PrefixAccumulator {
  using type = Scalar;
};
template <>
struct PrefixAccumulator<double> {
  using type = long double;
};
template <>
struct PrefixAccumulator<float> {
  using type = double;
};

/// Summed-area table: entry (i_0, .., i_{n-1}) holds the sum over cells with
/// every index below i. Box sums are read back by inclusion-exclusion over
/// the 2^n corners.
template <typename Scalar>
class PrefixTableT {
 public:
  using Accum = typename PrefixAccumulator<Scalar>::type;

  PrefixTableT() = default;
  explicit PrefixTableT(const SampledFieldT<Scalar>& f) : spec_(f.spec()) {
    const int n = spec_.dim();
    ext_ = (spec_.dims.array() + 1).matrix();
    stride_ = IndexVec(n);
    Eigen::Index s = 1;
    for (int j = 0; j < n; ++j) {
      stride_[j] = s;
      s *= ext_[j];
    }
    table_.assign(static_cast<std::size_t>(s), Accum(0));
    // Scatter values at offset +1 on every axis, then cumulate along each axis.
    for (Eigen::Index i = 0; i < spec_.size(); ++i) {
      const IndexVec c = spec_.unravel(i);
      table_[offset_of((c.array() + 1).matrix())] = static_cast<Accum>(f[i]);
    }
    for (int j = 0; j < n; ++j) {
      const Eigen::Index step = stride_[j];
      for (std::size_t t = 0; t < table_.size(); ++t) {
        const Eigen::Index cj = (static_cast<Eigen::Index>(t) / step) % ext_[j];
        if (cj > 0) table_[t] += table_[t - static_cast<std::size_t>(step)];
      }
    }
  }

  const GridSpecT<Scalar>& spec() const { return spec_; }

  /// Raw cell sum over an index range (no h^n factor).
  Accum range_sum(const CellRange& r) const {
    if (r.empty()) return 0;
    const int n = spec_.dim();
    if (n == 2) {
      const auto a = offset2(r.lo[0], r.lo[1]), b = offset2(r.hi[0], r.lo[1]);
      const auto c = offset2(r.lo[0], r.hi[1]), d = offset2(r.hi[0], r.hi[1]);
      return table_[d] - table_[b] - table_[c] + table_[a];
    }
    Accum s = 0;
    for (int corner = 0; corner < (1 << n); ++corner) {
      std::size_t off = 0;
      int parity = 0;
      for (int j = 0; j < n; ++j) {
        const bool upper = (corner >> j) & 1;
        off += static_cast<std::size_t>((upper ? r.hi[j] : r.lo[j]) * stride_[j]);
        parity += upper ? 0 : 1;
      }
      s += (parity % 2 == 0) ? table_[off] : -table_[off];
    }
    return s;
  }

 private:
  std::size_t offset_of(const IndexVec& c) const { return static_cast<std::size_t>(c.dot(stride_)); }
  std::size_t offset2(Eigen::Index i0, Eigen::Index i1) const {
    return static_cast<std::size_t>(i0 + i1 * stride_[1]);
  }

  GridSpecT<Scalar> spec_;
  IndexVec ext_;
  IndexVec stride_;
  std::vector<Accum> table_;
};
using PrefixTable = PrefixTableT<double>;

/// Integral of the field over b: h^n times the sum of cells whose midpoint is in b.
/// Returns 0 for a box that misses every cell.
template <typename Scalar>
Scalar box_sum(const PrefixTableT<Scalar>& table, const BoxT<Scalar>& b) {
  const CellRange r = snap(table.spec(), b);
  return static_cast<Scalar>(table.range_sum(r) * table.spec().cell_volume());
}

template <typename Scalar>
Scalar box_average(const PrefixTableT<Scalar>& table, const BoxT<Scalar>& b) {
  const CellRange r = snap(table.spec(), b);
  if (r.empty()) throw DomainError("degenerate box");
  return static_cast<Scalar>(table.range_sum(r) / static_cast<typename PrefixTableT<Scalar>::Accum>(r.count()));
}

/// (sum over region cells of |f|^p w h^n)^(1/p), pairwise-summed in row-major order.
template <typename Scalar>
Scalar lp_norm(const SampledFieldT<Scalar>& f, const SampledFieldT<Scalar>& w, Scalar p, const BoxT<Scalar>& region) {
  if (!(f.spec() == w.spec())) throw InvalidInput("lp_norm: field and weight live on different grids");
  if (!(p >= 1)) throw InvalidInput("lp_norm: p must be >= 1");
  std::vector<Scalar> terms;
  const CellRange r = snap(f.spec(), region);
  terms.reserve(static_cast<std::size_t>(r.count()));
  for_each_cell(f.spec(), r, [&](Eigen::Index i) { terms.push_back(std::pow(std::abs(f[i]), p) * w[i]); });
  const Scalar s = pairwise_sum<Scalar>(terms) * f.spec().cell_volume();
  return std::pow(s, Scalar(1) / p);
}

}  // namespace skelmax
