// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "skelmax/verify.hpp"

namespace skelmax {

/// Log-normal weight, constant on delta-cells of the grid: exp(sigma N(0,1)).
SampledField random_weight_field(const GridSpec& grid, Delta delta, std::uint64_t seed, double sigma = 1.0);

/// One of twovalue, checkerboard or power (cycling with the seed) with
/// seeded parameters around Q_0.
WeightSpec random_weight_spec(std::uint64_t seed);

/// Duality bound on a seeded random (f, w, rho, selection) at Q_0.
CheckReport duality_instance(double p, Delta delta, std::uint64_t seed);

/// Local domination of M_delta by the max-face linearized operator on a
/// seeded random (f, w) at Q_0.
CheckReport domination_instance(double p, Delta delta, std::uint64_t seed);

/// Greedy plane loads on `families` random lattice families of size u:
/// lhs = largest greedy max load, rhs = C u^e. Also requires the mean greedy
/// max load not to exceed the mean random-selection max load.
CheckReport selection_check(std::size_t u, int families, std::uint64_t seed, double C = 4.0);

/// Constants nonincreasing in p (shared family) for `weights` seeded weights.
CheckReport monotone_check(Delta delta, std::span<const double> p_list, int weights, std::uint64_t seed);

/// |[w]_{A^S_p} - [w]_{A^S_1}| <= 0.05 [w]_{A^S_1} for twovalue weights with the given K.
CheckReport limit_check(Delta delta, double p, std::span<const double> K_list);

/// Aggregates reports: lhs/rhs from the report with the largest lhs/rhs ratio,
/// pass when every report passes.
CheckReport aggregate(const std::string& name, std::span<const CheckReport> reports);

}  // namespace skelmax
