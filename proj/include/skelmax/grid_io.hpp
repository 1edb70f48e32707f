// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "skelmax/grid.hpp"

namespace skelmax {

/// Shortest decimal string that parses back to the same double.
std::string format_real(double v);
double parse_real(std::string_view s);

/// Grid CSV: a header line `# origin=<x0,y0> h=<h> dims=<n1,n2>` followed by
/// one line per row of dims[0] values (axis 0 fastest, remaining axes in
/// row-major order).
void write_grid_csv(std::ostream& os, const SampledField& f);
SampledField read_grid_csv(std::istream& is);
void save_grid_csv(const std::string& path, const SampledField& f);
SampledField load_grid_csv(const std::string& path);

using Sampler = std::function<double(const Point&)>;

/// Analytic sampler from a descriptor {"kind": ..., "params": {...}}.
/// Kinds: constant{value}, linear{coeffs, offset}, power{alpha, center},
/// box{lower, upper, inside, outside}.
Sampler make_sampler(const nlohmann::json& descriptor, int dim);

}  // namespace skelmax
