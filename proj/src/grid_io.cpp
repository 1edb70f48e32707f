// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include "skelmax/grid_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace skelmax {

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidInput("not a number: '" + std::string(s) + "'");
  return v;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view header_value(std::string_view header, std::string_view key) {
  const std::string needle = std::string(key) + "=";
  auto pos = header.find(needle);
  if (pos == std::string_view::npos) throw InvalidInput("grid CSV header lacks '" + std::string(key) + "'");
  auto rest = header.substr(pos + needle.size());
  return rest.substr(0, rest.find(' '));
}

}  // namespace

void write_grid_csv(std::ostream& os, const SampledField& f) {
  const GridSpec& g = f.spec();
  os << "# origin=";
  for (int j = 0; j < g.dim(); ++j) os << (j ? "," : "") << format_real(g.origin[j]);
  os << " h=" << format_real(g.h) << " dims=";
  for (int j = 0; j < g.dim(); ++j) os << (j ? "," : "") << g.dims[j];
  os << '\n';
  const Eigen::Index row = g.dims[0];
  for (Eigen::Index i = 0; i < g.size(); i += row) {
    for (Eigen::Index k = 0; k < row; ++k) os << (k ? "," : "") << format_real(f[i + k]);
    os << '\n';
  }
}

SampledField read_grid_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind('#', 0) != 0) throw InvalidInput("grid CSV must start with '#'");
  const auto origin_parts = split(header_value(header, "origin"), ',');
  const auto dim_parts = split(header_value(header, "dims"), ',');
  if (origin_parts.size() != dim_parts.size()) throw InvalidInput("grid CSV origin/dims length mismatch");
  const int n = static_cast<int>(dim_parts.size());
  if (n < 1 || n > kMaxDim) throw InvalidInput("grid CSV dimension must be 1..3");
  Point origin(n);
  IndexVec dims(n);
  for (int j = 0; j < n; ++j) {
    origin[j] = parse_real(origin_parts[j]);
    const double d = parse_real(dim_parts[j]);
    if (d < 1 || d != std::floor(d)) throw InvalidInput("grid CSV dims must be positive integers");
    dims[j] = static_cast<Eigen::Index>(d);
  }
  GridSpec spec(origin, parse_real(header_value(header, "h")), dims);

  SampledField::Values values(spec.size());
  Eigen::Index next = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (auto cell : split(line, ',')) {
      if (next >= spec.size()) throw InvalidInput("grid CSV has more values than dims allow");
      values[next++] = parse_real(cell);
    }
  }
  if (next != spec.size()) throw InvalidInput("grid CSV has fewer values than dims require");
  return SampledField(spec, std::move(values));
}

void save_grid_csv(const std::string& path, const SampledField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path);
  write_grid_csv(os, f);
  if (!os) throw InvalidInput("write failed: " + path);
}

SampledField load_grid_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot read " + path);
  return read_grid_csv(is);
}

namespace {

Point json_point(const nlohmann::json& v, int dim, double fill) {
  Point p = Point::Constant(dim, fill);
  if (v.is_null()) return p;
  if (v.is_number()) return Point::Constant(dim, v.get<double>());
  if (!v.is_array() || static_cast<int>(v.size()) != dim) throw InvalidInput("sampler: point has wrong length");
  for (int j = 0; j < dim; ++j) p[j] = v[j].get<double>();
  return p;
}

}  // namespace

Sampler make_sampler(const nlohmann::json& descriptor, int dim) {
  if (!descriptor.is_object() || !descriptor.contains("kind")) throw InvalidInput("sampler descriptor needs 'kind'");
  const std::string kind = descriptor.at("kind").get<std::string>();
  const nlohmann::json params = descriptor.value("params", nlohmann::json::object());
  try {
    if (kind == "constant") {
      const double c = params.value("value", 1.0);
      return [c](const Point&) { return c; };
    }
    if (kind == "linear") {
      const Point a = json_point(params.value("coeffs", nlohmann::json()), dim, 0.0);
      const double b = params.value("offset", 0.0);
      return [a, b](const Point& x) { return a.dot(x) + b; };
    }
    if (kind == "power") {
      const double alpha = params.value("alpha", 1.0);
      const Point c = json_point(params.value("center", nlohmann::json()), dim, 0.0);
      return [alpha, c](const Point& x) { return std::pow((x - c).norm(), alpha); };
    }
    if (kind == "box") {
      const Box b(json_point(params.at("lower"), dim, 0.0), json_point(params.at("upper"), dim, 0.0));
      const double in = params.value("inside", 1.0), out = params.value("outside", 0.0);
      return [b, in, out](const Point& x) {
        return ((b.lower.array() <= x.array()).all() && (x.array() < b.upper.array()).all()) ? in : out;
      };
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("sampler params: ") + e.what());
  }
  throw InvalidInput("unknown sampler kind '" + kind + "'");
}

}  // namespace skelmax
