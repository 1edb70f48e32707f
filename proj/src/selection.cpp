// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include "skelmax/selection.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <ostream>
#include <random>

namespace skelmax {

namespace {

std::vector<PlaneKey> planes_of(const Skeleton& s, Delta lattice) {
  std::vector<PlaneKey> keys;
  for (const auto& f : faces(s, lattice.value())) keys.push_back(face_plane(f, lattice));
  return keys;
}

void check_family(std::span<const Skeleton> skeletons) {
  for (const auto& s : skeletons)
    if (s.n() != skeletons.front().n() || s.k != skeletons.front().k)
      throw InvalidInput("selection: skeletons must share n and k");
}

}  // namespace

FaceSelection select_faces(std::span<const Skeleton> skeletons, Delta lattice, SelectionStrategy strategy,
                           std::uint64_t seed) {
  check_family(skeletons);
  FaceSelection sel;
  if (!skeletons.empty()) {
    sel.n = skeletons.front().n();
    sel.k = skeletons.front().k;
  }
  std::mt19937_64 rng(seed);
  for (const auto& s : skeletons) {
    const auto keys = planes_of(s, lattice);
    int pick = 0;
    if (strategy == SelectionStrategy::greedy) {
      int best = -1;
      for (int j = 0; j < static_cast<int>(keys.size()); ++j) {
        auto it = sel.loads.find(keys[static_cast<std::size_t>(j)]);
        const int load = it == sel.loads.end() ? 0 : it->second;
        if (best < 0 || load < best) {
          best = load;
          pick = j;
        }
      }
    } else {
      pick = std::uniform_int_distribution<int>(0, static_cast<int>(keys.size()) - 1)(rng);
    }
    const PlaneKey& key = keys[static_cast<std::size_t>(pick)];
    sel.choice.push_back(pick);
    sel.planes.push_back(key);
    sel.orientation.push_back(face_shape(s.n(), s.k, pick).long_axes);
    ++sel.loads[key];
  }
  return sel;
}

FaceSelection fixed_selection(std::span<const Skeleton> skeletons, Delta lattice, std::vector<int> choice) {
  check_family(skeletons);
  if (choice.size() != skeletons.size()) throw InvalidInput("selection: one face per skeleton required");
  FaceSelection sel;
  if (!skeletons.empty()) {
    sel.n = skeletons.front().n();
    sel.k = skeletons.front().k;
  }
  for (std::size_t i = 0; i < skeletons.size(); ++i) {
    const FattenedFace f = face(skeletons[i], lattice.value(), choice[i]);
    const PlaneKey key = face_plane(f, lattice);
    sel.planes.push_back(key);
    sel.orientation.push_back(f.long_axes);
    ++sel.loads[key];
  }
  sel.choice = std::move(choice);
  return sel;
}

std::map<PlaneKey, int> plane_loads(const FaceSelection& sel) {
  std::map<PlaneKey, int> loads;
  for (const auto& key : sel.planes) ++loads[key];
  return loads;
}

int max_load(const FaceSelection& sel) {
  int m = 0;
  for (const auto& [key, count] : sel.loads) m = std::max(m, count);
  return m;
}

double lemma_exponent(int n, int k) {
  return 1.0 - static_cast<double>((n - k) * (2 * n - 1)) / static_cast<double>(2 * n * n);
}

LoadReport verify_selection_bound(const FaceSelection& sel, std::size_t u, int n, int k, double C) {
  if (u < 1) throw InvalidInput("selection bound needs u >= 1");
  if (!(C > 0)) throw InvalidInput("selection bound needs C > 0");
  LoadReport rep;
  rep.u = u;
  rep.max_load = max_load(sel);
  rep.exponent = lemma_exponent(n, k);
  rep.threshold = C * std::pow(static_cast<double>(u), rep.exponent);
  rep.pass = rep.max_load <= rep.threshold;
  return rep;
}

std::vector<std::vector<int>> orientation_classes(const FaceSelection& sel) {
  std::vector<unsigned> masks;
  for (unsigned m = 0; m < (1u << sel.n); ++m)
    if (std::popcount(m) == sel.k) masks.push_back(m);
  std::vector<std::vector<int>> classes(masks.size());
  for (std::size_t i = 0; i < sel.orientation.size(); ++i) {
    auto it = std::find(masks.begin(), masks.end(), sel.orientation[i]);
    classes[static_cast<std::size_t>(it - masks.begin())].push_back(static_cast<int>(i));
  }
  return classes;
}

OrientationPartition orientation_partition(const FaceSelection& sel) {
  if (sel.n != 2 || sel.k != 1) throw InvalidInput("orientation_partition needs n = 2, k = 1");
  auto classes = orientation_classes(sel);
  // mask 0b01 runs along x (horizontal), 0b10 along y (vertical)
  return {std::move(classes[1]), std::move(classes[0])};
}

std::vector<Skeleton> random_lattice_family(const IndexVec& z, Delta delta, std::size_t u, std::uint64_t seed,
                                            int k) {
  const CellLattice lattice(z, delta);
  if (u > static_cast<std::size_t>(lattice.size()))
    throw InvalidInput("random_lattice_family: more skeletons than lattice centers");
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(lattice.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto radii = enumerate_radii(delta);
  std::uniform_int_distribution<std::size_t> pick_r(0, radii.size() - 1);
  std::vector<Skeleton> out;
  out.reserve(u);
  for (std::size_t i = 0; i < u; ++i) out.emplace_back(lattice.center(idx[i]), radii[pick_r(rng)], k);
  return out;
}

void write_loads_csv(std::ostream& os, const std::map<PlaneKey, int>& loads) {
  os << "plane_key,count\n";
  for (const auto& [key, count] : loads) os << key.str() << ',' << count << '\n';
}

}  // namespace skelmax
