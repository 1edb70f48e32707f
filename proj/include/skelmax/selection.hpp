// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "skelmax/geometry.hpp"

namespace skelmax {

enum class SelectionStrategy { greedy, random };

/// One chosen face per skeleton and the resulting per-plane loads.
struct FaceSelection {
  std::vector<int> choice;
  std::vector<PlaneKey> planes;       // plane of each chosen face
  std::vector<unsigned> orientation;  // long-axis mask of each chosen face
  std::map<PlaneKey, int> loads;
  int n = 2;
  int k = 1;

  std::size_t size() const { return choice.size(); }
};

/// Greedy: skeletons in index order, each takes the face whose plane currently
/// carries the least load (ties to the smaller face index). Random: uniform
/// face per skeleton from a seeded generator.
FaceSelection select_faces(std::span<const Skeleton> skeletons, Delta lattice,
                           SelectionStrategy strategy = SelectionStrategy::greedy, std::uint64_t seed = 0);

/// Selection with an explicit face per skeleton.
FaceSelection fixed_selection(std::span<const Skeleton> skeletons, Delta lattice, std::vector<int> choice);

/// Histogram of chosen faces per plane, recomputed from the planes.
std::map<PlaneKey, int> plane_loads(const FaceSelection& sel);

int max_load(const FaceSelection& sel);

/// 1 - (n-k)(2n-1)/(2n^2); 5/8 for n=2, k=1.
double lemma_exponent(int n, int k);

struct LoadReport {
  std::size_t u = 0;
  int max_load = 0;
  double exponent = 0;
  double threshold = 0;
  bool pass = false;
};

LoadReport verify_selection_bound(const FaceSelection& sel, std::size_t u, int n, int k, double C = 4.0);

/// Indices grouped by the orientation of the chosen face, one group per
/// long-axis mask in face enumeration order.
std::vector<std::vector<int>> orientation_classes(const FaceSelection& sel);

struct OrientationPartition {
  std::vector<int> vertical;    // chosen face parallel to the y axis
  std::vector<int> horizontal;  // chosen face parallel to the x axis
};
OrientationPartition orientation_partition(const FaceSelection& sel);

/// u skeletons with distinct centers drawn from the delta-lattice of Q_z
/// and radii drawn from enumerate_radii(delta).
std::vector<Skeleton> random_lattice_family(const IndexVec& z, Delta delta, std::size_t u, std::uint64_t seed,
                                            int k = 1);

/// Load CSV `plane_key,count` in key order.
void write_loads_csv(std::ostream& os, const std::map<PlaneKey, int>& loads);

}  // namespace skelmax
