// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skelmax/geometry.hpp"
#include "skelmax/operators.hpp"
#include "skelmax/selection.hpp"
#include "skelmax/weights.hpp"

namespace skelmax {

/// Outcome of one inequality check. pass <=> lhs <= rhs * (1 + tol).
struct CheckReport {
  std::string name;
  std::string digest;
  double lhs = 0;
  double rhs = 0;
  double slack = 0;
  bool pass = false;
  double seconds = 0;
  double tol = 1e-9;
  bool vacuous = false;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  /// Fills slack and pass from lhs, rhs and tol.
  void settle();
};

/// FNV-1a 64-bit hash of the canonical dump, as 16 hex digits.
std::string params_digest(const nlohmann::ordered_json& params);

/// b_i = a_i^(p-1) / ||a||_p^(p-1), so that sum b^p' = 1 and sum a_i b_i = ||a||_p.
Eigen::ArrayXd duality_coefficients(const Eigen::ArrayXd& a, double p);

/// ||sum_i t_i 1_{faces_i}||_{L^p'(region, w^(1-p'))}.
double indicator_sum_norm(const Eigen::ArrayXd& t, std::span<const FattenedFace> faces, const SampledField& w,
                          double p, const Box& region);

/// Pointwise sum_i t_i 1_{boxes_i} on the cells of `grid`, built with a difference array.
SampledField indicator_sum(const Eigen::ArrayXd& t, std::span<const Box> boxes, const GridSpec& grid);

/// Duality bound for the linearized operator, checked on each orientation
/// class (vertical faces first, then horizontal; every class for n != 2).
/// f must be nonnegative on the frame grid.
CheckReport check_duality_prop(const SampledField& f, const SampledField& w, double p, const RhoAssignment& rho,
                               const FaceSelection& sel, const LocalFrame& frame, double tol = 1e-9);

/// One member of the test-function family.
struct FamilyMember {
  enum class Kind { constant, skeleton, box, random_field, dual_skeleton, dual_box };
  Kind kind = Kind::constant;
  std::string label;
  Box box;                 // box, random_field, dual_box
  Skeleton skeleton;       // skeleton, dual_skeleton
  std::uint64_t seed = 0;  // random_field
};

/// Fixed, versioned composition of test functions on the frame of Q_z:
/// the constant, fattened-skeleton indicators at 4 strided lattice centers
/// per axis times the first, middle and last radius, `boxes` random box
/// indicators, `fields` random fields (iid uniform on delta-cells inside a
/// random box) and, for p > 1, w^(-p'/p) truncated to three skeletons, to
/// the reachable box [z - 2 - delta, z + 3 + delta]^n and to Q_z.
struct FunctionFamily {
  std::string version = "v1";
  std::vector<FamilyMember> members;

  static FunctionFamily v1(const LocalFrame& frame, double p, std::uint64_t seed, int boxes = 50, int fields = 50);
};

/// f on the frame grid; the dual kinds need w and p.
SampledField materialize(const FamilyMember& m, const GridSpec& grid, const SampledField& w, double p, Delta delta);

enum class NormOperator { skeleton, hardy_littlewood };
enum class EvalMode { dense, centers };

struct OpNormResult {
  double ratio = 0;  // lower bound on the operator norm
  std::size_t best = 0;
  std::string best_label;
  std::vector<double> ratios;
};

/// max over the family of ||op f||_{L^p(Q_z, w)} / ||f||_{L^p(7Q_z, w)}, a
/// lower bound on the norm of op. The constant member is normalized over Q_z.
/// `hl_family` is the cube family of the Hardy-Littlewood operator.
OpNormResult empirical_opnorm(NormOperator op, const SampledField& w, double p, const LocalFrame& frame,
                              const FunctionFamily& family, EvalMode mode = EvalMode::dense,
                              const CubeFamily& hl_family = {});

/// Whether p = 1 or p' is an integer >= 2.
bool admissible_sufficient_p(double p);

/// Default constant of the local bound: 3 (2 * 49 * 4)^(1/p).
double default_sufficient_constant(double p);

struct SufficientResult {
  CheckReport report;
  double constant = 0;   // upper bracket of [w]_{A^S_p} (or [w]_{A^S_1})
  double fitted_c = 0;   // lhs / (delta^(-5/(4p)) [w]^(1/p))
};

/// lhs = empirical M_delta norm, rhs = C delta^(-5/(4p)) [w]^(1/p).
SufficientResult check_sufficient(const SampledField& w, double p, const LocalFrame& frame,
                                  const FunctionFamily& family, std::optional<double> C = {},
                                  EvalMode mode = EvalMode::dense, double tol = 1e-9);

/// Samples (x~, r) with x~ a lattice center of Q_z and r on the delta grid.
std::vector<SkeletonSample> random_skeleton_samples(const CellLattice& lattice, std::size_t count,
                                                    std::uint64_t seed);

/// Steps of the necessary-condition argument with f = w^(-p'/p) 1_{S_delta(x~, r)}:
/// containment of S_delta(x~, r) in S_{4 delta}(x, r) for x in Q_delta(x~), and
/// kappa^p w(Q) (min_j avg_{S^j} w^(-p'/p))^p <= C_emp int_S w^(-p'/p), where
/// C_emp = int_Q (M_{4 delta} f)^p w / int_S w^(-p'/p) and kappa is the smallest
/// snapped-measure ratio |S^j_delta(x~)| / |S^j_{4 delta}(x)|.
/// w must live on a grid covering every S_{4 delta}(x, r).
CheckReport check_necessary_chain(const SampledField& w, double p, Delta delta, std::span<const SkeletonSample> sample,
                                  double tol = 1e-9);

/// [w]_{nonlinear} over the lattice samples of Q_z against
/// (4^(2p) / delta^p) [w]_{A_p}, the cubic constant taken over every
/// lattice-aligned cube of a grid padded by 4 (so every C(x~, 2r) is included).
CheckReport check_ap_embedding(const SampledField& w, double p, Delta delta, const IndexVec& z, double tol = 1e-9);

struct BuckleyRow {
  std::string weight;
  double opnorm = 0;
  double ap = 0;
  double c_fit = 0;
};

/// C_fit = ||HL||_emp / [w]_{A_p}^(1/(p-1)) per weight; passes when
/// max C_fit <= 2 min C_fit.
CheckReport check_buckley(std::span<const WeightSpec> weights, double p, const LocalFrame& frame,
                          std::uint64_t seed, std::vector<BuckleyRow>* rows = nullptr);

struct ScalingRow {
  Delta delta;
  double norm = 0;
  double constant = 0;  // [w]_{A^S_p} upper bracket
  double fitted_c = 0;
  std::string best_label;
};

struct ScalingReport {
  double p = 0;
  std::string weight;
  std::vector<ScalingRow> rows;
  double slope = 0;
  double intercept = 0;
  std::vector<double> residuals;
  double max_residual = 0;
  double exponent = 0;  // (n - k) / (2 n p)
  bool weighted = false;
  double c_ratio = 0;   // max fitted C / min fitted C
  double margin = 0;    // (exponent + 0.05 - slope) unweighted, (2 - c_ratio) weighted
  bool pass = false;
  double seconds = 0;
};

/// Fits log(norm) = slope log(1/delta) + intercept. Unweighted runs pass when
/// slope <= exponent + 0.05; weighted runs when the fitted constant of the
/// sufficient bound varies by at most a factor 2.
ScalingReport scaling_experiment(double p, std::span<const Delta> deltas, const WeightSpec& weight,
                                 std::uint64_t seed, EvalMode mode = EvalMode::centers, int refine = 4);

/// Least-squares line through (x, y): returns (slope, intercept).
std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y);

/// Ledger CSV header and row: check,params_digest,lhs,rhs,slack,pass,seconds.
std::string ledger_header();
std::string ledger_row(const CheckReport& r, bool timing = true);
nlohmann::ordered_json to_json(const CheckReport& r, bool timing = true);
nlohmann::ordered_json to_json(const ScalingReport& r, bool timing = true);

}  // namespace skelmax
