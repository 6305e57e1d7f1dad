#pragma once

#include <optional>
#include <variant>

#include "generator.hpp"

namespace bregalt {

// Parametric surface patch g: U -> R^d over a closed parameter box, with an
// analytic Jacobian. Maps are created through the registry (name + numeric
// parameters) so set specs stay serializable; no code travels in configs.
struct ParametricMap {
  std::string name;
  nlohmann::json params;
  int param_dim = 0;
  int ambient_dim = 0;
  Vector lo, hi;  // parameter box
  std::function<Vector(const Vector&)> map;
  std::function<Matrix(const Vector&)> jacobian;
};

ParametricMap make_parametric_map(const std::string& name, const nlohmann::json& params);
std::vector<std::string> parametric_map_names();

// x = point + basis * w, w free. basis columns must be independent.
struct AffineSet {
  Vector point;
  Matrix basis;
};

// Intersection of halfspaces <normals.row(i), x> <= offsets[i].
struct PolyhedronSet {
  Matrix normals;
  Vector offsets;
};

struct FiniteSet {
  std::vector<Vector> points;
};

struct ParametricSet {
  ParametricMap map;
  // Total evaluation budget for the global grid scan (spread across
  // parameter dimensions). Local projections ignore it.
  int grid = 1024;
};

// {x >= 0 : sum of x over group j = target[j]} for a surjective index map
// group: outcomes -> observations. With probability targets this is the
// conditional-mixture slice of the simplex; unnormalized positive targets
// give the count-data variant used by the tomography instance.
struct DataSetKL {
  std::vector<int> group;
  Vector target;
  bool probability = true;
};

// {x in G : grad f(x)[index[i]] = value[i]}: a set that is affine in dual
// coordinates, the carrier for moment-matching constraints.
struct DualAffineSet {
  std::vector<int> index;
  Vector value;
};

struct SetSpec {
  std::variant<AffineSet, PolyhedronSet, FiniteSet, ParametricSet, DataSetKL, DualAffineSet> body;
  double membership_tol = 1e-9;
  bool declared_convex = false;
  std::string label;

  int ambient_dim() const;
  // Membership within tol. Parametric membership is grid-approximate.
  // DualAffine needs the generator to evaluate dual coordinates.
  bool contains(const Vector& x, const Generator* g = nullptr) const;
};

SetSpec make_affine(Vector point, Matrix basis, std::string label = {});
SetSpec make_polyhedron(Matrix normals, Vector offsets, std::string label = {});
SetSpec make_finite(std::vector<Vector> points, std::string label = {});
SetSpec make_parametric(ParametricMap map, int grid = 1024, std::string label = {});
SetSpec make_data_set_kl(std::vector<int> group, Vector target, bool probability = true,
                         std::string label = {});
SetSpec make_dual_affine(std::vector<int> index, Vector value, std::string label = {});

enum class ProjectionMode { global_closed_form, global_enumeration, local_solver };

struct SolverReport {
  int iterations = 0;
  double grad_norm = 0;  // projected-gradient norm at exit
  double initial_value = 0;
  double final_value = 0;
  bool boundary_touched = false;
  int starts = 1;
};

struct ProjectionResult {
  Vector point;
  double value = 0;  // divergence at the optimum
  ProjectionMode mode = ProjectionMode::global_closed_form;
  SolverReport report;
  Vector param;    // parameter coordinates when the set is parametric
  int index = -1;  // chosen point for finite sets (lowest-index tie-break)
};

// Inner solver: projected gradient on the parameter box with Armijo
// backtracking. Stops at projected-gradient norm <= tol or max_iterations
// (the latter raises SolverFailure). multistart > 0 adds that many seeded
// random restarts in global mode; the spec default when enabled is 8.
struct SolverOptions {
  int max_iterations = 10000;
  double tol = 1e-10;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int multistart = 0;
  unsigned long long seed = 0;
  par::Exec exec = par::Exec::openmp;
};

// argmin over b' in B of D(b', a). The objective is convex in the first
// argument, so the affine / polyhedron / pinned-dual / group-scaling paths
// return certified global optima. Parametric sets run a grid scan plus
// descent without a warm start, or pure descent from `warm` (parameter
// coordinates) with a guaranteed objective decrease.
ProjectionResult left_project(const Generator& g, const SetSpec& B, const Vector& a,
                              const std::optional<Vector>& warm = std::nullopt,
                              const SolverOptions& opt = {});

// argmin over a' in A of D(b, a'). Non-convex in general. Dual-affine sets
// go through the conjugate generator (exact); parametric sets use the same
// warm-started descent as left_project; affine and polyhedron sets are
// supported under the euclidean generator where both projections coincide.
ProjectionResult right_project(const Generator& g, const SetSpec& A, const Vector& b,
                               const std::optional<Vector>& warm = std::nullopt,
                               const SolverOptions& opt = {});

// Explicitly local variant for parametric A: descends from `warm` and
// certifies D(b, result) <= D(b, map(warm)).
ProjectionResult local_right_project(const Generator& g, const SetSpec& A, const Vector& b,
                                     const Vector& warm, const SolverOptions& opt = {});

}  // namespace bregalt
