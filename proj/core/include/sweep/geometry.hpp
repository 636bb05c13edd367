#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "sweep/types.hpp"

namespace sweep {

// A static sweeping set C = { y in R^n : g_i(y) >= 0, i = 1..m } described by
// smooth inequality functions together with the constants that certify its
// uniform prox-regularity (gradient norm bounds, Hessian bound, positive
// linear independence factor beta, perturbed-activity width rho).
struct SweepingSet {
  int n = 0;  // ambient dimension
  int m = 0;  // number of inequality functions

  std::function<Vec(const Vec&)> g;                  // y -> (g_1(y),...,g_m(y))
  std::function<Mat(const Vec&)> grad_g;             // y -> m x n rows grad g_i
  std::function<std::vector<Mat>(const Vec&)> hess_g;  // y -> m Hessians n x n

  double m1 = 1.0;    // lower bound on ||grad g_i||
  double m2 = 1.0;    // upper bound on ||grad g_i||
  double m3 = 0.0;    // upper bound on ||hess g_i|| (spectral); 0 for affine
  double beta = 1.0;  // positive-linear-independence factor, >= 1
  double rho = 1.0;   // activity width for the perturbed index set

  double tol_act = 1e-8;  // absolute activity tolerance on g_i

  // Optional override of the prox-regularity modulus; < 0 means "use m1/(m3*beta)".
  double prox_modulus_override = -1.0;

  void validate() const;
};

struct ActiveIndexSet {
  std::vector<int> indices;  // sorted, 0-based
  double threshold = 0.0;    // 0 for exact activity, rho for perturbed
  bool contains(int i) const;
};

struct NormalConeElement {
  Vec multipliers;   // lambda >= 0, length m
  Vec vector_value;  // -sum_i lambda_i grad g_i(y)
};

struct ProjectionResult {
  Vec point;        // nearest feasible point found
  Vec multipliers;  // KKT multipliers, z - y* = -sum lambda_i grad g_i(y*)
  int iterations = 0;
  bool converged = false;
  // False when dist(z;C) >= prox modulus: the projection may be non-unique and
  // only a local solution is returned.
  bool inside_prox_radius = true;
};

struct ProjectionFailure : NumericalFailure {
  ProjectionFailure(const std::string& what, ProjectionResult best_iterate)
      : NumericalFailure(what), best(std::move(best_iterate)) {}
  ProjectionResult best;
};

struct AssumptionReport {
  double min_grad_norm = 0.0;
  double max_grad_norm = 0.0;
  double max_hess_norm = 0.0;
  double beta_estimate = 1.0;
  bool m1_ok = true, m2_ok = true, m3_ok = true, beta_ok = true;
  int samples = 0;
  bool all_ok() const { return m1_ok && m2_ok && m3_ok && beta_ok; }
};

// Axis-aligned sampling region for assumption checks.
struct SampleBox {
  Vec lo, hi;
};

// y in C up to tol: g_i(y) >= -tol for all i.
bool membership(const SweepingSet& set, const Vec& y, double tol);

// Exact (threshold = 0, with tol_act slack) or perturbed (threshold = rho)
// active index set at a feasible point.
ActiveIndexSet active_set(const SweepingSet& set, const Vec& y, double threshold);

// Euclidean projection onto C by an active-set Newton method on the KKT
// system of min ||z - y||^2 s.t. g(y) >= 0, warm-started at z.
ProjectionResult project(const SweepingSet& set, const Vec& z, int max_iter = 60);

// Normal-cone element -sum lambda_i grad g_i(y) for multipliers supported on
// the exact active set.
NormalConeElement normal_cone_element(const SweepingSet& set, const Vec& y, const Vec& lambdas);

// Empirical verification of the declared constants over a sample box.
AssumptionReport check_assumptions(const SweepingSet& set, const SampleBox& box, int samples,
                                   unsigned seed = 20240901u);

// Prox-regularity modulus m1/(m3*beta); +infinity for affine constraints.
double prox_modulus(const SweepingSet& set);

// Default validation region: ball of radius 2*(||x0|| + 1) around x0,
// returned as its bounding box.
SampleBox default_validation_box(const Vec& x0);

// ---- constructors for the named smooth constraint forms ----

// Single affine constraint g(y) = a.y + b appended to a set under construction.
struct ConstraintForm {
  enum class Kind { Affine, PairDisk, BallComplement, Ball } kind;
  Vec a;           // Affine
  double b = 0.0;  // Affine
  double radius = 0.0;  // PairDisk: g = ||y1 - y2|| - 2R; Ball(s): radius R
  Vec center;      // Ball / BallComplement
};

// Assembles a SweepingSet from constraint forms; constants m1..rho must be
// supplied by the caller (they are analytic properties of the forms).
SweepingSet make_set(int n, const std::vector<ConstraintForm>& forms, double m1, double m2,
                     double m3, double beta, double rho);

}  // namespace sweep
