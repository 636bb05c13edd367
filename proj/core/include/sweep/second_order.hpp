#pragma once

#include <vector>

#include "sweep/dynamics.hpp"
#include "sweep/geometry.hpp"
#include "sweep/types.hpp"

namespace sweep {

// Query for the coderivative of the normal-cone map of the negative orthant
// at a graph point (x, v): x <= 0, v >= 0, x_i v_i = 0.
struct OrthantCoderivativeQuery {
  Vec x, v, y;
  void validate() const;
};

enum class GammaTag { Zero, NonNegative, Free };

struct IndexPartition {
  std::vector<int> i1;    // gamma = 0
  std::vector<int> i2;    // gamma >= 0
  std::vector<int> free;  // gamma unconstrained
};

struct CoderivativeValue {
  bool empty = false;
  std::vector<GammaTag> gamma_tags;  // length m when not empty
  IndexPartition partition;
};

// Case analysis for D*N over the negative orthant: empty when some v_i y_i != 0;
// otherwise the set of gamma with gamma_i = 0 on I1(y), gamma_i >= 0 on I2(y).
CoderivativeValue coderivative_orthant(const OrthantCoderivativeQuery& q);

// Parameterized description of a coderivative value as base + generators*gamma
// with per-coordinate sign tags on gamma.
struct TaggedAffineSet {
  Vec base;        // value at gamma = 0
  Mat generators;  // columns multiply gamma
  std::vector<GammaTag> tags;
  // Distance from w to the tagged set (gamma restricted by tags).
  double distance(const Vec& w) const;
  // A member of the set (gamma chosen min-norm subject to tags to approach w).
  Vec nearest(const Vec& w) const;
};

struct NormalConeCoderivative {
  bool empty = false;           // direction outside the coderivative domain
  bool domain_violation = false;
  bool upper_estimate = false;  // MFCQ-only mode: union over vertex multipliers
  std::vector<TaggedAffineSet> pieces;  // one per admissible multiplier vector
  std::vector<Vec> lambdas;             // the multiplier vector(s) used
};

// Coderivative of the normal-cone map of C = {g >= 0} at (x, v in N_C(x)) in
// direction u_dir. Exact under LICQ; union of vertex pieces under MFCQ only.
NormalConeCoderivative coderivative_normal_cone(const SweepingSet& set, const Vec& x, const Vec& v,
                                                const Vec& u_dir);

// Coderivative of the sweeping velocity map F(x,u,a) = N_C(x-u) + f(x,a) at a
// graph point (x,u,a,w), evaluated in direction y. Triple-form value:
//   x-slot: grad_x f* y - (sum lam_i hess g_i) y - grad g* gamma
//   u-slot: (sum lam_i hess g_i) y + grad g* gamma
//   a-slot: grad_a f* y
struct VelocityMapCoderivative {
  bool not_in_cone = false;      // w is not a value of F at (x,u,a)
  bool domain_violation = false; // y violates lam_i <grad g_i, y> = 0
  Vec lambda;                    // multipliers certifying w
  Vec base_x, base_u, base_a;
  Mat gen_x, gen_u;              // generator columns for gamma (gen_a = 0)
  std::vector<GammaTag> tags;
};

VelocityMapCoderivative coderivative_F(const ProcessSpec& spec, const Vec& x, const Vec& u,
                                       const Vec& a, const Vec& w, const Vec& y);

// Positive linear independence of the active gradients (the constraint
// qualification used throughout): no nonzero nonnegative combination of the
// active gradients vanishes.
bool mfcq_holds(const SweepingSet& set, const Vec& x, double tol = 1e-9);

// Full row rank of the active-gradient Jacobian.
bool licq_holds(const SweepingSet& set, const Vec& x, double tol = 1e-9);

}  // namespace sweep
