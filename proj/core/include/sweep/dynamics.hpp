#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sweep/geometry.hpp"
#include "sweep/types.hpp"

namespace sweep {

// Controlled perturbed sweeping process
//   -xdot(t) in N(x(t) - u(t); C) + f(x(t), a(t)),  x(0) = x0,
//   r1 <= ||u(t)|| <= r2,
// over a fixed horizon, with the moving set C + u(t).
struct ProcessSpec {
  SweepingSet set;
  int n = 0;  // state/control-u dimension
  int d = 0;  // perturbation-control dimension

  std::function<Vec(const Vec&, const Vec&)> f;         // (x, a) -> R^n
  std::function<Mat(const Vec&, const Vec&)> grad_f_x;  // n x n Jacobian
  std::function<Mat(const Vec&, const Vec&)> grad_f_a;  // n x d Jacobian

  double horizon = 1.0;
  Vec x0;
  double r1 = 1e-3, r2 = 1.0;
  double lipschitz_k = 0.0;  // Lipschitz constant of f in x
  double growth_m = 1.0;     // growth constant: ||f|| <= M (1 + ||x||)

  double tol_dyn_rel = 1e-6;  // relative residual for inclusion certification

  void validate() const;
};

struct DiscreteTrajectory {
  double horizon = 1.0;
  int k = 0;  // number of steps; k+1 grid nodes
  std::vector<Vec> x;    // k+1 states
  std::vector<Vec> u;    // k+1 set-controls
  std::vector<Vec> a;    // k+1 perturbation controls
  std::vector<Vec> eta;  // k per-step normal-cone multipliers (>= 0)

  double state_bound = 0.0;  // a-priori bound certified at integration time

  double h() const { return horizon / k; }
  double t(int j) const { return h() * j; }

  // Piecewise-linear evaluation of the triple at an arbitrary time.
  Vec eval_x(double t) const;
  Vec eval_u(double t) const;
  Vec eval_a(double t) const;
};

// A continuously evaluable reference path (analytic solutions, interpolants).
struct ReferencePath {
  std::function<Vec(double)> x, u, a;
  std::function<Vec(double)> xdot, udot, adot;
};

// One catching-up step: next state is the translate-projection of the drift
// step; per-step multipliers eta are the projection multipliers divided by h.
std::pair<Vec, Vec> step_catching_up(const ProcessSpec& spec, const Vec& x_j, const Vec& u_next,
                                     const Vec& a_j, double h);

// Literal discrete-inclusion step with supplied multipliers:
//   x_next = x_j - h (-sum eta_i grad g_i(x_j - u_j) + f(x_j, a_j)).
Vec step_explicit(const ProcessSpec& spec, const Vec& x_j, const Vec& u_j, const Vec& a_j,
                  const Vec& eta_j, double h);

// Forward integration by the catching-up scheme over a uniform grid.
DiscreteTrajectory integrate(const ProcessSpec& spec, const std::vector<Vec>& u_path,
                             const std::vector<Vec>& a_path, int k);

// Recovers nonnegative multipliers certifying xdot + f(x,a) = sum eta_i grad g_i(x-u)
// by nonnegative least squares restricted to the rho-active indices.
Vec recover_eta(const ProcessSpec& spec, const Vec& x, const Vec& u, const Vec& xdot,
                const Vec& a);

// Sup-norm of the difference plus the L2 norm of the derivative difference
// between a trajectory and a second trajectory or reference path.
double w12_distance(const DiscreteTrajectory& ta, const DiscreteTrajectory& tb);
double w12_distance(const DiscreteTrajectory& ta, const ReferencePath& ref);

// Trajectory CSV: header "t,x0..,u0..,a0..,eta0..", one row per node,
// 12 significant digits.
std::string trajectory_csv(const DiscreteTrajectory& traj);

namespace detail {
// Feasible discrete triple built from a reference solution by projecting the
// reference velocities onto the discrete velocity sets and carrying the state
// mismatch into the u-control. Used by grid-refinement tests.
DiscreteTrajectory feasible_approximation(const ProcessSpec& spec, const ReferencePath& ref,
                                          int k);
}  // namespace detail

}  // namespace sweep
