#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sweep/dynamics.hpp"
#include "sweep/types.hpp"

namespace sweep {

struct CostGrad {
  Vec x, u, a;        // partials in the point arguments
  Vec xd, ud, ad;     // partials in the velocity arguments
};

struct CostSpec {
  std::function<double(const Vec&)> phi;  // terminal cost
  // Running cost ell(t, x, u, a, xdot, udot, adot).
  std::function<double(double, const Vec&, const Vec&, const Vec&, const Vec&, const Vec&,
                       const Vec&)>
      ell;
  // Optional analytic gradients; finite differences are used when absent.
  std::function<Vec(const Vec&)> grad_phi;
  std::function<CostGrad(double, const Vec&, const Vec&, const Vec&, const Vec&, const Vec&,
                         const Vec&)>
      grad_ell;

  Vec phi_gradient(const Vec& x) const;
  CostGrad ell_gradient(double t, const Vec& x, const Vec& u, const Vec& a, const Vec& xd,
                        const Vec& ud, const Vec& ad) const;
};

// Discrete control problem on a uniform grid: the plain discrete Bolza mode
// when no reference is present, or the full localized problem with proximal
// velocity terms, per-node localization, a velocity-tracking budget and
// variation bounds on the first difference of u when a reference is given.
struct DiscreteProblem {
  ProcessSpec spec;
  CostSpec cost;
  int k = 0;
  double h = 0.0;

  std::optional<ReferencePath> reference;
  bool plain_mode = true;

  double epsilon_k = 0.0;    // relaxation of the control-norm bounds
  double mu_tilde = 1.0;     // variation budget for du
  double epsilon_loc = 0.5;  // localization radius around the reference
};

enum class SolveStatus { Converged, MaxIter, Infeasible };

struct SolveResult {
  DiscreteTrajectory trajectory;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  double max_constraint_violation = 0.0;
  SolveStatus status = SolveStatus::MaxIter;
};

struct SolverOptions {
  int max_outer = 10;
  int max_inner = 250;
  double penalty_initial = 10.0;
  double penalty_growth = 8.0;
  double tol_kkt = 1e-7;
  double tol_constraint = 1e-8;
  double fd_step = 1e-6;  // relative forward-difference step
  int lbfgs_memory = 12;
};

// Builds the discrete problem. mu is the asserted variation constant of the
// reference; the budget becomes max(3 mu (1+4KT) e^K, 4 mu (e^K + 1)).
DiscreteProblem build_pk(const ProcessSpec& spec, const CostSpec& cost, int k,
                         const std::optional<ReferencePath>& reference = std::nullopt,
                         double epsilon_loc = 0.5, double mu = 0.1, double epsilon_k = 0.0);

// Full discrete objective: terminal + running Riemann sum, plus (reference
// mode) proximal velocity integrals and the squared-distance variation
// penalties.
double evaluate_cost(const DiscreteProblem& problem, const DiscreteTrajectory& traj);

// Averaged velocity deviations theta_j = 2 int (dz/h - refdot) over each
// interval (zero in plain mode); used by the dual reconstruction.
struct AveragedDeviations {
  std::vector<Vec> x, u, a;  // k entries each
};
AveragedDeviations averaged_deviations(const DiscreteProblem& problem,
                                       const DiscreteTrajectory& traj);

// Single-shooting solve over the control sequences with an augmented
// Lagrangian handling the norm-annulus (and reference-mode) constraints.
SolveResult solve(const DiscreteProblem& problem, const std::vector<Vec>& u_init,
                  const std::vector<Vec>& a_init, const SolverOptions& options = {});

struct ConvergenceRow {
  int k = 0;
  double w12_to_reference = 0.0;
  double objective = 0.0;
  double objective_gap = 0.0;
  bool solved = false;
};

// Solves the problem at each grid size and reports distance to the reference
// solution plus the objective gap. Rows may run in parallel (SWEEP_THREADS).
std::vector<ConvergenceRow> convergence_study(const ProcessSpec& spec, const CostSpec& cost,
                                              const std::vector<int>& k_list,
                                              const ReferencePath& reference,
                                              double reference_objective,
                                              const std::vector<Vec>& u_init_nodes,
                                              const std::vector<Vec>& a_init_nodes,
                                              const SolverOptions& options = {});

std::string convergence_csv(const std::vector<ConvergenceRow>& rows);

}  // namespace sweep
