#pragma once

#include <string>
#include <vector>

#include "sweep/transcription.hpp"
#include "sweep/types.hpp"

namespace sweep {

// Dual variables attached to a discrete trajectory. The node sequences qx/qu/qa
// are the discrete adjoints (the left-continuous representative of the
// bounded-variation adjoint in the continuous reading); the terminal triple
// p(T) differs from the final node by the terminal measure atoms: the vector
// atom gamma_atom in the state slot and the scalar atoms xi1/xi2 at index k.
// Entries xi1[j], xi2[j] for j < k are measure densities.
struct DualSystem {
  double lambda = 1.0;
  std::vector<Vec> qx, qu, qa;  // k+1 nodes each
  std::vector<Vec> eta;         // k+1 rows of length m; eta[k] is the terminal multiplier
  std::vector<Vec> gamma;       // k rows of length m (coderivative multipliers)
  std::vector<double> xi1, xi2; // k+1; densities for j < k, atoms at j = k
  Vec gamma_atom;               // R^n, state-slot measure atom at the horizon

  std::vector<Vec> wx, wu, wa;  // running-cost subgradients, k rows
  std::vector<Vec> vx, vu, va;  // velocity-slot subgradients, k rows
  std::vector<Vec> thx, thu, tha;  // averaged deviations, k rows

  // p(T) assembled from the final node and the terminal atoms.
  Vec p_terminal_x() const;
  Vec p_terminal_u(const Vec& u_terminal) const;
  Vec p_terminal_a() const;
};

struct ConditionEntry {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  bool overall = false;
  double nontriviality_value = 0.0;
  std::string to_text() const;
  std::string to_csv() const;
  double max_residual() const;
  const ConditionEntry* find(const std::string& name) const;
};

struct CheckOptions {
  double tol_scale = 1e-6;     // residual tolerance: tol_scale * (1 + magnitude)
  double tol_abs = 1e-9;       // absolute floor added to every tolerance
  double tol_nontrivial = 1e-10;
};

enum class NontrivialityMode { General, EnhancedInitial, EnhancedTerminal };

// Residual verification of the discrete first-order system on a trajectory:
// primal dynamics, the three adjoint difference equations, the velocity-slot
// couplings, terminal transversality with atoms, the complementarity families
// and the nontriviality sums.
ConditionReport check_discrete(const DiscreteTrajectory& traj, const DualSystem& duals,
                               const DiscreteProblem& problem, const CheckOptions& opt = {});

// Grid-residual verification of the continuous first-order system: primal
// representation, the adjoint differential equation for the absolutely
// continuous p, the velocity-gradient identities for q, the p-q measure
// relation, implications, transversality, measure nonatomicity and
// nontriviality.
ConditionReport check_continuous(const DiscreteTrajectory& traj, const DualSystem& duals,
                                 const ProcessSpec& spec, const CostSpec& cost,
                                 const CheckOptions& opt = {});

// Backward reconstruction of a dual system along a feasible trajectory for a
// given cost multiplier. Terminal block solved by sign-constrained least
// squares; gamma and the xi densities fitted per node from the u-equation;
// the state adjoint propagated backward. Throws when the backward system is
// inconsistent beyond tolerance.
DualSystem reconstruct_duals(const DiscreteTrajectory& traj, const DiscreteProblem& problem,
                             double lambda = 1.0, const CheckOptions& opt = {});

// Nontriviality sums; total variation of the xi measures is the density sum
// times h plus the terminal atoms.
double nontriviality(const DualSystem& duals, const DiscreteTrajectory& traj,
                     NontrivialityMode mode);

}  // namespace sweep
