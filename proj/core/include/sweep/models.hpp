#pragma once

#include <functional>
#include <string>

#include "sweep/optimality.hpp"
#include "sweep/transcription.hpp"

namespace sweep {

// Closed-form solution shipped with a builtin model: continuously evaluable
// paths, the normal-cone multiplier path, and the optimal cost.
struct AnalyticSolution {
  ReferencePath path;
  std::function<Vec(double)> eta;  // length-m multiplier path
  double objective = 0.0;
  // Distinguished constant control values (per-model reporting aids).
  Vec a_const;
  Vec u_const;

  // Samples the solution on a uniform grid as a discrete trajectory whose
  // per-step multipliers certify the discrete dynamics.
  DiscreteTrajectory sample(const ProcessSpec& spec, int k) const;
};

struct Model {
  std::string name;
  ProcessSpec spec;
  CostSpec cost;
  bool has_analytic = false;
  AnalyticSolution analytic;
  Vec default_u_init;  // constant-in-time defaults for solve inits
  Vec default_a_init;
  bool solve_with_reference = false;  // run the localized problem around the analytic path
};

enum class CarVariant { Standard, HeavyEnergy };
enum class CrowdCase { Free, Contact };

// One-dimensional stopping model: drift f = 9a toward a boundary at the
// origin, terminal cost x^2/2, running cost (w/2) a^2 with w = 1 or 100.
Model builtin_car(CarVariant variant);

// Planar two-disk model with a nonoverlap constraint, frozen desired
// direction at 135 degrees, speeds 6 and 3, horizon 6.
Model builtin_crowd(CrowdCase which);

}  // namespace sweep
