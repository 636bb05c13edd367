#pragma once

#include <functional>

#include "sweep/types.hpp"

namespace sweep {

struct LbfgsOptions {
  int max_iter = 400;
  int memory = 12;
  double grad_tol = 1e-8;      // scaled by 1 + |f|
  double step_tol = 1e-14;
  int max_linesearch = 40;
};

struct LbfgsResult {
  Vec x;
  double fval = 0.0;
  Vec grad;
  int iterations = 0;
  bool converged = false;
  // Progress dried up (line-search failure or repeated negligible decrease)
  // before the gradient test was met.
  bool stalled = false;
};

// Limited-memory BFGS with Armijo backtracking. The objective returns the
// value; the gradient callback fills g (may be finite-differenced upstream).
LbfgsResult lbfgs_minimize(const std::function<double(const Vec&)>& fval,
                           const std::function<void(const Vec&, Vec&)>& grad, const Vec& x0,
                           const LbfgsOptions& opt);

}  // namespace sweep
