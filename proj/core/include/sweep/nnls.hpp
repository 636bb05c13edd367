#pragma once

#include "sweep/types.hpp"

namespace sweep {

struct NnlsResult {
  Vec x;            // x >= 0
  double residual;  // ||A x - b||
  int iterations = 0;
  bool converged = false;
};

// Nonnegative least squares min ||A x - b||, x >= 0 (active-set method).
// Inner least-squares solves use a minimum-norm decomposition so degenerate
// problems get the minimum-norm solution on the passive set.
NnlsResult nnls(const Mat& A, const Vec& b, int max_iter = 200, double tol = 1e-12);

// Mixed-sign bounded least squares used by the dual reconstruction:
// min || F y + S s - r ||  with y free and s >= 0 componentwise.
// y is eliminated through a minimum-norm solve; s by NNLS on the projected
// problem.
struct SemiNnlsResult {
  Vec y;  // free block
  Vec s;  // constrained block, s >= 0
  double residual;
  bool converged = false;
};
SemiNnlsResult semi_nnls(const Mat& F, const Mat& S, const Vec& r);

}  // namespace sweep
