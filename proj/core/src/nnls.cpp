#include "sweep/nnls.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace sweep {

NnlsResult nnls(const Mat& A, const Vec& b, int max_iter, double tol) {
  const int ncols = static_cast<int>(A.cols());
  NnlsResult res;
  res.x = Vec::Zero(ncols);

  std::vector<bool> passive(static_cast<size_t>(ncols), false);
  Vec x = Vec::Zero(ncols);
  Vec w = A.transpose() * (b - A * x);

  const double wtol = tol * (1.0 + b.norm()) * (1.0 + A.norm());
  int it = 0;
  while (it < max_iter) {
    // Most violated stationarity among the active (zero) variables.
    int cand = -1;
    double best = wtol;
    for (int j = 0; j < ncols; ++j)
      if (!passive[static_cast<size_t>(j)] && w[j] > best) { best = w[j]; cand = j; }
    if (cand < 0) break;
    passive[static_cast<size_t>(cand)] = true;

    while (true) {
      ++it;
      std::vector<int> P;
      for (int j = 0; j < ncols; ++j)
        if (passive[static_cast<size_t>(j)]) P.push_back(j);
      Mat Ap(A.rows(), static_cast<int>(P.size()));
      for (size_t t = 0; t < P.size(); ++t) Ap.col(static_cast<int>(t)) = A.col(P[t]);
      Vec zp = Ap.completeOrthogonalDecomposition().solve(b);

      bool all_pos = true;
      for (int t = 0; t < zp.size(); ++t)
        if (zp[t] <= 0.0) { all_pos = false; break; }
      if (all_pos) {
        x.setZero();
        for (size_t t = 0; t < P.size(); ++t) x[P[t]] = zp[static_cast<int>(t)];
        break;
      }
      // Step toward zp until the first passive variable hits zero.
      double alpha = 1.0;
      for (size_t t = 0; t < P.size(); ++t) {
        const double zt = zp[static_cast<int>(t)];
        if (zt <= 0.0) {
          const double xt = x[P[t]];
          if (xt - zt > 0.0) alpha = std::min(alpha, xt / (xt - zt));
        }
      }
      for (size_t t = 0; t < P.size(); ++t)
        x[P[t]] += alpha * (zp[static_cast<int>(t)] - x[P[t]]);
      for (size_t t = 0; t < P.size(); ++t)
        if (x[P[t]] <= tol) { x[P[t]] = 0.0; passive[static_cast<size_t>(P[t])] = false; }
      if (it >= max_iter) break;
    }
    w = A.transpose() * (b - A * x);
  }

  res.x = x;
  res.residual = (A * x - b).norm();
  res.iterations = it;
  res.converged = it < max_iter;
  return res;
}

SemiNnlsResult semi_nnls(const Mat& F, const Mat& S, const Vec& r) {
  SemiNnlsResult out;
  if (F.cols() == 0 && S.cols() == 0) {
    out.y = Vec::Zero(0);
    out.s = Vec::Zero(0);
    out.residual = r.norm();
    out.converged = true;
    return out;
  }
  if (S.cols() == 0) {
    out.s = Vec::Zero(0);
    out.y = F.completeOrthogonalDecomposition().solve(r);
    out.residual = (F * out.y - r).norm();
    out.converged = true;
    return out;
  }
  if (F.cols() == 0) {
    NnlsResult nn = nnls(S, r);
    out.y = Vec::Zero(0);
    out.s = nn.x;
    out.residual = nn.residual;
    out.converged = nn.converged;
    return out;
  }
  // Project out the free block: with Q an orthonormal basis of range(F),
  // min over s >= 0 of ||(I - Q Q^T)(S s - r)||, then recover y min-norm.
  Eigen::HouseholderQR<Mat> qr(F);
  Mat Q = qr.householderQ() * Mat::Identity(F.rows(), std::min(F.rows(), F.cols()));
  Mat Sp = S - Q * (Q.transpose() * S);
  Vec rp = r - Q * (Q.transpose() * r);
  NnlsResult nn = nnls(Sp, rp);
  out.s = nn.x;
  out.y = F.completeOrthogonalDecomposition().solve(r - S * out.s);
  out.residual = (F * out.y + S * out.s - r).norm();
  out.converged = nn.converged;
  return out;
}

}  // namespace sweep
