#include "sweep/lbfgs.hpp"

#include <cmath>
#include <deque>

namespace sweep {

LbfgsResult lbfgs_minimize(const std::function<double(const Vec&)>& fval,
                           const std::function<void(const Vec&, Vec&)>& grad, const Vec& x0,
                           const LbfgsOptions& opt) {
  LbfgsResult res;
  Vec x = x0;
  double f = fval(x);
  Vec g(x.size());
  grad(x, g);

  std::deque<Vec> S, Y;
  std::deque<double> RhoInv;
  int stall_count = 0;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    if (g.norm() <= opt.grad_tol * (1.0 + std::abs(f))) {
      res.converged = true;
      break;
    }

    // Two-loop recursion.
    Vec q = g;
    const int mlen = static_cast<int>(S.size());
    std::vector<double> alpha(static_cast<size_t>(mlen));
    for (int i = mlen - 1; i >= 0; --i) {
      alpha[static_cast<size_t>(i)] = S[static_cast<size_t>(i)].dot(q) / RhoInv[static_cast<size_t>(i)];
      q -= alpha[static_cast<size_t>(i)] * Y[static_cast<size_t>(i)];
    }
    double gamma = 1.0;
    if (mlen > 0) {
      const double yy = Y.back().squaredNorm();
      if (yy > 0.0) gamma = RhoInv.back() / yy;
    }
    Vec z = gamma * q;
    for (int i = 0; i < mlen; ++i) {
      const double beta = Y[static_cast<size_t>(i)].dot(z) / RhoInv[static_cast<size_t>(i)];
      z += (alpha[static_cast<size_t>(i)] - beta) * S[static_cast<size_t>(i)];
    }
    Vec dir = -z;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // reset to steepest descent on a bad model
      dir = -g;
      slope = -g.squaredNorm();
      S.clear();
      Y.clear();
      RhoInv.clear();
    }

    // Armijo backtracking.
    double step = 1.0;
    const double c1 = 1e-4;
    double fn = f;
    Vec xn = x;
    bool accepted = false;
    for (int ls = 0; ls < opt.max_linesearch; ++ls) {
      xn = x + step * dir;
      fn = fval(xn);
      if (std::isfinite(fn) && fn <= f + c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || (x - xn).norm() <= opt.step_tol * (1.0 + x.norm())) {
      res.converged = g.norm() <= 1e2 * opt.grad_tol * (1.0 + std::abs(f));
      res.stalled = !res.converged;
      break;
    }
    if (f - fn <= 1e-13 * (1.0 + std::abs(f))) {
      if (++stall_count >= 3) {
        x = xn;
        f = fn;
        grad(xn, g);
        res.stalled = true;
        break;
      }
    } else {
      stall_count = 0;
    }

    Vec gn(x.size());
    grad(xn, gn);
    Vec s = xn - x;
    Vec yv = gn - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      S.push_back(s);
      Y.push_back(yv);
      RhoInv.push_back(sy);
      if (static_cast<int>(S.size()) > opt.memory) {
        S.pop_front();
        Y.pop_front();
        RhoInv.pop_front();
      }
    }
    x = xn;
    f = fn;
    g = gn;
  }

  res.x = x;
  res.fval = f;
  res.grad = g;
  return res;
}

}  // namespace sweep
