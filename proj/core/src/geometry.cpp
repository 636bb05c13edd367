#include "sweep/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

namespace sweep {

void SweepingSet::validate() const {
  if (n <= 0 || m <= 0) throw InvalidArgument("SweepingSet: n and m must be positive");
  if (!(m1 > 0.0) || m1 > m2) throw InvalidArgument("SweepingSet: need 0 < m1 <= m2");
  if (m3 < 0.0) throw InvalidArgument("SweepingSet: m3 must be >= 0");
  if (beta < 1.0) throw InvalidArgument("SweepingSet: beta must be >= 1");
  if (!(rho > 0.0)) throw InvalidArgument("SweepingSet: rho must be positive");
  if (!g || !grad_g || !hess_g) throw InvalidArgument("SweepingSet: missing evaluators");
}

bool ActiveIndexSet::contains(int i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

bool membership(const SweepingSet& set, const Vec& y, double tol) {
  if (!all_finite(y)) throw InvalidArgument("membership: non-finite point");
  return (set.g(y).array() >= -tol).all();
}

ActiveIndexSet active_set(const SweepingSet& set, const Vec& y, double threshold) {
  if (!membership(set, y, set.tol_act))
    throw PreconditionViolation("active_set: point is not in the set");
  ActiveIndexSet out;
  out.threshold = threshold;
  const Vec gv = set.g(y);
  const double cut = (threshold > 0.0) ? threshold : set.tol_act;
  for (int i = 0; i < set.m; ++i)
    if (gv[i] <= cut) out.indices.push_back(i);
  return out;
}

double prox_modulus(const SweepingSet& set) {
  if (set.prox_modulus_override > 0.0) return set.prox_modulus_override;
  if (set.m3 <= 0.0) return std::numeric_limits<double>::infinity();
  return set.m1 / (set.m3 * set.beta);
}

namespace {

// Solve the equality-constrained KKT Newton step for the working set W:
//   y - z - sum_{i in W} lam_i grad g_i(y) = 0,  g_i(y) = 0 (i in W).
struct KktStep {
  Vec dy, dlam;
  bool ok = false;
};

KktStep kkt_newton_step(const SweepingSet& set, const Vec& z, const Vec& y, const Vec& lam,
                        const std::vector<int>& W) {
  const int n = set.n;
  const int w = static_cast<int>(W.size());
  const Mat G = set.grad_g(y);
  const auto H = set.hess_g(y);
  const Vec gv = set.g(y);

  Mat A(n + w, n + w);
  A.setZero();
  Mat Hl = Mat::Identity(n, n);
  for (int t = 0; t < w; ++t) Hl -= lam[t] * H[static_cast<size_t>(W[t])];
  A.topLeftCorner(n, n) = Hl;
  for (int t = 0; t < w; ++t) {
    A.block(0, n + t, n, 1) = -G.row(W[t]).transpose();
    A.block(n + t, 0, 1, n) = G.row(W[t]);
  }
  Vec rhs(n + w);
  Vec r1 = y - z;
  for (int t = 0; t < w; ++t) r1 -= lam[t] * G.row(W[t]).transpose();
  rhs.head(n) = -r1;
  for (int t = 0; t < w; ++t) rhs[n + t] = -gv[W[t]];

  KktStep s;
  Eigen::FullPivLU<Mat> lu(A);
  if (!lu.isInvertible()) {
    // Fall back to a least-squares step when the working set is degenerate.
    Vec sol = A.completeOrthogonalDecomposition().solve(rhs);
    s.dy = sol.head(n);
    s.dlam = sol.tail(w);
    s.ok = true;
    return s;
  }
  Vec sol = lu.solve(rhs);
  s.dy = sol.head(n);
  s.dlam = sol.tail(w);
  s.ok = true;
  return s;
}

}  // namespace

ProjectionResult project(const SweepingSet& set, const Vec& z, int max_iter) {
  if (!all_finite(z)) throw InvalidArgument("project: non-finite point");
  const int n = set.n;
  if (z.size() != n) throw InvalidArgument("project: dimension mismatch");

  ProjectionResult res;
  res.point = z;
  res.multipliers = Vec::Zero(set.m);

  const Vec g0 = set.g(z);
  if ((g0.array() >= 0.0).all()) {
    res.converged = true;
    return res;  // already feasible, identity projection
  }

  // Working set starts from the constraints violated at z.
  std::vector<int> W;
  for (int i = 0; i < set.m; ++i)
    if (g0[i] < 0.0) W.push_back(i);

  Vec y = z;
  Vec lam = Vec::Zero(static_cast<int>(W.size()));
  const double tol = 1e-12 * (1.0 + z.norm());

  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    KktStep s = kkt_newton_step(set, z, y, lam, W);
    if (!s.ok) break;

    double step = 1.0;
    y += step * s.dy;
    lam += step * s.dlam;

    const Vec gv = set.g(y);
    // Residual of the stationarity system on the working set.
    Vec stat = y - z;
    const Mat G = set.grad_g(y);
    for (int t = 0; t < static_cast<int>(W.size()); ++t)
      stat -= lam[t] * G.row(W[t]).transpose();
    double feas_w = 0.0;
    for (int t = 0; t < static_cast<int>(W.size()); ++t)
      feas_w = std::max(feas_w, std::abs(gv[W[t]]));

    if (stat.norm() < tol && feas_w < tol) {
      // Active-set management: drop negative multipliers, add violated rows.
      int drop = -1;
      double worst = -1e-10;
      for (int t = 0; t < static_cast<int>(W.size()); ++t)
        if (lam[t] < worst) { worst = lam[t]; drop = t; }
      if (drop >= 0) {
        W.erase(W.begin() + drop);
        Vec nl(static_cast<int>(W.size()));
        int c = 0;
        for (int t = 0; t < lam.size(); ++t)
          if (t != drop) nl[c++] = lam[t];
        lam = nl;
        continue;
      }
      int add = -1;
      double viol = -1e-12;
      for (int i = 0; i < set.m; ++i) {
        bool inW = std::find(W.begin(), W.end(), i) != W.end();
        if (!inW && gv[i] < viol) { viol = gv[i]; add = i; }
      }
      if (add >= 0) {
        W.push_back(add);
        std::sort(W.begin(), W.end());
        Vec nl = Vec::Zero(static_cast<int>(W.size()));
        int c = 0;
        for (int t = 0; t < static_cast<int>(W.size()); ++t)
          if (W[t] != add) nl[t] = lam[c++];
        lam = nl;
        continue;
      }
      res.point = y;
      res.multipliers = Vec::Zero(set.m);
      for (int t = 0; t < static_cast<int>(W.size()); ++t)
        res.multipliers[W[t]] = lam[t];
      res.converged = true;
      const double eta = prox_modulus(set);
      res.inside_prox_radius = (z - y).norm() < eta;
      return res;
    }
  }

  res.point = y;
  res.multipliers = Vec::Zero(set.m);
  for (int t = 0; t < static_cast<int>(W.size()); ++t)
    res.multipliers[W[t]] = std::max(0.0, lam[t]);
  throw ProjectionFailure("project: Newton iteration did not converge", res);
}

NormalConeElement normal_cone_element(const SweepingSet& set, const Vec& y, const Vec& lambdas) {
  if (lambdas.size() != set.m) throw InvalidArgument("normal_cone_element: multiplier size");
  if ((lambdas.array() < -1e-14).any())
    throw InvalidArgument("normal_cone_element: negative multiplier");
  const ActiveIndexSet act = active_set(set, y, 0.0);
  for (int i = 0; i < set.m; ++i)
    if (lambdas[i] > 1e-14 && !act.contains(i))
      throw InvalidArgument("normal_cone_element: support outside the active set");
  NormalConeElement e;
  e.multipliers = lambdas;
  const Mat G = set.grad_g(y);
  e.vector_value = -(G.transpose() * lambdas);
  return e;
}

AssumptionReport check_assumptions(const SweepingSet& set, const SampleBox& box, int samples,
                                   unsigned seed) {
  if (box.lo.size() != set.n || box.hi.size() != set.n)
    throw InvalidArgument("check_assumptions: box dimension mismatch");
  AssumptionReport rep;
  rep.min_grad_norm = std::numeric_limits<double>::infinity();
  rep.max_grad_norm = 0.0;
  rep.max_hess_norm = 0.0;
  rep.beta_estimate = 1.0;
  rep.samples = samples;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  for (int s = 0; s < samples; ++s) {
    Vec y(set.n);
    for (int i = 0; i < set.n; ++i) y[i] = box.lo[i] + u01(rng) * (box.hi[i] - box.lo[i]);
    const Mat G = set.grad_g(y);
    const auto H = set.hess_g(y);
    for (int i = 0; i < set.m; ++i) {
      const double gn = G.row(i).norm();
      rep.min_grad_norm = std::min(rep.min_grad_norm, gn);
      rep.max_grad_norm = std::max(rep.max_grad_norm, gn);
      const double hn = H[static_cast<size_t>(i)].operatorNorm();
      rep.max_hess_norm = std::max(rep.max_hess_norm, hn);
    }
    // Ratio sum lam_i ||grad g_i|| / ||sum lam_i grad g_i|| over random
    // nonnegative multipliers supported on the rho-active indices.
    if (membership(set, y, set.tol_act)) {
      const ActiveIndexSet irho = active_set(set, y, set.rho);
      if (!irho.indices.empty()) {
        for (int rep_l = 0; rep_l < 8; ++rep_l) {
          Vec combo = Vec::Zero(set.n);
          double num = 0.0;
          for (int i : irho.indices) {
            const double li = u01(rng);
            num += li * G.row(i).norm();
            combo += li * G.row(i).transpose();
          }
          const double den = combo.norm();
          if (den > 1e-12 && num > 0.0)
            rep.beta_estimate = std::max(rep.beta_estimate, num / den);
        }
      }
    }
  }

  const double slack = 1e-9;
  rep.m1_ok = rep.min_grad_norm >= set.m1 - slack;
  rep.m2_ok = rep.max_grad_norm <= set.m2 + slack;
  rep.m3_ok = rep.max_hess_norm <= set.m3 + slack;
  rep.beta_ok = rep.beta_estimate <= set.beta + 1e-6;
  return rep;
}

SampleBox default_validation_box(const Vec& x0) {
  const double r = 2.0 * (x0.norm() + 1.0);
  SampleBox b;
  b.lo = x0.array() - r;
  b.hi = x0.array() + r;
  return b;
}

SweepingSet make_set(int n, const std::vector<ConstraintForm>& forms, double m1, double m2,
                     double m3, double beta, double rho) {
  SweepingSet s;
  s.n = n;
  s.m = static_cast<int>(forms.size());
  s.m1 = m1;
  s.m2 = m2;
  s.m3 = m3;
  s.beta = beta;
  s.rho = rho;

  auto forms_copy = forms;
  s.g = [n, forms_copy](const Vec& y) {
    Vec out(static_cast<int>(forms_copy.size()));
    for (size_t i = 0; i < forms_copy.size(); ++i) {
      const auto& f = forms_copy[i];
      switch (f.kind) {
        case ConstraintForm::Kind::Affine:
          out[static_cast<int>(i)] = f.a.dot(y) + f.b;
          break;
        case ConstraintForm::Kind::PairDisk: {
          const int half = n / 2;
          out[static_cast<int>(i)] = (y.head(half) - y.tail(half)).norm() - 2.0 * f.radius;
          break;
        }
        case ConstraintForm::Kind::BallComplement:
          out[static_cast<int>(i)] = (y - f.center).squaredNorm() - f.radius * f.radius;
          break;
        case ConstraintForm::Kind::Ball:
          out[static_cast<int>(i)] = f.radius * f.radius - (y - f.center).squaredNorm();
          break;
      }
    }
    return out;
  };
  s.grad_g = [n, forms_copy](const Vec& y) {
    Mat G(static_cast<int>(forms_copy.size()), n);
    G.setZero();
    for (size_t i = 0; i < forms_copy.size(); ++i) {
      const auto& f = forms_copy[i];
      const int r = static_cast<int>(i);
      switch (f.kind) {
        case ConstraintForm::Kind::Affine:
          G.row(r) = f.a.transpose();
          break;
        case ConstraintForm::Kind::PairDisk: {
          const int half = n / 2;
          Vec d = y.head(half) - y.tail(half);
          const double nd = std::max(d.norm(), 1e-300);
          G.row(r).head(half) = (d / nd).transpose();
          G.row(r).tail(half) = -(d / nd).transpose();
          break;
        }
        case ConstraintForm::Kind::BallComplement:
          G.row(r) = 2.0 * (y - f.center).transpose();
          break;
        case ConstraintForm::Kind::Ball:
          G.row(r) = -2.0 * (y - f.center).transpose();
          break;
      }
    }
    return G;
  };
  s.hess_g = [n, forms_copy](const Vec& y) {
    std::vector<Mat> H(forms_copy.size(), Mat::Zero(n, n));
    for (size_t i = 0; i < forms_copy.size(); ++i) {
      const auto& f = forms_copy[i];
      switch (f.kind) {
        case ConstraintForm::Kind::Affine:
          break;
        case ConstraintForm::Kind::PairDisk: {
          const int half = n / 2;
          Vec d = y.head(half) - y.tail(half);
          const double nd = std::max(d.norm(), 1e-300);
          Mat P = Mat::Identity(half, half) - (d / nd) * (d / nd).transpose();
          P /= nd;
          H[i].topLeftCorner(half, half) = P;
          H[i].bottomRightCorner(half, half) = P;
          H[i].topRightCorner(half, half) = -P;
          H[i].bottomLeftCorner(half, half) = -P;
          break;
        }
        case ConstraintForm::Kind::BallComplement:
          H[i] = 2.0 * Mat::Identity(n, n);
          break;
        case ConstraintForm::Kind::Ball:
          H[i] = -2.0 * Mat::Identity(n, n);
          break;
      }
    }
    return H;
  };
  s.validate();
  return s;
}

}  // namespace sweep
