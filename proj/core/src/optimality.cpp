#include "sweep/optimality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sweep/nnls.hpp"
#include "sweep/second_order.hpp"

namespace sweep {

namespace {

Mat jac_f_x(const ProcessSpec& spec, const Vec& x, const Vec& a) {
  if (spec.grad_f_x) return spec.grad_f_x(x, a);
  Mat J(spec.n, spec.n);
  const Vec f0 = spec.f(x, a);
  Vec xp = x;
  for (int i = 0; i < spec.n; ++i) {
    const double d = 1e-7 * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + d;
    J.col(i) = (spec.f(xp, a) - f0) / d;
    xp[i] = x[i];
  }
  return J;
}

Mat jac_f_a(const ProcessSpec& spec, const Vec& x, const Vec& a) {
  if (spec.grad_f_a) return spec.grad_f_a(x, a);
  Mat J(spec.n, spec.d);
  const Vec f0 = spec.f(x, a);
  Vec ap = a;
  for (int i = 0; i < spec.d; ++i) {
    const double d = 1e-7 * (1.0 + std::abs(a[i]));
    ap[i] = a[i] + d;
    J.col(i) = (spec.f(x, ap) - f0) / d;
    ap[i] = a[i];
  }
  return J;
}

struct Entry {
  double residual = 0.0;
  double scale = 0.0;
  void take(double r, double s) {
    residual = std::max(residual, r);
    scale = std::max(scale, s);
  }
};

void push(ConditionReport& rep, const std::string& name, const Entry& e, const CheckOptions& opt) {
  ConditionEntry ce;
  ce.name = name;
  ce.residual = e.residual;
  ce.tolerance = opt.tol_abs + opt.tol_scale * (1.0 + e.scale);
  ce.pass = ce.residual <= ce.tolerance;
  rep.entries.push_back(std::move(ce));
}

void push_flag(ConditionReport& rep, const std::string& name, bool pass) {
  ConditionEntry ce;
  ce.name = name;
  ce.residual = pass ? 0.0 : 1.0;
  ce.tolerance = 0.5;
  ce.pass = pass;
  rep.entries.push_back(std::move(ce));
}

// Shared per-node data for both checkers.
struct NodeData {
  Vec y;       // x - u
  Vec gval;    // g(y)
  Mat G;       // grad g(y)
  Mat Hl;      // sum eta_i hess g_i(y)
  Vec psi;     // adjoint coderivative argument
};

std::vector<NodeData> node_data(const DiscreteTrajectory& traj, const DualSystem& du,
                                const SweepingSet& set, double h) {
  const int k = traj.k;
  std::vector<NodeData> nd(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    NodeData& c = nd[static_cast<size_t>(j)];
    c.y = traj.x[static_cast<size_t>(j)] - traj.u[static_cast<size_t>(j)];
    c.gval = set.g(c.y);
    c.G = set.grad_g(c.y);
    const auto H = set.hess_g(c.y);
    c.Hl = Mat::Zero(set.n, set.n);
    for (int i = 0; i < set.m; ++i)
      if (du.eta[static_cast<size_t>(j)][i] != 0.0)
        c.Hl += du.eta[static_cast<size_t>(j)][i] * H[static_cast<size_t>(i)];
    c.psi = du.qx[static_cast<size_t>(j) + 1] -
            du.lambda * (du.vx[static_cast<size_t>(j)] + du.thx[static_cast<size_t>(j)] / h);
  }
  return nd;
}

double xi_joint_norm(const DualSystem& du) {
  double s = 0.0;
  for (size_t j = 0; j < du.xi1.size(); ++j) {
    const double v = du.xi1[j] + du.xi2[j];
    s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

Vec DualSystem::p_terminal_x() const { return qx.back() - gamma_atom; }
Vec DualSystem::p_terminal_u(const Vec& u_terminal) const {
  return qu.back() + gamma_atom + 2.0 * (xi1.back() + xi2.back()) * u_terminal;
}
Vec DualSystem::p_terminal_a() const { return qa.back(); }

double ConditionReport::max_residual() const {
  double r = 0.0;
  for (const auto& e : entries) r = std::max(r, e.residual);
  return r;
}

const ConditionEntry* ConditionReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string ConditionReport::to_text() const {
  std::string out;
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%-28s residual=%-14.6g tol=%-12.4g %s\n", e.name.c_str(),
                  e.residual, e.tolerance, e.pass ? "pass" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "nontriviality value: %.6g\noverall: %s\n", nontriviality_value,
                overall ? "pass" : "FAIL");
  out += buf;
  return out;
}

std::string ConditionReport::to_csv() const {
  std::string out = "condition,residual,tolerance,verdict\n";
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%s\n", e.name.c_str(), e.residual, e.tolerance,
                  e.pass ? "pass" : "fail");
    out += buf;
  }
  return out;
}

double nontriviality(const DualSystem& du, const DiscreteTrajectory& traj, NontrivialityMode mode) {
  const double h = traj.h();
  double tv1 = 0.0, tv2 = 0.0;
  const int k = traj.k;
  for (int j = 0; j < k; ++j) {
    tv1 += std::abs(du.xi1[static_cast<size_t>(j)]) * h;
    tv2 += std::abs(du.xi2[static_cast<size_t>(j)]) * h;
  }
  tv1 += std::abs(du.xi1[static_cast<size_t>(k)]);
  tv2 += std::abs(du.xi2[static_cast<size_t>(k)]);

  const Vec pT_x = du.p_terminal_x();
  const Vec pT_u = du.p_terminal_u(traj.u[static_cast<size_t>(k)]);
  const Vec pT_a = du.p_terminal_a();
  const double pT = std::sqrt(pT_x.squaredNorm() + pT_u.squaredNorm() + pT_a.squaredNorm());
  const double qu0 = du.qu[0].norm();

  switch (mode) {
    case NontrivialityMode::General:
      return du.lambda + qu0 + pT + tv1 + tv2;
    case NontrivialityMode::EnhancedInitial:
      return du.lambda + pT + tv1 + tv2;
    case NontrivialityMode::EnhancedTerminal:
      return du.lambda + qu0 + tv1 + tv2;
  }
  return 0.0;
}

ConditionReport check_discrete(const DiscreteTrajectory& traj, const DualSystem& du,
                               const DiscreteProblem& pb, const CheckOptions& opt) {
  const int k = traj.k, m = pb.spec.set.m;
  const double h = pb.h;
  if (static_cast<int>(du.qx.size()) != k + 1 || static_cast<int>(du.eta.size()) != k + 1 ||
      static_cast<int>(du.gamma.size()) != k)
    throw InvalidArgument("check_discrete: dual system dimensions inconsistent");

  ConditionReport rep;
  const auto nd = node_data(traj, du, pb.spec.set, h);
  const double rlo = pb.spec.r1 - pb.epsilon_k;
  const double rhi = pb.spec.r2 + pb.epsilon_k;

  Entry dyn, adjx, adju, adja, cpu, cpa, etasgn, etacmp, etaorth, gtags, xisgn, xicmp;

  for (int j = 0; j < k; ++j) {
    const auto& c = nd[static_cast<size_t>(j)];
    const Vec& etaj = du.eta[static_cast<size_t>(j)];
    const Vec& gamj = du.gamma[static_cast<size_t>(j)];
    const Vec fj = pb.spec.f(traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]);

    // Primal dynamics: dx/h + f = sum eta_i grad g_i.
    {
      const Vec lhs =
          (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h + fj;
      const Vec rhs = c.G.transpose() * etaj;
      dyn.take((lhs - rhs).norm(), std::max(lhs.norm(), rhs.norm()));
    }

    const Mat Jx = jac_f_x(pb.spec, traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]);
    const Mat Ja = jac_f_a(pb.spec, traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]);
    const Vec hess_term = c.Hl * c.psi;
    const Vec gam_term = c.G.transpose() * gamj;

    // State adjoint difference equation.
    {
      const Vec lhs = (du.qx[static_cast<size_t>(j) + 1] - du.qx[static_cast<size_t>(j)]) / h -
                      du.lambda * du.wx[static_cast<size_t>(j)];
      const Vec rhs = Jx.transpose() * c.psi - hess_term - gam_term;
      adjx.take((lhs - rhs).norm(), std::max(lhs.norm(), rhs.norm()));
    }
    // Set-control adjoint difference equation (xi entries are densities).
    {
      const Vec lhs = (du.qu[static_cast<size_t>(j) + 1] - du.qu[static_cast<size_t>(j)]) / h -
                      du.lambda * du.wu[static_cast<size_t>(j)] -
                      2.0 * (du.xi1[static_cast<size_t>(j)] + du.xi2[static_cast<size_t>(j)]) *
                          traj.u[static_cast<size_t>(j)];
      const Vec rhs = hess_term + gam_term;
      adju.take((lhs - rhs).norm(), std::max(lhs.norm(), rhs.norm()));
    }
    // Perturbation adjoint difference equation.
    {
      const Vec lhs = (du.qa[static_cast<size_t>(j) + 1] - du.qa[static_cast<size_t>(j)]) / h -
                      du.lambda * du.wa[static_cast<size_t>(j)];
      const Vec rhs = Ja.transpose() * c.psi;
      adja.take((lhs - rhs).norm(), std::max(lhs.norm(), rhs.norm()));
    }
    // Velocity-slot couplings.
    {
      const Vec tu = du.lambda * (du.vu[static_cast<size_t>(j)] + du.thu[static_cast<size_t>(j)] / h);
      cpu.take((du.qu[static_cast<size_t>(j) + 1] - tu).norm(), tu.norm());
      const Vec ta = du.lambda * (du.va[static_cast<size_t>(j)] + du.tha[static_cast<size_t>(j)] / h);
      cpa.take((du.qa[static_cast<size_t>(j) + 1] - ta).norm(), ta.norm());
    }

    // Sign and complementarity families.
    const double eta_scale = etaj.cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i) {
      etasgn.take(std::max(0.0, -etaj[i]), eta_scale);
      if (c.gval[i] > pb.spec.set.tol_act) {
        etacmp.take(std::abs(etaj[i]), eta_scale);
        gtags.take(std::abs(gamj[i]), gamj.cwiseAbs().maxCoeff());
      } else {
        const double s = c.G.row(i).dot(c.psi);
        if (etaj[i] > 1e-7 * (1.0 + eta_scale)) {
          etaorth.take(std::abs(s), c.psi.norm());
        } else {
          const double dirtol = 1e-9 * (1.0 + c.psi.norm());
          if (s > dirtol) gtags.take(std::abs(gamj[i]), std::abs(gamj[i]));
          else if (s < -dirtol) gtags.take(std::max(0.0, -gamj[i]), std::abs(gamj[i]));
        }
      }
    }
    const double nu = traj.u[static_cast<size_t>(j)].norm();
    xisgn.take(std::max(0.0, -du.xi1[static_cast<size_t>(j)]), std::abs(du.xi1[static_cast<size_t>(j)]));
    xisgn.take(std::max(0.0, du.xi2[static_cast<size_t>(j)]), std::abs(du.xi2[static_cast<size_t>(j)]));
    xicmp.take(std::abs(du.xi1[static_cast<size_t>(j)] * (nu - rhi)), std::abs(du.xi1[static_cast<size_t>(j)]) * (1.0 + rhi));
    xicmp.take(std::abs(du.xi2[static_cast<size_t>(j)] * (nu - rlo)), std::abs(du.xi2[static_cast<size_t>(j)]) * (1.0 + rlo));
  }

  // Terminal block.
  const Vec y_k = traj.x[static_cast<size_t>(k)] - traj.u[static_cast<size_t>(k)];
  const Vec g_k = pb.spec.set.g(y_k);
  const Mat G_k = pb.spec.set.grad_g(y_k);
  const Vec& eta_k = du.eta[static_cast<size_t>(k)];
  const Vec eta_term = G_k.transpose() * eta_k;
  const double xiT = du.xi1[static_cast<size_t>(k)] + du.xi2[static_cast<size_t>(k)];
  const Vec uT = traj.u[static_cast<size_t>(k)];

  Entry trx, tru, tra, xiT_entry;
  {
    const Vec pTx = du.p_terminal_x();
    const Vec gphi = pb.cost.phi_gradient(traj.x[static_cast<size_t>(k)]);
    const Vec resid = pTx + du.lambda * gphi - eta_term;
    trx.take(resid.norm(), std::max(pTx.norm(), (du.lambda * gphi).norm()));
  }
  {
    const Vec pTu = du.p_terminal_u(uT);
    const Vec resid = pTu - eta_term + 2.0 * xiT * uT;
    tru.take(resid.norm(), std::max(pTu.norm(), eta_term.norm()));
  }
  tra.take(du.p_terminal_a().norm(), 1.0);
  {
    // Terminal normal-cone inclusions for the norm bounds.
    const double nuT = uT.norm();
    const double gate = 1e-7 * (1.0 + rhi);
    xiT_entry.take(std::max(0.0, -du.xi1[static_cast<size_t>(k)]), std::abs(du.xi1[static_cast<size_t>(k)]));
    xiT_entry.take(std::max(0.0, du.xi2[static_cast<size_t>(k)]), std::abs(du.xi2[static_cast<size_t>(k)]));
    if (nuT < rhi - gate)
      xiT_entry.take(std::abs(du.xi1[static_cast<size_t>(k)]), std::abs(du.xi1[static_cast<size_t>(k)]));
    if (nuT > rlo + gate)
      xiT_entry.take(std::abs(du.xi2[static_cast<size_t>(k)]), std::abs(du.xi2[static_cast<size_t>(k)]));
  }
  // Terminal eta complementarity and sign.
  Entry etaT;
  for (int i = 0; i < m; ++i) {
    etaT.take(std::max(0.0, -eta_k[i]), eta_k.cwiseAbs().maxCoeff());
    if (g_k[i] > pb.spec.set.tol_act) etaT.take(std::abs(eta_k[i]), eta_k.cwiseAbs().maxCoeff());
  }

  push(rep, "primal-dynamics", dyn, opt);
  push(rep, "adjoint-x", adjx, opt);
  push(rep, "adjoint-u", adju, opt);
  push(rep, "adjoint-a", adja, opt);
  push(rep, "coupling-u", cpu, opt);
  push(rep, "coupling-a", cpa, opt);
  push(rep, "transversality-x", trx, opt);
  push(rep, "transversality-u", tru, opt);
  push(rep, "transversality-a", tra, opt);
  push(rep, "terminal-xi-inclusion", xiT_entry, opt);
  push(rep, "terminal-eta", etaT, opt);
  push(rep, "eta-sign", etasgn, opt);
  push(rep, "eta-complementarity", etacmp, opt);
  push(rep, "eta-orthogonality", etaorth, opt);
  push(rep, "gamma-tags", gtags, opt);
  push(rep, "xi-sign", xisgn, opt);
  push(rep, "xi-complementarity", xicmp, opt);

  rep.nontriviality_value = du.lambda + eta_k.norm() + xi_joint_norm(du) + du.qu[0].norm() +
                            du.qa[0].norm();
  for (int j = 0; j < k; ++j) rep.nontriviality_value += du.qx[static_cast<size_t>(j)].norm();
  push_flag(rep, "nontriviality", rep.nontriviality_value > opt.tol_nontrivial);

  bool licq_all = true;
  for (int j = 0; j < k && licq_all; ++j)
    licq_all = licq_holds(pb.spec.set, nd[static_cast<size_t>(j)].y);
  if (licq_all) {
    const double env = du.lambda + xi_joint_norm(du) + du.qu[0].norm();
    push_flag(rep, "enhanced-nontriviality", env > opt.tol_nontrivial);
  }

  rep.overall = true;
  for (const auto& e : rep.entries) rep.overall = rep.overall && e.pass;
  return rep;
}

ConditionReport check_continuous(const DiscreteTrajectory& traj, const DualSystem& du,
                                 const ProcessSpec& spec, const CostSpec& cost,
                                 const CheckOptions& opt) {
  const int k = traj.k, m = spec.set.m;
  const double h = traj.h();
  ConditionReport rep;
  const auto nd = node_data(traj, du, spec.set, h);

  // Measure node weights: state-slot vector weights G_j and scalar xi weights.
  std::vector<Vec> Gw(static_cast<size_t>(k) + 1, Vec::Zero(spec.n));
  std::vector<double> Xw(static_cast<size_t>(k) + 1, 0.0);
  for (int j = 0; j < k; ++j) {
    const auto& c = nd[static_cast<size_t>(j)];
    Gw[static_cast<size_t>(j)] =
        h * (c.Hl * c.psi + c.G.transpose() * du.gamma[static_cast<size_t>(j)]);
    Xw[static_cast<size_t>(j)] = h * (du.xi1[static_cast<size_t>(j)] + du.xi2[static_cast<size_t>(j)]);
  }
  Gw[static_cast<size_t>(k)] = du.gamma_atom;
  Xw[static_cast<size_t>(k)] = du.xi1[static_cast<size_t>(k)] + du.xi2[static_cast<size_t>(k)];

  // Absolutely continuous adjoint p from q and the measure tails.
  std::vector<Vec> px(static_cast<size_t>(k) + 1), pu(static_cast<size_t>(k) + 1),
      pa(static_cast<size_t>(k) + 1);
  Vec tailG = Vec::Zero(spec.n);
  Vec tailU = Vec::Zero(spec.n);
  for (int j = k; j >= 0; --j) {
    tailG += Gw[static_cast<size_t>(j)];
    tailU += 2.0 * Xw[static_cast<size_t>(j)] * traj.u[static_cast<size_t>(j)] + Gw[static_cast<size_t>(j)];
    px[static_cast<size_t>(j)] = du.qx[static_cast<size_t>(j)] - tailG;
    pu[static_cast<size_t>(j)] = du.qu[static_cast<size_t>(j)] + tailU;
    pa[static_cast<size_t>(j)] = du.qa[static_cast<size_t>(j)];
  }

  Entry prim, odex, odeu, odea, quv, qav, pqrel, etacmp, etaorth, natg, natx;

  for (int j = 0; j < k; ++j) {
    const auto& c = nd[static_cast<size_t>(j)];
    const Vec fj = spec.f(traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]);
    const Vec dx = (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h;
    {
      const Vec rhs = c.G.transpose() * du.eta[static_cast<size_t>(j)];
      prim.take((dx + fj - rhs).norm(), std::max((dx + fj).norm(), rhs.norm()));
    }
    const Mat Jx = jac_f_x(spec, traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]);
    const Mat Ja = jac_f_a(spec, traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]);
    {
      const Vec lx = (px[static_cast<size_t>(j) + 1] - px[static_cast<size_t>(j)]) / h -
                     du.lambda * du.wx[static_cast<size_t>(j)] - Jx.transpose() * c.psi;
      odex.take(lx.norm(), px[static_cast<size_t>(j)].norm() / h + 1.0);
      const Vec lu = (pu[static_cast<size_t>(j) + 1] - pu[static_cast<size_t>(j)]) / h -
                     du.lambda * du.wu[static_cast<size_t>(j)];
      odeu.take(lu.norm(), pu[static_cast<size_t>(j)].norm() / h + 1.0);
      const Vec la = (pa[static_cast<size_t>(j) + 1] - pa[static_cast<size_t>(j)]) / h -
                     du.lambda * du.wa[static_cast<size_t>(j)] - Ja.transpose() * c.psi;
      odea.take(la.norm(), pa[static_cast<size_t>(j)].norm() / h + 1.0);
    }
    // Velocity-gradient identities for the bounded-variation adjoint q.
    {
      const Vec dxj = dx;
      const Vec duj = (traj.u[static_cast<size_t>(j) + 1] - traj.u[static_cast<size_t>(j)]) / h;
      const Vec daj = (traj.a[static_cast<size_t>(j) + 1] - traj.a[static_cast<size_t>(j)]) / h;
      const CostGrad cg = cost.ell_gradient(traj.t(j), traj.x[static_cast<size_t>(j)],
                                            traj.u[static_cast<size_t>(j)],
                                            traj.a[static_cast<size_t>(j)], dxj, duj, daj);
      quv.take((du.qu[static_cast<size_t>(j) + 1] - du.lambda * cg.ud).norm(),
               (du.lambda * cg.ud).norm());
      qav.take((du.qa[static_cast<size_t>(j) + 1] - du.lambda * cg.ad).norm(),
               (du.lambda * cg.ad).norm());
    }
    // Measure relation: the u-slot density reproduces the q-increment gap.
    {
      const Vec gap = h * ((du.qu[static_cast<size_t>(j) + 1] - du.qu[static_cast<size_t>(j)]) / h -
                           du.lambda * du.wu[static_cast<size_t>(j)] -
                           2.0 * Xw[static_cast<size_t>(j)] / h * traj.u[static_cast<size_t>(j)]);
      pqrel.take((Gw[static_cast<size_t>(j)] - gap).norm(), Gw[static_cast<size_t>(j)].norm() + 1.0);
    }
    const double eta_scale = du.eta[static_cast<size_t>(j)].cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i) {
      if (c.gval[i] > spec.set.tol_act) {
        etacmp.take(std::abs(du.eta[static_cast<size_t>(j)][i]), eta_scale);
      } else if (du.eta[static_cast<size_t>(j)][i] > 1e-7 * (1.0 + eta_scale)) {
        etaorth.take(std::abs(c.G.row(i).dot(c.psi)), c.psi.norm());
      }
    }
    // Nonatomicity: no measure mass where the constraints are inactive.
    if ((c.gval.array() > spec.set.tol_act).all())
      natg.take(Gw[static_cast<size_t>(j)].norm(), 1.0);
    const double nu = traj.u[static_cast<size_t>(j)].norm();
    if (nu > spec.r1 + 1e-9 * (1.0 + spec.r1) && nu < spec.r2 - 1e-9 * (1.0 + spec.r2))
      natx.take(std::abs(Xw[static_cast<size_t>(j)]), 1.0);
  }
  // Terminal atoms obey nonatomicity as well.
  const Vec y_k = traj.x[static_cast<size_t>(k)] - traj.u[static_cast<size_t>(k)];
  const Vec g_k = spec.set.g(y_k);
  if ((g_k.array() > spec.set.tol_act).all()) natg.take(du.gamma_atom.norm(), 1.0);
  {
    const double nuT = traj.u[static_cast<size_t>(k)].norm();
    if (nuT > spec.r1 + 1e-9 && nuT < spec.r2 - 1e-9)
      natx.take(std::abs(Xw[static_cast<size_t>(k)]), 1.0);
  }

  // Transversality on p(T), with the terminal normal-cone inclusion.
  Entry trx, tru, tra, tnc;
  const Mat G_k = spec.set.grad_g(y_k);
  const Vec eta_term = G_k.transpose() * du.eta[static_cast<size_t>(k)];
  {
    const Vec gphi = cost.phi_gradient(traj.x[static_cast<size_t>(k)]);
    trx.take((du.p_terminal_x() + du.lambda * gphi - eta_term).norm(),
             std::max(du.p_terminal_x().norm(), (du.lambda * gphi).norm()));
    const double xiT = du.xi1[static_cast<size_t>(k)] + du.xi2[static_cast<size_t>(k)];
    const Vec uT = traj.u[static_cast<size_t>(k)];
    tru.take((du.p_terminal_u(uT) - eta_term + 2.0 * xiT * uT).norm(),
             std::max(du.p_terminal_u(uT).norm(), eta_term.norm()));
    tra.take(du.p_terminal_a().norm(), 1.0);
  }
  for (int i = 0; i < m; ++i) {
    tnc.take(std::max(0.0, -du.eta[static_cast<size_t>(k)][i]), 1.0);
    if (g_k[i] > spec.set.tol_act)
      tnc.take(std::abs(du.eta[static_cast<size_t>(k)][i]), 1.0);
  }

  push(rep, "primal-representation", prim, opt);
  push(rep, "adjoint-ode-x", odex, opt);
  push(rep, "adjoint-ode-u", odeu, opt);
  push(rep, "adjoint-ode-a", odea, opt);
  push(rep, "qu-velocity-gradient", quv, opt);
  push(rep, "qa-velocity-subgradient", qav, opt);
  push(rep, "pq-measure-relation", pqrel, opt);
  push(rep, "eta-complementarity", etacmp, opt);
  push(rep, "eta-orthogonality", etaorth, opt);
  push(rep, "transversality-x", trx, opt);
  push(rep, "transversality-u", tru, opt);
  push(rep, "transversality-a", tra, opt);
  push(rep, "terminal-normal-cone", tnc, opt);
  push(rep, "nonatomicity-gamma", natg, opt);
  push(rep, "nonatomicity-xi", natx, opt);

  rep.nontriviality_value = nontriviality(du, traj, NontrivialityMode::General);
  push_flag(rep, "nontriviality", rep.nontriviality_value > opt.tol_nontrivial);

  const Vec g0 = spec.set.g(traj.x[0] - traj.u[0]);
  if ((g0.array() > spec.set.tol_act).all())
    push_flag(rep, "enhanced-nontriviality-initial",
              nontriviality(du, traj, NontrivialityMode::EnhancedInitial) > opt.tol_nontrivial);
  const double nuT = traj.u[static_cast<size_t>(k)].norm();
  if ((g_k.array() > spec.set.tol_act).all() && nuT > spec.r1 + 1e-9 && nuT < spec.r2 - 1e-9)
    push_flag(rep, "enhanced-nontriviality-terminal",
              nontriviality(du, traj, NontrivialityMode::EnhancedTerminal) > opt.tol_nontrivial);

  rep.overall = true;
  for (const auto& e : rep.entries) rep.overall = rep.overall && e.pass;
  return rep;
}

DualSystem reconstruct_duals(const DiscreteTrajectory& traj, const DiscreteProblem& pb,
                             double lambda, const CheckOptions& opt) {
  const int k = traj.k, n = pb.spec.n, d = pb.spec.d, m = pb.spec.set.m;
  const double h = pb.h;
  if (k < 2) throw InvalidArgument("reconstruct_duals: need k >= 2");

  DualSystem du;
  du.lambda = lambda;
  du.qx.assign(static_cast<size_t>(k) + 1, Vec::Zero(n));
  du.qu.assign(static_cast<size_t>(k) + 1, Vec::Zero(n));
  du.qa.assign(static_cast<size_t>(k) + 1, Vec::Zero(d));
  du.eta.assign(static_cast<size_t>(k) + 1, Vec::Zero(m));
  du.gamma.assign(static_cast<size_t>(k), Vec::Zero(m));
  du.xi1.assign(static_cast<size_t>(k) + 1, 0.0);
  du.xi2.assign(static_cast<size_t>(k) + 1, 0.0);
  du.gamma_atom = Vec::Zero(n);

  // Normal-cone multipliers along the trajectory.
  for (int j = 0; j < k; ++j) {
    if (static_cast<int>(traj.eta.size()) == k && traj.eta[static_cast<size_t>(j)].size() == m) {
      du.eta[static_cast<size_t>(j)] = traj.eta[static_cast<size_t>(j)];
    } else {
      const Vec dx = (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h;
      du.eta[static_cast<size_t>(j)] =
          recover_eta(pb.spec, traj.x[static_cast<size_t>(j)], traj.u[static_cast<size_t>(j)], dx,
                      traj.a[static_cast<size_t>(j)]);
    }
  }

  // Running-cost subgradients and averaged deviations.
  du.wx.assign(static_cast<size_t>(k), Vec::Zero(n));
  du.wu.assign(static_cast<size_t>(k), Vec::Zero(n));
  du.wa.assign(static_cast<size_t>(k), Vec::Zero(d));
  du.vx.assign(static_cast<size_t>(k), Vec::Zero(n));
  du.vu.assign(static_cast<size_t>(k), Vec::Zero(n));
  du.va.assign(static_cast<size_t>(k), Vec::Zero(d));
  const AveragedDeviations th = averaged_deviations(pb, traj);
  du.thx = th.x;
  du.thu = th.u;
  du.tha = th.a;
  for (int j = 0; j < k; ++j) {
    const Vec dx = (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h;
    const Vec dvu = (traj.u[static_cast<size_t>(j) + 1] - traj.u[static_cast<size_t>(j)]) / h;
    const Vec dva = (traj.a[static_cast<size_t>(j) + 1] - traj.a[static_cast<size_t>(j)]) / h;
    const CostGrad cg =
        pb.cost.ell_gradient(traj.t(j), traj.x[static_cast<size_t>(j)],
                             traj.u[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)], dx,
                             dvu, dva);
    du.wx[static_cast<size_t>(j)] = cg.x;
    du.wu[static_cast<size_t>(j)] = cg.u;
    du.wa[static_cast<size_t>(j)] = cg.a;
    du.vx[static_cast<size_t>(j)] = cg.xd;
    du.vu[static_cast<size_t>(j)] = cg.ud;
    du.va[static_cast<size_t>(j)] = cg.ad;
  }

  // Velocity-slot couplings pin the u/a adjoints at nodes 1..k.
  for (int j = 0; j < k; ++j) {
    du.qu[static_cast<size_t>(j) + 1] =
        lambda * (du.vu[static_cast<size_t>(j)] + du.thu[static_cast<size_t>(j)] / h);
    du.qa[static_cast<size_t>(j) + 1] =
        lambda * (du.va[static_cast<size_t>(j)] + du.tha[static_cast<size_t>(j)] / h);
  }

  // ---- Terminal block: state adjoint anchor, terminal multiplier, atoms ----
  const Vec y_k = traj.x[static_cast<size_t>(k)] - traj.u[static_cast<size_t>(k)];
  const Vec g_k = pb.spec.set.g(y_k);
  const Mat G_k = pb.spec.set.grad_g(y_k);
  const Vec uT = traj.u[static_cast<size_t>(k)];
  const double rlo = pb.spec.r1 - pb.epsilon_k;
  const double rhi = pb.spec.r2 + pb.epsilon_k;
  const double gate = 1e-6 * (1.0 + rhi);
  const bool xi1_on = uT.norm() >= rhi - gate;
  const bool xi2_on = uT.norm() <= rlo + gate;

  std::vector<int> actT;
  for (int i = 0; i < m; ++i)
    if (g_k[i] <= pb.spec.set.tol_act) actT.push_back(i);

  const Vec sx_last = lambda * (du.vx[static_cast<size_t>(k) - 1] +
                                du.thx[static_cast<size_t>(k) - 1] / h);
  const Mat JaT = jac_f_a(pb.spec, traj.x[static_cast<size_t>(k) - 1],
                          traj.a[static_cast<size_t>(k) - 1]);
  const Vec gphiT = pb.cost.phi_gradient(traj.x[static_cast<size_t>(k)]);

  std::vector<int> orth_rows;  // active indices carried by eta_{k-1}
  {
    const Vec& e_last = du.eta[static_cast<size_t>(k) - 1];
    const double es = e_last.cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i)
      if (e_last[i] > 1e-7 * (1.0 + es)) orth_rows.push_back(i);
  }
  const Vec y_last = traj.x[static_cast<size_t>(k) - 1] - traj.u[static_cast<size_t>(k) - 1];
  const Mat G_last = pb.spec.set.grad_g(y_last);

  const int rows = d + n + static_cast<int>(orth_rows.size());
  const int nsig = static_cast<int>(actT.size()) + (xi1_on ? 1 : 0) + (xi2_on ? 1 : 0);
  Mat F(rows, n);
  Mat S(rows, nsig);
  Vec r(rows);
  F.setZero();
  S.setZero();
  r.setZero();

  // Perturbation-adjoint equation at the last step anchors the state adjoint.
  F.topRows(d) = JaT.transpose();
  r.head(d) = (du.qa[static_cast<size_t>(k)] - du.qa[static_cast<size_t>(k) - 1]) / h -
              lambda * du.wa[static_cast<size_t>(k) - 1] + JaT.transpose() * sx_last;
  // Combined transversality of the state and set-control lines.
  F.block(d, 0, n, n) = Mat::Identity(n, n);
  r.segment(d, n) = -du.qu[static_cast<size_t>(k)] - lambda * gphiT;
  int col = 0;
  for (int i : actT) {
    S.block(d, col, n, 1) = -2.0 * G_k.row(i).transpose();
    ++col;
  }
  if (xi1_on) {
    S.block(d, col, n, 1) = 4.0 * uT;
    ++col;
  }
  if (xi2_on) {
    S.block(d, col, n, 1) = -4.0 * uT;
    ++col;
  }
  // Orthogonality of the active gradients to the last coderivative argument.
  for (size_t t = 0; t < orth_rows.size(); ++t) {
    F.row(d + n + static_cast<int>(t)) = G_last.row(orth_rows[t]);
    r[d + n + static_cast<int>(t)] = G_last.row(orth_rows[t]).dot(sx_last);
  }

  SemiNnlsResult term = semi_nnls(F, S, r);
  du.qx[static_cast<size_t>(k)] = term.y;
  col = 0;
  for (int i : actT) du.eta[static_cast<size_t>(k)][i] = term.s[col++];
  if (xi1_on) du.xi1[static_cast<size_t>(k)] = term.s[col++];
  if (xi2_on) du.xi2[static_cast<size_t>(k)] = -term.s[col++];
  du.gamma_atom = du.qx[static_cast<size_t>(k)] + lambda * gphiT -
                  G_k.transpose() * du.eta[static_cast<size_t>(k)];

  // ---- Backward sweep ----
  const auto hess_all = [&](int j, const Vec& y) {
    const auto H = pb.spec.set.hess_g(y);
    Mat Hl = Mat::Zero(n, n);
    for (int i = 0; i < m; ++i)
      if (du.eta[static_cast<size_t>(j)][i] != 0.0) Hl += du.eta[static_cast<size_t>(j)][i] * H[static_cast<size_t>(i)];
    return Hl;
  };

  for (int j = k - 1; j >= 0; --j) {
    const Vec y_j = traj.x[static_cast<size_t>(j)] - traj.u[static_cast<size_t>(j)];
    const Vec g_j = pb.spec.set.g(y_j);
    const Mat G_j = pb.spec.set.grad_g(y_j);
    const Mat Hl = hess_all(j, y_j);
    const Vec psi = du.qx[static_cast<size_t>(j) + 1] -
                    lambda * (du.vx[static_cast<size_t>(j)] + du.thx[static_cast<size_t>(j)] / h);
    const Vec hess_term = Hl * psi;
    const Vec& u_j = traj.u[static_cast<size_t>(j)];
    const double nu = u_j.norm();
    const bool x1_on = nu >= rhi - gate;
    const bool x2_on = nu <= rlo + gate;

    if (j >= 1) {
      // Fit the coderivative multipliers and xi densities from the u-equation
      // subject to the sign tags at the argument psi.
      std::vector<int> free_cols, nn_cols;
      for (int i = 0; i < m; ++i) {
        if (g_j[i] > pb.spec.set.tol_act) continue;  // gamma forced to zero
        const double es = du.eta[static_cast<size_t>(j)].cwiseAbs().maxCoeff();
        if (du.eta[static_cast<size_t>(j)][i] > 1e-7 * (1.0 + es)) {
          free_cols.push_back(i);
          continue;
        }
        const double s = G_j.row(i).dot(psi);
        const double dirtol = 1e-9 * (1.0 + psi.norm());
        if (s > dirtol) continue;          // tag: gamma = 0
        if (s < -dirtol) nn_cols.push_back(i);  // tag: gamma >= 0
        else free_cols.push_back(i);
      }
      const Vec target = (du.qu[static_cast<size_t>(j) + 1] - du.qu[static_cast<size_t>(j)]) / h -
                         lambda * du.wu[static_cast<size_t>(j)] - hess_term;
      Mat Fm(n, static_cast<int>(free_cols.size()));
      for (size_t t = 0; t < free_cols.size(); ++t)
        Fm.col(static_cast<int>(t)) = G_j.row(free_cols[t]).transpose();
      const int nsg = static_cast<int>(nn_cols.size()) + (x1_on ? 1 : 0) + (x2_on ? 1 : 0);
      Mat Sm(n, nsg);
      int cc = 0;
      for (int i : nn_cols) Sm.col(cc++) = G_j.row(i).transpose();
      if (x1_on) Sm.col(cc++) = 2.0 * u_j;
      if (x2_on) Sm.col(cc++) = -2.0 * u_j;
      SemiNnlsResult fit = semi_nnls(Fm, Sm, target);
      Vec gam = Vec::Zero(m);
      for (size_t t = 0; t < free_cols.size(); ++t) gam[free_cols[t]] = fit.y[static_cast<int>(t)];
      cc = 0;
      for (int i : nn_cols) gam[i] = fit.s[cc++];
      du.gamma[static_cast<size_t>(j)] = gam;
      if (x1_on) du.xi1[static_cast<size_t>(j)] = fit.s[cc++];
      if (x2_on) du.xi2[static_cast<size_t>(j)] = -fit.s[cc++];
    } else {
      // Initial node: the u-adjoint start value absorbs the equation; the
      // multipliers take their minimum-norm (zero) selection.
      du.gamma[0] = Vec::Zero(m);
      du.qu[0] = du.qu[1] - h * (lambda * du.wu[0] + hess_term + G_j.transpose() * du.gamma[0]);
      du.qa[0] = du.qa[1] -
                 h * (lambda * du.wa[0] +
                      jac_f_a(pb.spec, traj.x[0], traj.a[0]).transpose() * psi);
    }

    du.qx[static_cast<size_t>(j)] =
        du.qx[static_cast<size_t>(j) + 1] -
        h * (lambda * du.wx[static_cast<size_t>(j)] +
             jac_f_x(pb.spec, traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]).transpose() * psi -
             hess_term - G_j.transpose() * du.gamma[static_cast<size_t>(j)]);
  }

  // Consistency gate: the equation families must close within a loose factor
  // of the check tolerance, otherwise the backward system is inconsistent.
  ConditionReport rep = check_discrete(traj, du, pb, opt);
  double eqres = 0.0;
  for (const auto& e : rep.entries)
    if (e.name.rfind("adjoint", 0) == 0 || e.name.rfind("coupling", 0) == 0 ||
        e.name.rfind("transversality", 0) == 0)
      eqres = std::max(eqres, e.residual);
  if (eqres > 1e-3 * (1.0 + std::abs(lambda))) {
    std::string msg = "reconstruct_duals: backward system inconsistent; residual profile:\n";
    msg += rep.to_text();
    throw NumericalFailure(msg);
  }
  return du;
}

}  // namespace sweep
