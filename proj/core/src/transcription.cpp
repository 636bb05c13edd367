#include "sweep/transcription.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "sweep/lbfgs.hpp"

namespace sweep {

namespace {
constexpr double kGauss1 = 0.5 - 0.28867513459481287;  // two-point Gauss nodes on [0,1]
constexpr double kGauss2 = 0.5 + 0.28867513459481287;

Vec fd_vec_grad(const std::function<double(const Vec&)>& f, const Vec& at, double step) {
  Vec g(at.size());
  const double f0 = f(at);
  Vec x = at;
  for (int i = 0; i < at.size(); ++i) {
    const double d = step * (1.0 + std::abs(at[i]));
    x[i] = at[i] + d;
    g[i] = (f(x) - f0) / d;
    x[i] = at[i];
  }
  return g;
}
}  // namespace

Vec CostSpec::phi_gradient(const Vec& x) const {
  if (grad_phi) return grad_phi(x);
  return fd_vec_grad(phi, x, 1e-7);
}

CostGrad CostSpec::ell_gradient(double t, const Vec& x, const Vec& u, const Vec& a, const Vec& xd,
                                const Vec& ud, const Vec& ad) const {
  if (grad_ell) return grad_ell(t, x, u, a, xd, ud, ad);
  CostGrad g;
  auto wrap = [&](int slot) {
    return [&, slot](const Vec& v) {
      switch (slot) {
        case 0: return ell(t, v, u, a, xd, ud, ad);
        case 1: return ell(t, x, v, a, xd, ud, ad);
        case 2: return ell(t, x, u, v, xd, ud, ad);
        case 3: return ell(t, x, u, a, v, ud, ad);
        case 4: return ell(t, x, u, a, xd, v, ad);
        default: return ell(t, x, u, a, xd, ud, v);
      }
    };
  };
  g.x = fd_vec_grad(wrap(0), x, 1e-7);
  g.u = fd_vec_grad(wrap(1), u, 1e-7);
  g.a = fd_vec_grad(wrap(2), a, 1e-7);
  g.xd = fd_vec_grad(wrap(3), xd, 1e-7);
  g.ud = fd_vec_grad(wrap(4), ud, 1e-7);
  g.ad = fd_vec_grad(wrap(5), ad, 1e-7);
  return g;
}

DiscreteProblem build_pk(const ProcessSpec& spec, const CostSpec& cost, int k,
                         const std::optional<ReferencePath>& reference, double epsilon_loc,
                         double mu, double epsilon_k) {
  if (k < 2) throw InvalidArgument("build_pk: need k >= 2 for the variation constraints");
  DiscreteProblem pb;
  pb.spec = spec;
  pb.cost = cost;
  pb.k = k;
  pb.h = spec.horizon / k;
  pb.epsilon_k = epsilon_k;
  pb.epsilon_loc = epsilon_loc;
  pb.plain_mode = !reference.has_value();
  if (reference) {
    const Vec y0 = spec.x0 - reference->u(0.0);
    if (!membership(spec.set, y0, spec.set.tol_act))
      throw PreconditionViolation("build_pk: reference initial pair is infeasible");
    pb.reference = reference;
    const double K = spec.lipschitz_k, T = spec.horizon;
    const double eK = std::exp(std::min(K, 700.0));
    pb.mu_tilde = std::max(3.0 * mu * (1.0 + 4.0 * K * T) * eK, 4.0 * mu * (eK + 1.0));
  }
  return pb;
}

namespace {

double reference_prox_terms(const DiscreteProblem& pb, const DiscreteTrajectory& traj) {
  if (pb.plain_mode) return 0.0;
  const auto& ref = *pb.reference;
  const double h = pb.h;
  double prox = 0.0;
  for (int j = 0; j < pb.k; ++j) {
    const Vec dx = (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h;
    const Vec du = (traj.u[static_cast<size_t>(j) + 1] - traj.u[static_cast<size_t>(j)]) / h;
    const Vec da = (traj.a[static_cast<size_t>(j) + 1] - traj.a[static_cast<size_t>(j)]) / h;
    const double t0 = traj.t(j);
    for (double c : {kGauss1, kGauss2}) {
      const double tt = t0 + c * h;
      prox += 0.5 * h *
              ((dx - ref.xdot(tt)).squaredNorm() + (du - ref.udot(tt)).squaredNorm() +
               (da - ref.adot(tt)).squaredNorm());
    }
  }
  // Squared-distance penalties on the first step of du and the total
  // variation of du against the budget mu_tilde.
  const double first = (traj.u[1] - traj.u[0]).norm() / h;
  double var = 0.0;
  for (int j = 0; j + 2 <= pb.k; ++j)
    var += (traj.u[static_cast<size_t>(j) + 2] - 2.0 * traj.u[static_cast<size_t>(j) + 1] +
            traj.u[static_cast<size_t>(j)])
               .norm() /
           h;
  const double d1 = std::max(0.0, first - pb.mu_tilde);
  const double d2 = std::max(0.0, var - pb.mu_tilde);
  return prox + d1 * d1 + d2 * d2;
}

}  // namespace

double evaluate_cost(const DiscreteProblem& pb, const DiscreteTrajectory& traj) {
  if (traj.k != pb.k) throw InvalidArgument("evaluate_cost: grid mismatch");
  if (static_cast<int>(traj.x[0].size()) != pb.spec.n ||
      static_cast<int>(traj.a[0].size()) != pb.spec.d)
    throw InvalidArgument("evaluate_cost: dimension mismatch");
  const double h = pb.h;
  double J = pb.cost.phi(traj.x[static_cast<size_t>(pb.k)]);
  for (int j = 0; j < pb.k; ++j) {
    const Vec dx = (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h;
    const Vec du = (traj.u[static_cast<size_t>(j) + 1] - traj.u[static_cast<size_t>(j)]) / h;
    const Vec da = (traj.a[static_cast<size_t>(j) + 1] - traj.a[static_cast<size_t>(j)]) / h;
    J += h * pb.cost.ell(traj.t(j), traj.x[static_cast<size_t>(j)], traj.u[static_cast<size_t>(j)],
                         traj.a[static_cast<size_t>(j)], dx, du, da);
  }
  return J + reference_prox_terms(pb, traj);
}

AveragedDeviations averaged_deviations(const DiscreteProblem& pb, const DiscreteTrajectory& traj) {
  AveragedDeviations th;
  th.x.assign(static_cast<size_t>(pb.k), Vec::Zero(pb.spec.n));
  th.u.assign(static_cast<size_t>(pb.k), Vec::Zero(pb.spec.n));
  th.a.assign(static_cast<size_t>(pb.k), Vec::Zero(pb.spec.d));
  if (pb.plain_mode) return th;
  const auto& ref = *pb.reference;
  const double h = pb.h;
  for (int j = 0; j < pb.k; ++j) {
    const Vec dx = (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h;
    const Vec du = (traj.u[static_cast<size_t>(j) + 1] - traj.u[static_cast<size_t>(j)]) / h;
    const Vec da = (traj.a[static_cast<size_t>(j) + 1] - traj.a[static_cast<size_t>(j)]) / h;
    Vec ax = Vec::Zero(pb.spec.n), au = Vec::Zero(pb.spec.n), aa = Vec::Zero(pb.spec.d);
    const double t0 = traj.t(j);
    for (double c : {kGauss1, kGauss2}) {
      const double tt = t0 + c * h;
      ax += 0.5 * h * (dx - ref.xdot(tt));
      au += 0.5 * h * (du - ref.udot(tt));
      aa += 0.5 * h * (da - ref.adot(tt));
    }
    th.x[static_cast<size_t>(j)] = 2.0 * ax;
    th.u[static_cast<size_t>(j)] = 2.0 * au;
    th.a[static_cast<size_t>(j)] = 2.0 * aa;
  }
  return th;
}

namespace {

// Single-shooting evaluator: decision vector = [u_0..u_k; a_0..a_{k-1}],
// with the initial controls pinned in reference mode.
struct Shooter {
  const DiscreteProblem& pb;
  int k, n, d;
  bool pin_initial;
  Vec u0_pin, a0_pin;

  explicit Shooter(const DiscreteProblem& p) : pb(p), k(p.k), n(p.spec.n), d(p.spec.d) {
    pin_initial = !p.plain_mode;
    if (pin_initial) {
      u0_pin = p.reference->u(0.0);
      a0_pin = p.reference->a(0.0);
    }
  }

  int dim() const {
    const int nu = pin_initial ? k : k + 1;
    const int na = pin_initial ? k - 1 : k;
    return nu * n + na * d;
  }

  void unpack(const Vec& th, std::vector<Vec>& u, std::vector<Vec>& a) const {
    u.assign(static_cast<size_t>(k) + 1, Vec::Zero(n));
    a.assign(static_cast<size_t>(k) + 1, Vec::Zero(d));
    int off = 0;
    const int ju0 = pin_initial ? 1 : 0;
    if (pin_initial) u[0] = u0_pin;
    for (int j = ju0; j <= k; ++j, off += n) u[static_cast<size_t>(j)] = th.segment(off, n);
    const int ja0 = pin_initial ? 1 : 0;
    if (pin_initial) a[0] = a0_pin;
    for (int j = ja0; j <= k - 1; ++j, off += d) a[static_cast<size_t>(j)] = th.segment(off, d);
    a[static_cast<size_t>(k)] = a[static_cast<size_t>(k) - 1];
  }

  Vec pack(const std::vector<Vec>& u, const std::vector<Vec>& a) const {
    Vec th(dim());
    int off = 0;
    for (int j = pin_initial ? 1 : 0; j <= k; ++j, off += n) th.segment(off, n) = u[static_cast<size_t>(j)];
    for (int j = pin_initial ? 1 : 0; j <= k - 1; ++j, off += d) th.segment(off, d) = a[static_cast<size_t>(j)];
    return th;
  }

  DiscreteTrajectory shoot(const std::vector<Vec>& u, const std::vector<Vec>& a) const {
    DiscreteTrajectory traj;
    traj.horizon = pb.spec.horizon;
    traj.k = k;
    traj.u = u;
    traj.a = a;
    traj.x.resize(static_cast<size_t>(k) + 1);
    traj.eta.resize(static_cast<size_t>(k));
    traj.x[0] = pb.spec.x0;
    const double h = pb.h;
    for (int j = 0; j < k; ++j) {
      auto [xn, eta] = step_catching_up(pb.spec, traj.x[static_cast<size_t>(j)],
                                        u[static_cast<size_t>(j) + 1], a[static_cast<size_t>(j)], h);
      traj.x[static_cast<size_t>(j) + 1] = xn;
      traj.eta[static_cast<size_t>(j)] = eta;
    }
    return traj;
  }

  // Inequality constraints c(theta) <= 0 handled by the augmented Lagrangian.
  Vec constraints(const std::vector<Vec>& u, const DiscreteTrajectory& traj) const {
    const double rlo = pb.spec.r1 - pb.epsilon_k;
    const double rhi = pb.spec.r2 + pb.epsilon_k;
    std::vector<double> c;
    for (int j = 0; j <= k; ++j) {
      const double nsq = u[static_cast<size_t>(j)].squaredNorm();
      c.push_back(nsq - rhi * rhi);
      c.push_back(rlo * rlo - nsq);
    }
    // Feasibility of the initial pair (the integrator enforces all later nodes).
    const Vec g0 = pb.spec.set.g(pb.spec.x0 - u[0]);
    for (int i = 0; i < pb.spec.set.m; ++i) c.push_back(-g0[i]);
    if (!pb.plain_mode) {
      const auto& ref = *pb.reference;
      const double rloc = 0.5 * pb.epsilon_loc;
      for (int j = 0; j < k; ++j) {
        const double tt = traj.t(j);
        double sq = (traj.x[static_cast<size_t>(j)] - ref.x(tt)).squaredNorm() +
                    (traj.u[static_cast<size_t>(j)] - ref.u(tt)).squaredNorm() +
                    (traj.a[static_cast<size_t>(j)] - ref.a(tt)).squaredNorm();
        c.push_back(sq - rloc * rloc);
      }
      // Velocity-tracking budget.
      double prox = 0.0;
      const double h = pb.h;
      for (int j = 0; j < k; ++j) {
        const Vec dx = (traj.x[static_cast<size_t>(j) + 1] - traj.x[static_cast<size_t>(j)]) / h;
        const Vec du = (traj.u[static_cast<size_t>(j) + 1] - traj.u[static_cast<size_t>(j)]) / h;
        const Vec da = (traj.a[static_cast<size_t>(j) + 1] - traj.a[static_cast<size_t>(j)]) / h;
        const double t0 = traj.t(j);
        for (double cc : {kGauss1, kGauss2})
          prox += 0.5 * h *
                  ((dx - ref.xdot(t0 + cc * h)).squaredNorm() +
                   (du - ref.udot(t0 + cc * h)).squaredNorm() +
                   (da - ref.adot(t0 + cc * h)).squaredNorm());
      }
      c.push_back(prox - 0.5 * pb.epsilon_loc);
      // Variation bounds on du.
      const double first = (u[1] - u[0]).norm() / pb.h;
      double var = 0.0;
      for (int j = 0; j + 2 <= k; ++j)
        var += (u[static_cast<size_t>(j) + 2] - 2.0 * u[static_cast<size_t>(j) + 1] +
                u[static_cast<size_t>(j)])
                   .norm() /
               pb.h;
      c.push_back(first - (pb.mu_tilde + 1.0));
      c.push_back(var - (pb.mu_tilde + 1.0));
    }
    Vec out(static_cast<int>(c.size()));
    for (size_t i = 0; i < c.size(); ++i) out[static_cast<int>(i)] = c[i];
    return out;
  }
};

void repair_annulus(std::vector<Vec>& u, double r1, double r2) {
  for (auto& uj : u) {
    double nu = uj.norm();
    if (nu < 1e-14) {
      uj = Vec::Zero(uj.size());
      uj[0] = r1;
      nu = r1;
    }
    if (nu < r1) uj *= r1 / nu;
    else if (nu > r2) uj *= r2 / nu;
  }
}

}  // namespace

SolveResult solve(const DiscreteProblem& pb, const std::vector<Vec>& u_init,
                  const std::vector<Vec>& a_init, const SolverOptions& opt) {
  if (static_cast<int>(u_init.size()) != pb.k + 1 || static_cast<int>(a_init.size()) != pb.k + 1)
    throw InvalidArgument("solve: init paths need k+1 entries");

  Shooter sh(pb);
  std::vector<Vec> u = u_init, a = a_init;
  repair_annulus(u, pb.spec.r1 - pb.epsilon_k, pb.spec.r2 + pb.epsilon_k);
  if (!membership(pb.spec.set, pb.spec.x0 - u[0], pb.spec.set.tol_act)) {
    SolveResult fail;
    fail.status = SolveStatus::Infeasible;
    fail.trajectory = sh.shoot(u, a);
    fail.objective = evaluate_cost(pb, fail.trajectory);
    return fail;
  }

  Vec theta = sh.pack(u, a);
  const int ncon = static_cast<int>(sh.constraints(u, sh.shoot(u, a)).size());
  Vec mult = Vec::Zero(ncon);
  double rho = opt.penalty_initial;

  auto merit = [&](const Vec& th) {
    std::vector<Vec> uu, aa;
    sh.unpack(th, uu, aa);
    DiscreteTrajectory traj = sh.shoot(uu, aa);
    double val = evaluate_cost(pb, traj);
    const Vec c = sh.constraints(uu, traj);
    for (int i = 0; i < c.size(); ++i) {
      const double t = mult[i] + rho * c[i];
      if (t > 0.0) val += (t * t - mult[i] * mult[i]) / (2.0 * rho);
      else val -= mult[i] * mult[i] / (2.0 * rho);
    }
    return val;
  };

  SolveResult res;
  double prev_viol = std::numeric_limits<double>::infinity();
  double prev_merit = std::numeric_limits<double>::infinity();
  int total_iters = 0;
  bool inner_ok = false;

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    LbfgsOptions lopt;
    lopt.max_iter = opt.max_inner;
    lopt.memory = opt.lbfgs_memory;
    lopt.grad_tol = std::max(opt.tol_kkt, 1e-9);
    // Central differences: the trajectory map can be extremely stiff along
    // unstable contact directions, where one-sided differences return pure
    // curvature noise.
    auto grad = [&](const Vec& th, Vec& g) {
      Vec x = th;
      for (int i = 0; i < th.size(); ++i) {
        const double dstep = opt.fd_step * (1.0 + std::abs(th[i]));
        x[i] = th[i] + dstep;
        const double fp = merit(x);
        x[i] = th[i] - dstep;
        const double fm = merit(x);
        g[i] = (fp - fm) / (2.0 * dstep);
        x[i] = th[i];
      }
    };
    LbfgsResult lr = lbfgs_minimize(merit, grad, theta, lopt);
    theta = lr.x;
    total_iters += lr.iterations;
    inner_ok = lr.converged || lr.stalled;
    res.kkt_residual = lr.grad.norm();

    std::vector<Vec> uu, aa;
    sh.unpack(theta, uu, aa);
    DiscreteTrajectory traj = sh.shoot(uu, aa);
    const Vec c = sh.constraints(uu, traj);
    double viol = 0.0;
    for (int i = 0; i < c.size(); ++i) viol = std::max(viol, c[i]);
    viol = std::max(viol, 0.0);
    for (int i = 0; i < c.size(); ++i) mult[i] = std::max(0.0, mult[i] + rho * c[i]);
    res.max_constraint_violation = viol;

    if (viol <= opt.tol_constraint && lr.converged) break;
    // Feasible and no merit progress across outer rounds: stationary within
    // numerical resolution.
    if (viol <= opt.tol_constraint && lr.fval >= prev_merit - 1e-12 * (1.0 + std::abs(prev_merit)))
      break;
    prev_merit = lr.fval;
    if (viol > 0.25 * prev_viol) rho *= opt.penalty_growth;
    prev_viol = viol;
  }

  std::vector<Vec> uu, aa;
  sh.unpack(theta, uu, aa);
  // Snap negligible annulus violations so the checked integrator accepts the
  // result, then report the checked trajectory.
  repair_annulus(uu, pb.spec.r1 - pb.epsilon_k, pb.spec.r2 + pb.epsilon_k);
  res.trajectory = sh.shoot(uu, aa);
  res.objective = evaluate_cost(pb, res.trajectory);
  res.iterations = total_iters;
  res.status = (res.max_constraint_violation <= 10.0 * opt.tol_constraint && inner_ok)
                   ? SolveStatus::Converged
                   : SolveStatus::MaxIter;
  return res;
}

std::vector<ConvergenceRow> convergence_study(const ProcessSpec& spec, const CostSpec& cost,
                                              const std::vector<int>& k_list,
                                              const ReferencePath& reference,
                                              double reference_objective,
                                              const std::vector<Vec>& u_init_nodes,
                                              const std::vector<Vec>& a_init_nodes,
                                              const SolverOptions& options) {
  std::vector<ConvergenceRow> rows(k_list.size());
  int max_threads = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SWEEP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) max_threads = std::min(max_threads, cap);
  }
  max_threads = std::max(1, std::min<int>(max_threads, static_cast<int>(k_list.size())));

  auto run_row = [&](size_t idx) {
    const int k = k_list[idx];
    ConvergenceRow row;
    row.k = k;
    try {
      DiscreteProblem pb = build_pk(spec, cost, k);
      std::vector<Vec> u0(static_cast<size_t>(k) + 1, u_init_nodes[0]);
      std::vector<Vec> a0(static_cast<size_t>(k) + 1, a_init_nodes[0]);
      SolveResult sr = solve(pb, u0, a0, options);
      row.objective = sr.objective;
      row.objective_gap = sr.objective - reference_objective;
      row.w12_to_reference = w12_distance(sr.trajectory, reference);
      row.solved = sr.status == SolveStatus::Converged;
    } catch (const std::exception&) {
      row.solved = false;
    }
    rows[idx] = row;
  };

  if (max_threads == 1) {
    for (size_t i = 0; i < k_list.size(); ++i) run_row(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < max_threads; ++t)
      pool.emplace_back([&] {
        while (true) {
          const size_t i = next.fetch_add(1);
          if (i >= k_list.size()) break;
          run_row(i);
        }
      });
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
  std::string out = "k,w12_distance,objective,objective_gap,solved\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%d\n", r.k, r.w12_to_reference,
                  r.objective, r.objective_gap, r.solved ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace sweep
