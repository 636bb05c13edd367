#include "sweep/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sweep/nnls.hpp"

namespace sweep {

void ProcessSpec::validate() const {
  set.validate();
  if (n != set.n) throw InvalidArgument("ProcessSpec: state dimension must match the set");
  if (d <= 0) throw InvalidArgument("ProcessSpec: control dimension must be positive");
  if (!(horizon > 0.0)) throw InvalidArgument("ProcessSpec: horizon must be positive");
  if (x0.size() != n) throw InvalidArgument("ProcessSpec: x0 dimension mismatch");
  if (!(r1 > 0.0) || r1 > r2) throw InvalidArgument("ProcessSpec: need 0 < r1 <= r2");
  if (!f) throw InvalidArgument("ProcessSpec: missing perturbation evaluator");
}

namespace {
Vec pw_linear(const std::vector<Vec>& nodes, double horizon, double t) {
  const int k = static_cast<int>(nodes.size()) - 1;
  const double h = horizon / k;
  if (t <= 0.0) return nodes.front();
  if (t >= horizon) return nodes.back();
  const int j = std::min(static_cast<int>(t / h), k - 1);
  const double s = (t - j * h) / h;
  return (1.0 - s) * nodes[static_cast<size_t>(j)] + s * nodes[static_cast<size_t>(j) + 1];
}
}  // namespace

Vec DiscreteTrajectory::eval_x(double tt) const { return pw_linear(x, horizon, tt); }
Vec DiscreteTrajectory::eval_u(double tt) const { return pw_linear(u, horizon, tt); }
Vec DiscreteTrajectory::eval_a(double tt) const { return pw_linear(a, horizon, tt); }

std::pair<Vec, Vec> step_catching_up(const ProcessSpec& spec, const Vec& x_j, const Vec& u_next,
                                     const Vec& a_j, double h) {
  if (!(h > 0.0)) throw InvalidArgument("step_catching_up: h must be positive");
  const Vec drift = x_j - h * spec.f(x_j, a_j);
  ProjectionResult pr = project(spec.set, drift - u_next);
  Vec x_next = u_next + pr.point;
  Vec eta = pr.multipliers / h;
  return {x_next, eta};
}

Vec step_explicit(const ProcessSpec& spec, const Vec& x_j, const Vec& u_j, const Vec& a_j,
                  const Vec& eta_j, double h) {
  if (eta_j.size() != spec.set.m) throw InvalidArgument("step_explicit: eta size mismatch");
  if ((eta_j.array() < -1e-12).any()) throw InvalidArgument("step_explicit: eta must be >= 0");
  const Vec y = x_j - u_j;
  const ActiveIndexSet act = active_set(spec.set, y, 0.0);
  for (int i = 0; i < spec.set.m; ++i)
    if (eta_j[i] > 1e-12 && !act.contains(i))
      throw InvalidArgument("step_explicit: eta supported outside the active set");
  const Mat G = spec.set.grad_g(y);
  const Vec velocity = -(G.transpose() * eta_j) + spec.f(x_j, a_j);
  return x_j - h * velocity;
}

DiscreteTrajectory integrate(const ProcessSpec& spec, const std::vector<Vec>& u_path,
                             const std::vector<Vec>& a_path, int k) {
  spec.validate();
  if (static_cast<int>(u_path.size()) != k + 1 || static_cast<int>(a_path.size()) != k + 1)
    throw InvalidArgument("integrate: control paths need k+1 entries");
  if (!membership(spec.set, spec.x0 - u_path[0], spec.set.tol_act))
    throw PreconditionViolation("integrate: x0 - u(0) is not in the set");
  const double norm_tol = 1e-9;
  for (int j = 0; j <= k; ++j) {
    const double nu = u_path[static_cast<size_t>(j)].norm();
    if (nu < spec.r1 - norm_tol || nu > spec.r2 + norm_tol)
      throw PreconditionViolation("integrate: control norm bounds violated");
  }

  DiscreteTrajectory traj;
  traj.horizon = spec.horizon;
  traj.k = k;
  traj.u = u_path;
  traj.a = a_path;
  traj.x.resize(static_cast<size_t>(k) + 1);
  traj.eta.resize(static_cast<size_t>(k));
  traj.x[0] = spec.x0;

  const double h = spec.horizon / k;
  double du_sum = 0.0;
  for (int j = 0; j < k; ++j)
    du_sum += (u_path[static_cast<size_t>(j) + 1] - u_path[static_cast<size_t>(j)]).norm();

  // A-priori state bound; astronomically loose for stiff growth constants, so
  // clamp the exponential instead of overflowing.
  const double expo = 2.0 * spec.growth_m * spec.horizon;
  const double grow = expo > 700.0 ? std::numeric_limits<double>::infinity() : std::exp(expo);
  traj.state_bound =
      spec.x0.norm() + grow * (2.0 * spec.growth_m * spec.horizon * (1.0 + spec.x0.norm()) + du_sum);

  for (int j = 0; j < k; ++j) {
    auto [xn, eta] = step_catching_up(spec, traj.x[static_cast<size_t>(j)],
                                      u_path[static_cast<size_t>(j) + 1],
                                      a_path[static_cast<size_t>(j)], h);
    traj.x[static_cast<size_t>(j) + 1] = xn;
    traj.eta[static_cast<size_t>(j)] = eta;
    if (xn.norm() > traj.state_bound)
      throw NumericalFailure("integrate: state exceeded the a-priori bound");
  }
  return traj;
}

Vec recover_eta(const ProcessSpec& spec, const Vec& x, const Vec& u, const Vec& xdot,
                const Vec& a) {
  const Vec y = x - u;
  if (!membership(spec.set, y, spec.set.tol_act))
    throw PreconditionViolation("recover_eta: x - u is not in the set");
  const Vec fv = spec.f(x, a);
  const Vec rhs = xdot + fv;

  const ActiveIndexSet irho = active_set(spec.set, y, spec.set.rho);
  Vec eta = Vec::Zero(spec.set.m);
  double residual = rhs.norm();
  if (!irho.indices.empty()) {
    const Mat G = spec.set.grad_g(y);
    Mat A(spec.n, static_cast<int>(irho.indices.size()));
    for (size_t t = 0; t < irho.indices.size(); ++t)
      A.col(static_cast<int>(t)) = G.row(irho.indices[t]).transpose();
    NnlsResult nn = nnls(A, rhs);
    for (size_t t = 0; t < irho.indices.size(); ++t) eta[irho.indices[t]] = nn.x[static_cast<int>(t)];
    residual = nn.residual;
  }

  const double tol = spec.tol_dyn_rel * (1.0 + fv.norm());
  if (residual > tol)
    throw NumericalFailure("recover_eta: velocity is not realizable in the normal cone (residual " +
                           std::to_string(residual) + ")");
  const double bound = (spec.set.beta / spec.set.m1) * (xdot.norm() + fv.norm()) + tol;
  for (int i = 0; i < spec.set.m; ++i)
    if (eta[i] > bound)
      throw NumericalFailure("recover_eta: multiplier exceeds the admissible bound");
  return eta;
}

namespace {
double w12_between(const DiscreteTrajectory& ta, const std::function<Vec(double)>& zb,
                   const std::function<Vec(double)>& zbdot) {
  const int k = ta.k;
  const double h = ta.h();
  double sup = 0.0;
  auto za = [&](int j) {
    Vec z(ta.x[0].size() + ta.u[0].size() + ta.a[0].size());
    z << ta.x[static_cast<size_t>(j)], ta.u[static_cast<size_t>(j)], ta.a[static_cast<size_t>(j)];
    return z;
  };
  for (int j = 0; j <= k; ++j) sup = std::max(sup, (za(j) - zb(ta.t(j))).norm());
  // Two-point Gauss quadrature of the squared derivative gap per interval.
  const double c1 = 0.5 - std::sqrt(3.0) / 6.0, c2 = 0.5 + std::sqrt(3.0) / 6.0;
  double acc = 0.0;
  for (int j = 0; j < k; ++j) {
    Vec dz = (za(j + 1) - za(j)) / h;
    const double t0 = ta.t(j);
    acc += 0.5 * h * ((dz - zbdot(t0 + c1 * h)).squaredNorm() + (dz - zbdot(t0 + c2 * h)).squaredNorm());
  }
  return sup + std::sqrt(acc);
}
}  // namespace

double w12_distance(const DiscreteTrajectory& ta, const DiscreteTrajectory& tb) {
  if (std::abs(ta.horizon - tb.horizon) > 1e-12)
    throw InvalidArgument("w12_distance: horizon mismatch");
  auto zb = [&tb](double t) {
    Vec z(tb.x[0].size() + tb.u[0].size() + tb.a[0].size());
    z << tb.eval_x(t), tb.eval_u(t), tb.eval_a(t);
    return z;
  };
  const double hb = tb.h();
  auto zbdot = [&tb, hb](double t) {
    const int j = std::min(std::max(0, static_cast<int>(t / hb)), tb.k - 1);
    Vec z(tb.x[0].size() + tb.u[0].size() + tb.a[0].size());
    z << (tb.x[static_cast<size_t>(j) + 1] - tb.x[static_cast<size_t>(j)]) / hb,
        (tb.u[static_cast<size_t>(j) + 1] - tb.u[static_cast<size_t>(j)]) / hb,
        (tb.a[static_cast<size_t>(j) + 1] - tb.a[static_cast<size_t>(j)]) / hb;
    return z;
  };
  return w12_between(ta, zb, zbdot);
}

double w12_distance(const DiscreteTrajectory& ta, const ReferencePath& ref) {
  auto zb = [&ref](double t) {
    Vec xx = ref.x(t), uu = ref.u(t), aa = ref.a(t);
    Vec z(xx.size() + uu.size() + aa.size());
    z << xx, uu, aa;
    return z;
  };
  auto zbdot = [&ref](double t) {
    Vec xx = ref.xdot(t), uu = ref.udot(t), aa = ref.adot(t);
    Vec z(xx.size() + uu.size() + aa.size());
    z << xx, uu, aa;
    return z;
  };
  return w12_between(ta, zb, zbdot);
}

std::string trajectory_csv(const DiscreteTrajectory& traj) {
  const int n = static_cast<int>(traj.x[0].size());
  const int nu = static_cast<int>(traj.u[0].size());
  const int d = static_cast<int>(traj.a[0].size());
  const int m = traj.eta.empty() ? 0 : static_cast<int>(traj.eta[0].size());

  std::string out = "t";
  char buf[64];
  for (int i = 0; i < n; ++i) { std::snprintf(buf, sizeof buf, ",x%d", i); out += buf; }
  for (int i = 0; i < nu; ++i) { std::snprintf(buf, sizeof buf, ",u%d", i); out += buf; }
  for (int i = 0; i < d; ++i) { std::snprintf(buf, sizeof buf, ",a%d", i); out += buf; }
  for (int i = 0; i < m; ++i) { std::snprintf(buf, sizeof buf, ",eta%d", i); out += buf; }
  out += "\n";

  auto put = [&out, &buf](double v) {
    std::snprintf(buf, sizeof buf, ",%.12g", v);
    out += buf;
  };
  for (int j = 0; j <= traj.k; ++j) {
    std::snprintf(buf, sizeof buf, "%.12g", traj.t(j));
    out += buf;
    for (int i = 0; i < n; ++i) put(traj.x[static_cast<size_t>(j)][i]);
    for (int i = 0; i < nu; ++i) put(traj.u[static_cast<size_t>(j)][i]);
    for (int i = 0; i < d; ++i) put(traj.a[static_cast<size_t>(j)][i]);
    for (int i = 0; i < m; ++i) {
      const double v = (j < traj.k) ? traj.eta[static_cast<size_t>(j)][i]
                                    : traj.eta[static_cast<size_t>(traj.k) - 1][i];
      put(v);
    }
    out += "\n";
  }
  return out;
}

namespace detail {

DiscreteTrajectory feasible_approximation(const ProcessSpec& spec, const ReferencePath& ref,
                                          int k) {
  DiscreteTrajectory traj;
  traj.horizon = spec.horizon;
  traj.k = k;
  traj.x.resize(static_cast<size_t>(k) + 1);
  traj.u.resize(static_cast<size_t>(k) + 1);
  traj.a.resize(static_cast<size_t>(k) + 1);
  traj.eta.resize(static_cast<size_t>(k));
  const double h = spec.horizon / k;

  traj.x[0] = spec.x0;
  traj.u[0] = ref.u(0.0);
  for (int j = 0; j <= k; ++j) traj.a[static_cast<size_t>(j)] = ref.a(traj.t(j));

  for (int j = 0; j < k; ++j) {
    const double tj = traj.t(j);
    // Carry the state mismatch into the set-control so x - u tracks the
    // reference contact geometry exactly.
    traj.u[static_cast<size_t>(j)] =
        traj.x[static_cast<size_t>(j)] - ref.x(tj) + ref.u(tj);
    const Vec y = traj.x[static_cast<size_t>(j)] - traj.u[static_cast<size_t>(j)];
    // Select the velocity in F(z_j) nearest to the reference velocity:
    // -xdot = -sum eta grad g + f with eta >= 0 on the active set.
    const Vec target = -ref.xdot(tj) - spec.f(traj.x[static_cast<size_t>(j)], traj.a[static_cast<size_t>(j)]);
    const ActiveIndexSet act = active_set(spec.set, y, 0.0);
    Vec eta = Vec::Zero(spec.set.m);
    if (!act.indices.empty()) {
      const Mat G = spec.set.grad_g(y);
      Mat A(spec.n, static_cast<int>(act.indices.size()));
      for (size_t t = 0; t < act.indices.size(); ++t)
        A.col(static_cast<int>(t)) = -G.row(act.indices[t]).transpose();
      NnlsResult nn = nnls(A, target);
      for (size_t t = 0; t < act.indices.size(); ++t) eta[act.indices[t]] = nn.x[static_cast<int>(t)];
    }
    traj.eta[static_cast<size_t>(j)] = eta;
    traj.x[static_cast<size_t>(j) + 1] =
        step_explicit(spec, traj.x[static_cast<size_t>(j)], traj.u[static_cast<size_t>(j)],
                      traj.a[static_cast<size_t>(j)], eta, h);
  }
  traj.u[static_cast<size_t>(k)] =
      traj.x[static_cast<size_t>(k)] - ref.x(spec.horizon) + ref.u(spec.horizon);
  return traj;
}

}  // namespace detail

}  // namespace sweep
