#include "sweep/models.hpp"

#include <cmath>

namespace sweep {

DiscreteTrajectory AnalyticSolution::sample(const ProcessSpec& spec, int k) const {
  DiscreteTrajectory traj;
  traj.horizon = spec.horizon;
  traj.k = k;
  traj.x.resize(static_cast<size_t>(k) + 1);
  traj.u.resize(static_cast<size_t>(k) + 1);
  traj.a.resize(static_cast<size_t>(k) + 1);
  traj.eta.resize(static_cast<size_t>(k));
  for (int j = 0; j <= k; ++j) {
    const double t = traj.t(j);
    traj.x[static_cast<size_t>(j)] = path.x(t);
    traj.u[static_cast<size_t>(j)] = path.u(t);
    traj.a[static_cast<size_t>(j)] = path.a(t);
    if (j < k) traj.eta[static_cast<size_t>(j)] = eta(t);
  }
  return traj;
}

namespace {
Vec scalar(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}
}  // namespace

Model builtin_car(CarVariant variant) {
  Model mdl;
  mdl.name = variant == CarVariant::Standard ? "builtin-car" : "builtin-car-heavy";

  const double ell_weight = variant == CarVariant::Standard ? 1.0 : 100.0;
  const double T = 20.0;
  const double speed = 9.0;

  std::vector<ConstraintForm> forms(1);
  forms[0].kind = ConstraintForm::Kind::Affine;
  forms[0].a = scalar(-1.0);
  forms[0].b = 0.0;
  SweepingSet set = make_set(1, forms, 1.0, 1.0, 0.0, 1.0, 1.0);

  ProcessSpec spec;
  spec.set = set;
  spec.n = 1;
  spec.d = 1;
  spec.f = [speed](const Vec&, const Vec& a) { return scalar(speed * a[0]); };
  spec.grad_f_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  spec.grad_f_a = [speed](const Vec&, const Vec&) {
    Mat J(1, 1);
    J(0, 0) = speed;
    return J;
  };
  spec.horizon = T;
  spec.x0 = scalar(-250.0);
  spec.r1 = 1e-3;
  spec.r2 = 50.0;
  spec.lipschitz_k = 0.0;
  spec.growth_m = 18.0;
  mdl.spec = spec;

  CostSpec cost;
  cost.phi = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  cost.grad_phi = [](const Vec& x) { return Vec(x); };
  cost.ell = [ell_weight](double, const Vec&, const Vec&, const Vec& a, const Vec&, const Vec&,
                          const Vec&) { return 0.5 * ell_weight * a.squaredNorm(); };
  cost.grad_ell = [ell_weight](double, const Vec& x, const Vec& u, const Vec& a, const Vec& xd,
                               const Vec& ud, const Vec& ad) {
    CostGrad g;
    g.x = Vec::Zero(x.size());
    g.u = Vec::Zero(u.size());
    g.a = ell_weight * a;
    g.xd = Vec::Zero(xd.size());
    g.ud = Vec::Zero(ud.size());
    g.ad = Vec::Zero(ad.size());
    return g;
  };
  mdl.cost = cost;

  // Stationary constant control: d/da [ (-250 - 180 a)^2/2 + T w a^2/2 ] = 0.
  const double denom = 180.0 * 180.0 + T * ell_weight;
  const double theta = -(250.0 * 180.0) / denom;
  const double terminal = -250.0 - 180.0 * theta;

  AnalyticSolution sol;
  sol.a_const = scalar(theta);
  sol.u_const = scalar(terminal);
  sol.path.x = [theta, speed](double t) { return scalar(-250.0 - speed * theta * t); };
  sol.path.xdot = [theta, speed](double) { return scalar(-speed * theta); };
  sol.path.u = [terminal](double) { return scalar(terminal); };
  sol.path.udot = [](double) { return scalar(0.0); };
  sol.path.a = [theta](double) { return scalar(theta); };
  sol.path.adot = [](double) { return scalar(0.0); };
  sol.eta = [](double) { return scalar(0.0); };
  sol.objective = 0.5 * terminal * terminal + 0.5 * T * ell_weight * theta * theta;
  mdl.analytic = sol;
  mdl.has_analytic = true;

  mdl.default_u_init = scalar(terminal);
  mdl.default_a_init = scalar(0.0);
  mdl.solve_with_reference = false;
  return mdl;
}

Model builtin_crowd(CrowdCase which) {
  Model mdl;
  mdl.name = which == CrowdCase::Contact ? "builtin-crowd-contact" : "builtin-crowd-free";

  const double R = 3.0;
  const double T = 6.0;
  const double s1 = 6.0, s2 = 3.0;
  const double sq2 = std::sqrt(2.0);
  Eigen::Vector2d dir(-sq2 / 2.0, sq2 / 2.0);  // desired direction, 135 degrees

  std::vector<ConstraintForm> forms(1);
  forms[0].kind = ConstraintForm::Kind::PairDisk;
  forms[0].radius = R;
  SweepingSet set = make_set(4, forms, sq2, sq2, 1.0 / 3.0, 1.0, 1.0);

  ProcessSpec spec;
  spec.set = set;
  spec.n = 4;
  spec.d = 2;
  spec.f = [s1, s2, dir](const Vec&, const Vec& a) {
    Vec out(4);
    out.head(2) = s1 * a[0] * dir;
    out.tail(2) = s2 * a[1] * dir;
    return out;
  };
  spec.grad_f_x = [](const Vec&, const Vec&) { return Mat::Zero(4, 4); };
  spec.grad_f_a = [s1, s2, dir](const Vec&, const Vec&) {
    Mat J = Mat::Zero(4, 2);
    J.col(0).head(2) = s1 * dir;
    J.col(1).tail(2) = s2 * dir;
    return J;
  };
  spec.horizon = T;
  spec.x0 = Vec(4);
  spec.x0 << -48.0 - 6.0 / sq2, 48.0 + 6.0 / sq2, -48.0, 48.0;
  spec.r1 = 1.0;
  spec.r2 = 10.0;
  spec.lipschitz_k = 0.0;
  spec.growth_m = 30.0;
  mdl.spec = spec;

  CostSpec cost;
  cost.phi = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  cost.grad_phi = [](const Vec& x) { return Vec(x); };
  cost.ell = [](double, const Vec&, const Vec&, const Vec& a, const Vec&, const Vec&, const Vec&) {
    return 0.5 * a.squaredNorm();
  };
  cost.grad_ell = [](double, const Vec& x, const Vec& u, const Vec& a, const Vec& xd,
                     const Vec& ud, const Vec& ad) {
    CostGrad g;
    g.x = Vec::Zero(x.size());
    g.u = Vec::Zero(u.size());
    g.a = a;
    g.xd = Vec::Zero(xd.size());
    g.ud = Vec::Zero(ud.size());
    g.ad = Vec::Zero(ad.size());
    return g;
  };
  mdl.cost = cost;

  // Constant set-control of minimal norm with equal blocks.
  Vec u0(4);
  u0 << -0.5, 0.5, -0.5, 0.5;

  const double root = 96.0 * sq2 + 6.0;
  double a1, a2, eta12, speed_coord;
  if (which == CrowdCase::Contact) {
    a2 = 45.0 * root / 4080.0;
    a1 = 2.0 * a2;
    eta12 = 4.5 * a2;                        // (6 a1 - 3 a2) / 2 with a1 = 2 a2
    speed_coord = (15.0 * sq2 / 4.0) * a2;   // common per-coordinate speed
  } else {
    a1 = 18.0 * root / 1311.0;
    a2 = 2.0 * a1;
    eta12 = 0.0;
    speed_coord = 3.0 * sq2 * a1;  // equal free velocities when a2 = 2 a1
  }

  AnalyticSolution sol;
  sol.a_const = Vec(2);
  sol.a_const << a1, a2;
  sol.u_const = u0;
  const Vec x0 = spec.x0;
  sol.path.x = [x0, speed_coord](double t) {
    Vec out(4);
    out << x0[0] + speed_coord * t, x0[1] - speed_coord * t, x0[2] + speed_coord * t,
        x0[3] - speed_coord * t;
    return out;
  };
  sol.path.xdot = [speed_coord](double) {
    Vec out(4);
    out << speed_coord, -speed_coord, speed_coord, -speed_coord;
    return out;
  };
  sol.path.u = [u0](double) { return u0; };
  sol.path.udot = [](double) { return Vec::Zero(4); };
  const Vec ac = sol.a_const;
  sol.path.a = [ac](double) { return ac; };
  sol.path.adot = [](double) { return Vec::Zero(2); };
  sol.eta = [eta12](double) { return scalar(eta12); };

  const Vec xT = sol.path.x(T);
  sol.objective = 0.5 * xT.squaredNorm() + 0.5 * T * (a1 * a1 + a2 * a2);
  mdl.analytic = sol;
  mdl.has_analytic = true;

  mdl.default_u_init = u0;
  mdl.default_a_init = sol.a_const;
  mdl.solve_with_reference = true;
  return mdl;
}

}  // namespace sweep
