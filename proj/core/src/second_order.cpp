#include "sweep/second_order.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sweep/nnls.hpp"

namespace sweep {

namespace {
constexpr double kSignTol = 1e-10;
}

void OrthantCoderivativeQuery::validate() const {
  if (x.size() != v.size() || x.size() != y.size())
    throw InvalidArgument("orthant query: size mismatch");
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] > kSignTol) throw InvalidArgument("orthant query: x must be <= 0");
    if (v[i] < -kSignTol) throw InvalidArgument("orthant query: v must be >= 0");
    if (std::abs(x[i] * v[i]) > kSignTol)
      throw InvalidArgument("orthant query: (x, v) is not a graph point");
  }
}

CoderivativeValue coderivative_orthant(const OrthantCoderivativeQuery& q) {
  q.validate();
  CoderivativeValue out;
  const int m = static_cast<int>(q.x.size());
  for (int i = 0; i < m; ++i) {
    if (std::abs(q.v[i] * q.y[i]) > kSignTol) {
      out.empty = true;
      return out;
    }
  }
  out.gamma_tags.assign(static_cast<size_t>(m), GammaTag::Free);
  for (int i = 0; i < m; ++i) {
    const bool x_neg = q.x[i] < -kSignTol;
    const bool v_zero = std::abs(q.v[i]) <= kSignTol;
    if (x_neg || (v_zero && q.y[i] < -kSignTol)) {
      out.gamma_tags[static_cast<size_t>(i)] = GammaTag::Zero;
      out.partition.i1.push_back(i);
    } else if (!x_neg && v_zero && q.y[i] > kSignTol) {
      out.gamma_tags[static_cast<size_t>(i)] = GammaTag::NonNegative;
      out.partition.i2.push_back(i);
    } else {
      out.partition.free.push_back(i);
    }
  }
  return out;
}

double TaggedAffineSet::distance(const Vec& w) const { return (nearest(w) - w).norm(); }

Vec TaggedAffineSet::nearest(const Vec& w) const {
  // Minimize ||base + G*gamma - w|| subject to the tags: zero columns removed,
  // nonnegative columns via NNLS, free columns eliminated exactly.
  std::vector<int> free_cols, nn_cols;
  for (size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == GammaTag::Free) free_cols.push_back(static_cast<int>(i));
    else if (tags[i] == GammaTag::NonNegative) nn_cols.push_back(static_cast<int>(i));
  }
  Mat F(base.size(), static_cast<int>(free_cols.size()));
  for (size_t t = 0; t < free_cols.size(); ++t) F.col(static_cast<int>(t)) = generators.col(free_cols[t]);
  Mat S(base.size(), static_cast<int>(nn_cols.size()));
  for (size_t t = 0; t < nn_cols.size(); ++t) S.col(static_cast<int>(t)) = generators.col(nn_cols[t]);
  SemiNnlsResult r = semi_nnls(F, S, w - base);
  Vec val = base;
  for (size_t t = 0; t < free_cols.size(); ++t) val += r.y[static_cast<int>(t)] * F.col(static_cast<int>(t));
  for (size_t t = 0; t < nn_cols.size(); ++t) val += r.s[static_cast<int>(t)] * S.col(static_cast<int>(t));
  return val;
}

bool mfcq_holds(const SweepingSet& set, const Vec& x, double tol) {
  const ActiveIndexSet act = active_set(set, x, 0.0);
  if (act.indices.empty()) return true;
  const Mat G = set.grad_g(x);
  // Positive linear independence fails iff some convex combination of the
  // active gradients vanishes: check by NNLS on [G^T; 1^T] lam = [0; 1].
  const int na = static_cast<int>(act.indices.size());
  Mat A(set.n + 1, na);
  for (int t = 0; t < na; ++t) {
    A.col(t).head(set.n) = G.row(act.indices[static_cast<size_t>(t)]).transpose();
    A(set.n, t) = 1.0;
  }
  Vec b = Vec::Zero(set.n + 1);
  b[set.n] = 1.0;
  NnlsResult nn = nnls(A, b);
  return nn.residual > tol;
}

bool licq_holds(const SweepingSet& set, const Vec& x, double tol) {
  const ActiveIndexSet act = active_set(set, x, 0.0);
  if (act.indices.empty()) return true;
  const Mat G = set.grad_g(x);
  Mat Ga(static_cast<int>(act.indices.size()), set.n);
  for (size_t t = 0; t < act.indices.size(); ++t) Ga.row(static_cast<int>(t)) = G.row(act.indices[t]);
  Eigen::JacobiSVD<Mat> svd(Ga);
  const auto& sv = svd.singularValues();
  return sv.size() == Ga.rows() && sv[sv.size() - 1] > tol * std::max(1.0, sv[0]);
}

namespace {

// All vertex multipliers lambda >= 0 of { -grad g(x)^T lambda = v } restricted
// to the active indices (basic feasible solutions over subsets of size <= n).
std::vector<Vec> vertex_multipliers(const SweepingSet& set, const Vec& x, const Vec& v,
                                    const std::vector<int>& act) {
  std::vector<Vec> out;
  const Mat G = set.grad_g(x);
  const int na = static_cast<int>(act.size());
  const double tol = 1e-9 * (1.0 + v.norm());
  for (int mask = 0; mask < (1 << na); ++mask) {
    const int card = __builtin_popcount(static_cast<unsigned>(mask));
    if (card > set.n) continue;
    std::vector<int> sub;
    for (int t = 0; t < na; ++t)
      if (mask & (1 << t)) sub.push_back(act[static_cast<size_t>(t)]);
    Mat A(set.n, card);
    for (size_t t = 0; t < sub.size(); ++t) A.col(static_cast<int>(t)) = -G.row(sub[t]).transpose();
    Vec lam_sub = card == 0 ? Vec(0) : Vec(A.completeOrthogonalDecomposition().solve(v));
    Vec resid = v;
    for (size_t t = 0; t < sub.size(); ++t) resid -= lam_sub[static_cast<int>(t)] * A.col(static_cast<int>(t)) * 1.0;
    if ((card == 0 && v.norm() > tol) || (card > 0 && (A * lam_sub - v).norm() > tol)) continue;
    bool nonneg = true;
    for (int t = 0; t < card; ++t)
      if (lam_sub[t] < -1e-10) { nonneg = false; break; }
    if (!nonneg) continue;
    Vec lam = Vec::Zero(set.m);
    for (size_t t = 0; t < sub.size(); ++t) lam[sub[t]] = std::max(0.0, lam_sub[static_cast<int>(t)]);
    bool dup = false;
    for (const Vec& l : out)
      if ((l - lam).norm() < 1e-8 * (1.0 + lam.norm())) { dup = true; break; }
    if (!dup) out.push_back(lam);
  }
  return out;
}

std::vector<GammaTag> gamma_tags_for(const SweepingSet& set, const Vec& x, const Vec& lam,
                                     const Vec& dir_inner) {
  // Tags of gamma_i given the orthant-query branches: active & strictly
  // complementary -> free; inactive or (lam=0 and inner>0) -> zero;
  // (active, lam=0, inner<0) -> nonnegative; degenerate inner=0 -> free.
  const Vec gv = set.g(x);
  std::vector<GammaTag> tags(static_cast<size_t>(set.m), GammaTag::Free);
  for (int i = 0; i < set.m; ++i) {
    if (gv[i] > set.tol_act) {
      tags[static_cast<size_t>(i)] = GammaTag::Zero;
    } else if (lam[i] <= kSignTol) {
      if (dir_inner[i] > kSignTol) tags[static_cast<size_t>(i)] = GammaTag::Zero;
      else if (dir_inner[i] < -kSignTol) tags[static_cast<size_t>(i)] = GammaTag::NonNegative;
      else tags[static_cast<size_t>(i)] = GammaTag::Free;
    }
  }
  return tags;
}

}  // namespace

NormalConeCoderivative coderivative_normal_cone(const SweepingSet& set, const Vec& x, const Vec& v,
                                                const Vec& u_dir) {
  NormalConeCoderivative out;
  if (!membership(set, x, set.tol_act))
    throw PreconditionViolation("coderivative_normal_cone: x is not in the set");
  if (!mfcq_holds(set, x))
    throw PreconditionViolation("coderivative_normal_cone: active gradients are not positively independent");

  const ActiveIndexSet act = active_set(set, x, 0.0);
  std::vector<Vec> lams = vertex_multipliers(set, x, v, act.indices);
  if (lams.empty()) throw InvalidArgument("coderivative_normal_cone: v is not in the normal cone");

  const bool licq = licq_holds(set, x);
  out.upper_estimate = !licq;
  const Mat G = set.grad_g(x);
  const auto H = set.hess_g(x);

  for (const Vec& lam : lams) {
    // Domain: lam_i <grad g_i, u_dir> = 0 for every i.
    bool ok = true;
    Vec inner(set.m);
    for (int i = 0; i < set.m; ++i) {
      inner[i] = G.row(i).dot(u_dir);
      if (lam[i] > kSignTol && std::abs(inner[i]) > 1e-9 * (1.0 + u_dir.norm())) ok = false;
    }
    if (!ok) continue;

    TaggedAffineSet piece;
    Mat Hl = Mat::Zero(set.n, set.n);
    for (int i = 0; i < set.m; ++i)
      if (lam[i] != 0.0) Hl += lam[i] * H[static_cast<size_t>(i)];
    piece.base = -(Hl * u_dir);
    piece.generators = -G.transpose();
    piece.tags = gamma_tags_for(set, x, lam, inner);
    out.pieces.push_back(std::move(piece));
    out.lambdas.push_back(lam);
    if (licq) break;  // unique multiplier under full rank
  }
  if (out.pieces.empty()) {
    out.empty = true;
    out.domain_violation = true;
  }
  return out;
}

VelocityMapCoderivative coderivative_F(const ProcessSpec& spec, const Vec& x, const Vec& u,
                                       const Vec& a, const Vec& w, const Vec& y) {
  VelocityMapCoderivative out;
  const Vec yset = x - u;
  if (!membership(spec.set, yset, spec.set.tol_act))
    throw PreconditionViolation("coderivative_F: x - u is not in the set");

  // Certify w in F(x,u,a): w - f(x,a) must be a normal-cone element.
  Vec lam;
  try {
    lam = recover_eta(spec, x, u, -w, a);  // solves -w + f = ... via xdot = -w
  } catch (const NumericalFailure&) {
    out.not_in_cone = true;
    return out;
  }
  // recover_eta certifies -w + f(x,a) = sum lam grad g, i.e. w = -sum lam grad g + f.
  out.lambda = lam;

  const Mat G = spec.set.grad_g(yset);
  Vec inner(spec.set.m);
  for (int i = 0; i < spec.set.m; ++i) inner[i] = G.row(i).dot(y);
  for (int i = 0; i < spec.set.m; ++i)
    if (lam[i] > kSignTol && std::abs(inner[i]) > 1e-9 * (1.0 + y.norm())) {
      out.domain_violation = true;
      return out;
    }

  const auto H = spec.set.hess_g(yset);
  Mat Hl = Mat::Zero(spec.n, spec.n);
  for (int i = 0; i < spec.set.m; ++i)
    if (lam[i] != 0.0) Hl += lam[i] * H[static_cast<size_t>(i)];

  out.base_x = spec.grad_f_x(x, a).transpose() * y - Hl * y;
  out.base_u = Hl * y;
  out.base_a = spec.grad_f_a(x, a).transpose() * y;
  out.gen_x = -G.transpose();
  out.gen_u = G.transpose();
  out.tags = gamma_tags_for(spec.set, yset, lam, inner);
  return out;
}

}  // namespace sweep
