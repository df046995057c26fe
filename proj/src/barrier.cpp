#include "energia/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace energia {

Constraint Constraint::affine(Vec a, double b) {
  Constraint c;
  c.kind = ConstraintKind::affine;
  c.a = std::move(a);
  c.b = b;
  return c;
}

Constraint Constraint::lower_bound(Eigen::Index n, Eigen::Index i, double lo) {
  return affine(Vec::Unit(n, i), lo);
}

Constraint Constraint::sign_of(Eigen::Index n, Eigen::Index i, double s) {
  if (s != 1.0 && s != -1.0) throw Error("sign constraint needs s = +1 or -1");
  Constraint c;
  c.kind = ConstraintKind::sign;
  c.index = i;
  c.sign = s;
  c.a = s * Vec::Unit(n, i);
  return c;
}

Constraint Constraint::ball(Vec center, Mat S) {
  if (S.rows() != center.size() || S.cols() != center.size()) throw Error("ball constraint: shape mismatch");
  if ((S - S.transpose()).norm() > 1e-12 * std::max(1.0, S.norm())) throw Error("ball constraint: S not symmetric");
  if (Eigen::LLT<Mat>(S).info() != Eigen::Success) throw Error("ball constraint: S not positive definite");
  Constraint c;
  c.kind = ConstraintKind::ball;
  c.center = std::move(center);
  c.S = std::move(S);
  return c;
}

double Constraint::value(const Vec& theta) const {
  switch (kind) {
    case ConstraintKind::affine: return a.dot(theta) - b;
    case ConstraintKind::sign: return sign * theta[index];
    case ConstraintKind::ball: {
      Vec d = theta - center;
      return 1.0 - d.dot(S * d);
    }
  }
  return 0.0;
}

Vec Constraint::grad(const Vec& theta) const {
  if (kind == ConstraintKind::ball) return -2.0 * (S * (theta - center));
  return a;
}

Mat Constraint::hess(Eigen::Index n) const {
  if (kind == ConstraintKind::ball) return -2.0 * S;
  return Mat::Zero(n, n);
}

bool Constraint::single_coordinate(Eigen::Index* coord, double* coef) const {
  if (kind == ConstraintKind::ball) return false;
  Eigen::Index nz = 0, at = -1;
  for (Eigen::Index j = 0; j < a.size(); ++j)
    if (a[j] != 0.0) {
      ++nz;
      at = j;
    }
  if (nz != 1) return false;
  if (coord) *coord = at;
  if (coef) *coef = a[at];
  return true;
}

ConstraintSet::ConstraintSet(Eigen::Index dim, std::vector<Constraint> list, const Vec& witness)
    : dim_(dim), list_(std::move(list)), witness_(witness) {
  if (witness.size() != dim) throw Error("constraint set: witness has wrong dimension");
  for (const auto& c : list_) {
    const Eigen::Index sz = c.kind == ConstraintKind::ball ? c.center.size() : c.a.size();
    if (sz != dim) throw Error("constraint set: constraint dimension mismatch");
  }
  const double u = min_value(witness);
  if (!(u > 0.0)) throw BoundaryError("constraint set: witness is not strictly feasible", u);
}

Vec ConstraintSet::values(const Vec& theta) const {
  Vec u(static_cast<Eigen::Index>(list_.size()));
  for (std::size_t i = 0; i < list_.size(); ++i) u[static_cast<Eigen::Index>(i)] = list_[i].value(theta);
  return u;
}

double ConstraintSet::min_value(const Vec& theta) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : list_) m = std::min(m, c.value(theta));
  return m;
}

double kernel_value(Kernel K, double s) { return K == Kernel::entropy ? s * std::log(s) - s : -std::log(s); }
double kernel_d1(Kernel K, double s) { return K == Kernel::entropy ? std::log(s) : -1.0 / s; }
double kernel_d2(Kernel K, double s) { return K == Kernel::entropy ? 1.0 / s : 1.0 / (s * s); }

LegendreBarrier::LegendreBarrier(ConstraintSet constraints, Kernel kernel, bool auto_correct)
    : cons_(std::move(constraints)), kernel_(kernel) {
  const Eigen::Index n = cons_.dim();
  C_ = Mat::Zero(n, n);

  bool all_single = true;
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  for (const auto& c : cons_.list()) {
    Eigen::Index j;
    if (c.single_coordinate(&j, nullptr))
      covered[static_cast<std::size_t>(j)] = true;
    else
      all_single = false;
  }

  if (all_single) {
    diagonal_ = true;
    if (auto_correct)
      for (Eigen::Index j = 0; j < n; ++j)
        if (!covered[static_cast<std::size_t>(j)]) {
          C_(j, j) = 1.0;
          corrected_ = true;
        }
    return;
  }

  // Common kernel of all grad U_i and hess U_i at the witness: xi with
  // xi.grad U_i = 0 and hess U_i xi = 0 for every i (hess U_i is NSD).
  Mat Q = Mat::Zero(n, n);
  const Vec& w = cons_.witness();
  for (const auto& c : cons_.list()) {
    Vec gu = c.grad(w);
    Q.noalias() += gu * gu.transpose();
    if (c.kind == ConstraintKind::ball) {
      Mat Hu = c.hess(n);
      Q.noalias() += Hu * Hu;
    }
  }
  if (!auto_correct) return;
  Eigen::SelfAdjointEigenSolver<Mat> es(Q);
  const double cut = 1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < n; ++j)
    if (es.eigenvalues()[j] <= cut) {
      Vec z = es.eigenvectors().col(j);
      C_.noalias() += z * z.transpose();
      corrected_ = true;
    }
}

void LegendreBarrier::require_interior(const Vec& theta) const {
  const double u = cons_.min_value(theta);
  if (!(u > 0.0)) {
    std::ostringstream os;
    os << "point is on or outside the barrier boundary (min U = " << u << ")";
    throw BoundaryError(os.str(), u);
  }
}

double LegendreBarrier::value(const Vec& theta) const {
  require_interior(theta);
  double h = 0.5 * theta.dot(C_ * theta);
  for (const auto& c : cons_.list()) h += kernel_value(kernel_, c.value(theta));
  return h;
}

Vec LegendreBarrier::grad(const Vec& theta) const {
  require_interior(theta);
  Vec g = C_ * theta;
  for (const auto& c : cons_.list()) g.noalias() += kernel_d1(kernel_, c.value(theta)) * c.grad(theta);
  return g;
}

Mat LegendreBarrier::hess(const Vec& theta) const {
  require_interior(theta);
  const Eigen::Index n = dim();
  Mat H = C_;
  for (const auto& c : cons_.list()) {
    const double u = c.value(theta);
    Vec gu = c.grad(theta);
    H.noalias() += kernel_d2(kernel_, u) * gu * gu.transpose();
    if (c.kind == ConstraintKind::ball) H.noalias() += kernel_d1(kernel_, u) * c.hess(n);
  }
  return 0.5 * (H + H.transpose());
}

Vec LegendreBarrier::hess_diag(const Vec& theta) const {
  if (!diagonal_) throw Error("hess_diag: barrier Hessian is not diagonal");
  require_interior(theta);
  Vec d = C_.diagonal();
  for (const auto& c : cons_.list()) {
    Eigen::Index j;
    double a;
    c.single_coordinate(&j, &a);
    d[j] += kernel_d2(kernel_, c.value(theta)) * a * a;
  }
  return d;
}

Vec LegendreBarrier::hess_inv_apply(const Vec& theta, const Vec& g) const {
  if (diagonal_) {
    Vec d = hess_diag(theta);
    if ((d.array() <= 0.0).any())
      throw FactorizationError("barrier Hessian singular: a coordinate has no curvature; enable the correction term");
    return g.cwiseQuotient(d);
  }
  const Mat H = hess(theta);
  Eigen::LLT<Mat> llt(H);
  // LLT accepts pivots that are positive only through rounding; pivots at the
  // rounding level of the largest diagonal entry count as singular.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * H.diagonal().cwiseAbs().maxCoeff();
  const bool degenerate = llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array().square() <= floor).any();
  if (llt.info() != Eigen::Success || degenerate)
    throw FactorizationError(
        "barrier Hessian is not positive definite here; the strict-convexity condition fails, enable the correction "
        "term");
  return llt.solve(g);
}

Mat barrier_hess(const LegendreBarrier& h, const Vec& theta) { return h.hess(theta); }
Vec barrier_grad(const LegendreBarrier& h, const Vec& theta) { return h.grad(theta); }
Vec barrier_hess_inv_apply(const LegendreBarrier& h, const Vec& theta, const Vec& g) {
  return h.hess_inv_apply(theta, g);
}

Bregman bregman_divergence(const LegendreBarrier& h, const Vec& xi, const Vec& theta) {
  Bregman b;
  b.h_xi = h.value(xi);
  b.h_theta = h.value(theta);
  b.divergence = b.h_xi - b.h_theta - h.grad(theta).dot(xi - theta);
  return b;
}

LineSearchResult feasible_line_search(const Vec& theta, const Vec& v, double r, const ConstraintSet& cons,
                                      double eps_feas, double eta_star, double eta_min, int bisection_steps) {
  LineSearchResult res;
  if (eps_feas < 0.0 || eps_feas > 0.5) throw Error("eps_feas must lie in [0, 1/2]");
  if (!(eta_star > 0.0)) throw Error("eta_star must be positive");
  const Vec u0 = cons.values(theta);
  if (!((u0.array() > 0.0).all())) throw BoundaryError("line search: theta not strictly feasible", u0.minCoeff());
  const double vv = v.squaredNorm();
  auto admissible = [&](double eta) {
    ++res.evaluations;
    const Vec cand = theta - (2.0 * eta * r / (1.0 + 2.0 * eta * vv)) * v;
    for (std::size_t i = 0; i < cons.size(); ++i) {
      const double u = cons[i].value(cand);
      const double u_old = u0[static_cast<Eigen::Index>(i)];
      if (!(u > 0.0) || u < eps_feas * u_old) return false;
    }
    return true;
  };
  if (vv == 0.0 || admissible(eta_star)) {
    res.eta = eta_star;
    res.ok = true;
    return res;
  }
  // The candidate moves along a ray, so the admissible set is an interval [0, sup].
  double hi = eta_star, lo = 0.5 * eta_star;
  while (!admissible(lo)) {
    hi = lo;
    lo *= 0.5;
    if (lo < eta_min) return res;
  }
  for (int it = 0; it < bisection_steps; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (admissible(mid))
      lo = mid;
    else
      hi = mid;
  }
  res.eta = lo;
  res.ok = true;
  return res;
}

}  // namespace energia
