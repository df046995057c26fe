#include "energia/barrier.hpp"
#include "energia/problems.hpp"
#include "oracle_values.hpp"

#include <doctest.h>

#include <random>

using namespace energia;

namespace {

Vec fd_grad(const LegendreBarrier& h, const Vec& x) {
  return finite_difference_gradient([&](const Vec& y) { return h.value(y); }, x);
}

Mat fd_hess(const LegendreBarrier& h, const Vec& x) {
  Mat H(x.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = 1e-6 * std::max(std::fabs(x[j]), 0.01);
    Vec p = x, m = x;
    p[j] += step;
    m[j] -= step;
    H.col(j) = (h.grad(p) - h.grad(m)) / (2.0 * step);
  }
  return H;
}

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12}); }
double rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12}); }

}  // namespace

TEST_CASE("kernels") {
  CHECK(kernel_value(Kernel::entropy, 1.0) == doctest::Approx(-1.0));
  CHECK(kernel_d1(Kernel::entropy, 1.0) == 0.0);
  CHECK(kernel_d2(Kernel::entropy, 4.0) == doctest::Approx(0.25));
  CHECK(kernel_value(Kernel::log, 1.0) == 0.0);
  CHECK(kernel_d1(Kernel::log, 2.0) == doctest::Approx(-0.5));
  CHECK(kernel_d2(Kernel::log, 2.0) == doctest::Approx(0.25));
}

TEST_CASE("box barrier: inverse Hessian is diag(theta - a)") {
  const int n = 3;
  const Vec lo = (Vec(3) << -1.0, 0.0, 2.0).finished();
  std::vector<Constraint> cs;
  for (int i = 0; i < n; ++i) cs.push_back(Constraint::lower_bound(n, i, lo[i]));
  const Vec th = (Vec(3) << 0.5, 0.1, 4.0).finished();
  LegendreBarrier h(ConstraintSet(n, cs, th), Kernel::entropy);
  CHECK(h.is_diagonal());
  CHECK_FALSE(h.corrected());
  const Vec g = (Vec(3) << 1.0, -2.0, 0.5).finished();
  const Vec v = h.hess_inv_apply(th, g);
  for (int i = 0; i < n; ++i) CHECK(v[i] == doctest::Approx((th[i] - lo[i]) * g[i]));
}

TEST_CASE("sign barriers match the closed forms") {
  ProblemInstance r = rosenbrock_problem(1.0);
  const Vec x = (Vec(2) << -0.3, 1.7).finished();
  const Vec g = (Vec(2) << 2.0, -3.0).finished();
  const Vec v = barrier_hess_inv_apply(*r.barrier, x, g);
  CHECK(v[0] == doctest::Approx(-x[0] * g[0]));
  CHECK(v[1] == doctest::Approx(x[1] * g[1]));

  const int n = 5;
  Vec th = (Vec(5) << 0.1, 0.2, 0.3, 0.15, 0.25).finished();
  std::vector<Constraint> cs;
  for (int i = 0; i < n; ++i) cs.push_back(Constraint::sign_of(n, i, 1.0));
  LegendreBarrier h(ConstraintSet(n, cs, th), Kernel::entropy);
  const Vec gg = Vec::LinSpaced(n, -1.0, 1.0);
  CHECK((h.hess_inv_apply(th, gg) - th.cwiseProduct(gg)).norm() < 1e-15);
}

TEST_CASE("ball barrier: zero gradient at the center, singular Hessian there") {
  ProblemInstance q = quadratic_problem(1.0);
  const Vec c = (Vec(2) << -0.5, 1.0).finished();
  CHECK(q.barrier->grad(c).norm() == doctest::Approx(0.0));
  // K'(1) = 0 with the entropy kernel makes the barrier Hessian vanish at the center.
  CHECK(q.barrier->hess(c).norm() < 1e-12);
  CHECK_THROWS_AS(q.barrier->hess_inv_apply(c, Vec::Ones(2)), FactorizationError);
  // Away from the center the metric is positive definite.
  const Vec x = (Vec(2) << -0.9, 1.5).finished();
  Eigen::SelfAdjointEigenSolver<Mat> es(q.barrier->hess(x));
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("barrier derivatives match finite differences") {
  std::mt19937_64 rng(9);
  std::vector<std::pair<std::string, ProblemInstance>> probs;
  probs.emplace_back("quad", quadratic_problem(3.0));
  probs.emplace_back("rosen", rosenbrock_problem(3.0));
  probs.emplace_back("doptimal", doptimal_problem(generate_doptimal_data(3, 8, 1)));
  for (auto& [name, p] : probs) {
    CAPTURE(name);
    double wg = 0.0, wh = 0.0;
    for (int t = 0; t < 20; ++t) {
      const Vec x = p.sample_feasible(rng);
      wg = std::max(wg, rel(p.barrier->grad(x), fd_grad(*p.barrier, x)));
      wh = std::max(wh, rel(p.barrier->hess(x), fd_hess(*p.barrier, x)));
    }
    CHECK(wg < 1e-6);
    CHECK(wh < 1e-6);
  }
  // Log kernel on a three-dimensional ball with an affine cut.
  Mat S = Mat::Identity(3, 3);
  S(0, 2) = S(2, 0) = 0.3;
  std::vector<Constraint> cs{Constraint::ball(Vec::Zero(3), S), Constraint::affine(Vec::Ones(3), -1.0)};
  LegendreBarrier h(ConstraintSet(3, cs, Vec::Zero(3)), Kernel::log);
  std::normal_distribution<double> N(0.0, 0.2);
  for (int t = 0; t < 20; ++t) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = N(rng);
    if (!h.constraints().strictly_feasible(x)) continue;
    CHECK(rel(h.grad(x), fd_grad(h, x)) < 1e-6);
    CHECK(rel(h.hess(x), fd_hess(h, x)) < 1e-6);
    const Vec g = Vec::Random(3);
    CHECK((h.hess(x) * h.hess_inv_apply(x, g) - g).norm() < 1e-10 * g.norm());
  }
}

TEST_CASE("correction term covers directions no constraint curves") {
  // A single half-space in 2-D: the Hessian of K(U) has rank one.
  std::vector<Constraint> cs{Constraint::affine((Vec(2) << 1.0, 1.0).finished(), 0.0)};
  const Vec w = (Vec(2) << 1.0, 1.0).finished();
  LegendreBarrier with(ConstraintSet(2, cs, w), Kernel::entropy, true);
  LegendreBarrier without(ConstraintSet(2, cs, w), Kernel::entropy, false);
  CHECK(with.corrected());
  Eigen::SelfAdjointEigenSolver<Mat> es(with.hess(w));
  CHECK(es.eigenvalues().minCoeff() > 1e-8);
  CHECK_THROWS_AS(without.hess_inv_apply(w, Vec::Ones(2)), FactorizationError);
  try {
    without.hess_inv_apply(w, Vec::Ones(2));
  } catch (const FactorizationError& e) {
    CHECK(std::string(e.what()).find("correction") != std::string::npos);
  }
}

TEST_CASE("Bregman divergence") {
  std::vector<Constraint> cs{Constraint::sign_of(1, 0, 1.0)};
  LegendreBarrier h(ConstraintSet(1, cs, Vec::Ones(1)), Kernel::entropy);
  const Vec one = Vec::Constant(1, 1.0), two = Vec::Constant(1, 2.0);
  CHECK(bregman_divergence(h, one, two).divergence == doctest::Approx(oracle::kBregmanEntropy12).epsilon(1e-14));
  CHECK(bregman_divergence(h, two, two).divergence == 0.0);
  CHECK(bregman_divergence(h, two, one).divergence > 0.0);
}

TEST_CASE("feasible line search") {
  std::vector<Constraint> cs{Constraint::sign_of(1, 0, 1.0)};
  ConstraintSet set(1, cs, Vec::Ones(1));
  const Vec th = Vec::Ones(1), v = Vec::Ones(1);

  SUBCASE("zero direction keeps the cap") {
    LineSearchResult r = feasible_line_search(th, Vec::Zero(1), 1.0, set, 0.5, 3.0);
    CHECK(r.ok);
    CHECK(r.eta == 3.0);
  }
  SUBCASE("small cap binds") {
    LineSearchResult r = feasible_line_search(th, v, 1.0, set, 0.5, 0.01);
    CHECK(r.ok);
    CHECK(r.eta == 0.01);
  }
  SUBCASE("supremum of the admissible interval is bracketed") {
    LineSearchResult r = feasible_line_search(th, v, 1.0, set, 0.5, 10.0);
    REQUIRE(r.ok);
    CHECK(r.eta <= oracle::kLineSearchSup);
    CHECK(r.eta >= 0.5 * oracle::kLineSearchSup);
    CHECK(r.eta == doctest::Approx(oracle::kLineSearchSup).epsilon(1e-6));
    const double u = th[0] - 2.0 * r.eta * v[0] / (1.0 + 2.0 * r.eta);
    CHECK(u >= 0.5);
  }
  SUBCASE("eps = 0 admits every step along a bounded ray") {
    LineSearchResult r = feasible_line_search(th, v, 0.4, set, 0.0, 5.0);
    CHECK(r.ok);
    CHECK(r.eta == 5.0);
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(feasible_line_search(th, v, 1.0, set, 0.6, 1.0), Error);
    CHECK_THROWS_AS(feasible_line_search(-th, v, 1.0, set, 0.5, 1.0), BoundaryError);
  }
}

TEST_CASE("constraint set rejects an infeasible witness") {
  std::vector<Constraint> cs{Constraint::sign_of(2, 0, -1.0)};
  CHECK_THROWS_AS(ConstraintSet(2, cs, Vec::Ones(2)), Error);
}
