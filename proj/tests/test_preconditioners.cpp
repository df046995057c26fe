#include "energia/barrier.hpp"
#include "energia/objective.hpp"
#include "energia/preconditioner.hpp"
#include "energia/problems.hpp"
#include "oracle_values.hpp"

#include <doctest.h>

#include <random>

using namespace energia;

namespace {

Mat random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = N(rng);
  return A * A.transpose() + n * Mat::Identity(n, n);
}

std::shared_ptr<LegendreBarrier> orthant(int n, const Vec& witness) {
  std::vector<Constraint> cs;
  for (int i = 0; i < n; ++i) cs.push_back(Constraint::sign_of(n, i, 1.0));
  return std::make_shared<LegendreBarrier>(ConstraintSet(n, cs, witness), Kernel::entropy);
}

}  // namespace

TEST_CASE("fixed_spd_apply") {
  const Vec g = (Vec(2) << 1.0, 1.0).finished();
  CHECK(fixed_spd_apply(Mat::Identity(2, 2), g) == g);
  Mat A = Mat::Zero(2, 2);
  A.diagonal() << 2.0, 8.0;
  const Vec v = fixed_spd_apply(A, g);
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(0.125));

  std::mt19937_64 rng(7);
  Mat S = random_spd(rng, 5);
  Vec r = Vec::Random(5);
  CHECK((S * fixed_spd_apply(S, r) - r).norm() / r.norm() < 1e-10);

  Mat bad = Mat::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(fixed_spd_apply(bad, g), FactorizationError);
  CHECK_THROWS_AS(FixedSpdPreconditioner{bad}, FactorizationError);
}

TEST_CASE("projection_matrix: closed forms") {
  Mat B(1, 2);
  B << 1.0, 0.0;
  Mat P = projection_matrix(Mat::Identity(2, 2), B);
  CHECK(P(0, 0) == doctest::Approx(0.0));
  CHECK(P(0, 1) == doctest::Approx(0.0));
  CHECK(P(1, 0) == doctest::Approx(0.0));
  CHECK(P(1, 1) == doctest::Approx(1.0));

  Mat G = Mat::Zero(2, 2);
  G.diagonal() << 1.0, 4.0;
  B << 1.0, 1.0;
  P = projection_matrix(G, B);
  CHECK(P(0, 0) == doctest::Approx(oracle::kProjP00).epsilon(1e-14));
  CHECK(P(0, 1) == doctest::Approx(oracle::kProjP01).epsilon(1e-14));
  CHECK(P(1, 0) == doctest::Approx(oracle::kProjP10).epsilon(1e-14));
  CHECK(P(1, 1) == doctest::Approx(oracle::kProjP11).epsilon(1e-14));
  CHECK((P * P - P).norm() < 1e-14);
  CHECK((B * P).norm() < 1e-14);
  CHECK((G * P - P.transpose() * G).norm() < 1e-14);

  CHECK(projection_matrix(G, Mat(0, 2)) == Mat::Identity(2, 2));
}

TEST_CASE("projection_matrix: dependent rows are reported") {
  Mat B(2, 3);
  B << 1, 2, 3, 2, 4, 6;
  CHECK_THROWS_AS(projection_matrix(Mat::Identity(3, 3), B), Error);
  CHECK_THROWS_AS(AffineConstraint(B, Vec::Zero(2)), Error);
}

TEST_CASE("hr_apply: Rosenbrock sign barrier") {
  ProblemInstance p = rosenbrock_problem(100.0);
  const Vec x = (Vec(2) << -0.5, 2.0).finished();
  const Vec v = hr_apply(*p.barrier, nullptr, x, Vec::Ones(2));
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(2.0));
}

TEST_CASE("hr_apply: simplex normal is annihilated") {
  const int n = 6;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  Vec th(n);
  for (int i = 0; i < n; ++i) th[i] = U(rng);
  th /= th.sum();
  auto h = orthant(n, th);
  AffineConstraint c(Mat::Ones(1, n), Vec::Ones(1));
  for (int t = 0; t < 20; ++t) {
    Vec g = Vec::Random(n);
    const Vec v = hr_apply(*h, &c, th, g);
    CHECK(std::fabs(v.sum()) < 1e-13);
    CHECK((v - simplex_apply(th, g)).norm() < 1e-10 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("hr_apply agrees with the dense assembled operator") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.2, 2.0);
  const int n = 4;
  // Generic barrier: a ball plus one affine half-space, so the Hessian is dense.
  const Vec center = Vec::Zero(n);
  Mat S = Mat::Identity(n, n);
  S(0, 1) = S(1, 0) = 0.2;
  std::vector<Constraint> cs{Constraint::ball(center, S), Constraint::affine(Vec::Ones(n), -1.5)};
  Vec th(n);
  th << 0.1, -0.2, 0.15, 0.05;
  auto h = std::make_shared<LegendreBarrier>(ConstraintSet(n, cs, th), Kernel::log);
  Mat B(1, n);
  B << 1.0, -1.0, 0.5, 2.0;
  AffineConstraint c(B, B * th);
  const Mat H = h->hess(th);
  const Mat Hi = H.inverse();
  const Mat T = Hi - Hi * B.transpose() * (B * Hi * B.transpose()).inverse() * B * Hi;
  for (int t = 0; t < 10; ++t) {
    Vec g = Vec::Random(n);
    CHECK((hr_apply(*h, &c, th, g) - T * g).norm() < 1e-10 * std::max(1.0, (T * g).norm()));
  }
  HessianRiemannianPreconditioner pre(h, c);
  Vec g = Vec::Random(n);
  CHECK((pre.apply(th, g) - T * g).norm() < 1e-10);
}

TEST_CASE("simplex_apply closed forms") {
  const int n = 8;
  const Vec u = Vec::Constant(n, 1.0 / n);
  CHECK(simplex_apply(u, Vec::Ones(n)).norm() < 1e-15);
  const Vec v = simplex_apply((Vec(2) << 0.5, 0.5).finished(), (Vec(2) << 1.0, 0.0).finished());
  CHECK(v[0] == doctest::Approx(0.25));
  CHECK(v[1] == doctest::Approx(-0.25));
  SimplexPreconditioner sp(n);
  auto sb = sp.spectrum_at(u);
  REQUIRE(sb);
  CHECK(sb->lambda1 == doctest::Approx(n));
}

TEST_CASE("affine parametrization spans the feasible set") {
  std::mt19937_64 rng(5);
  Mat B = Mat::Random(2, 5);
  Vec x0 = Vec::Random(5);
  AffineConstraint c(B, B * x0);
  AffineParametrization ap = affine_parametrization(c, x0);
  CHECK(ap.Z.rows() == 5);
  CHECK(ap.Z.cols() == 3);
  CHECK((B * ap.Z).norm() < 1e-12);
  CHECK(Eigen::FullPivLU<Mat>(ap.Z).rank() == 3);
}

TEST_CASE("HRGD equals NGD on the affine parametrization") {
  SUBCASE("two-variable quadratic on a line") {
    const double a = 1.3, b = 0.7;
    ObjectiveSpec f;
    f.eval = [](const Vec& x) { return 0.5 * (x[0] * x[0] + 3.0 * x[1] * x[1]); };
    f.grad = [](const Vec& x) { return Vec((Vec(2) << x[0], 3.0 * x[1]).finished()); };
    const Vec th = (Vec(2) << 0.4 / a, 0.6 / b).finished();
    AffineConstraint c((Mat(1, 2) << a, b).finished(), Vec::Ones(1));
    CHECK(ngd_equivalence_check(*orthant(2, th), c, f, th) < 1e-10);
  }
  SUBCASE("constant objective: both directions vanish") {
    ObjectiveSpec f;
    f.eval = [](const Vec&) { return 2.0; };
    f.grad = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
    const Vec th = (Vec(3) << 0.2, 0.3, 0.5).finished();
    AffineConstraint c(Mat::Ones(1, 3), Vec::Ones(1));
    CHECK(ngd_equivalence_check(*orthant(3, th), c, f, th) == 0.0);
  }
}
