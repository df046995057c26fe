#include "energia/problems.hpp"
#include "energia/wngd.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace energia;

namespace {

Vec random_mean_zero(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  Vec g(n);
  for (int i = 0; i < n; ++i) g[i] = N(rng);
  mean_project(g);
  return g;
}

Vec smooth_density(const Grid2D& g) {
  Vec rho(g.cells());
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j)
      rho[g.idx(i, j)] = 1.0 + 0.5 * std::sin(g.xc(i)) * std::cos(0.7 * g.yc(j));
  return rho;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Grid2D(0.0, 1.0, 3), Error);
  Grid2D g(0.0, 5.0, 8);
  CHECK(g.cells() == 64);
  CHECK(g.faces() == 2 * 7 * 8);
  CHECK(g.dx() == doctest::Approx(0.625));
}

TEST_CASE("divergence operator: constant fields, conservation") {
  Grid2D g(0.0, 5.0, 12);
  const Vec rho = Vec::Ones(g.cells());
  SpMat M = assemble_divergence(g, rho);
  // A constant x-velocity has zero divergence away from the no-flux walls.
  Vec v = Vec::Zero(g.faces());
  v.head(g.x_faces()).setConstant(2.0);
  const Vec d = M * v;
  for (int i = 1; i + 1 < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j) CHECK(std::fabs(d[g.idx(i, j)]) < 1e-12);

  std::mt19937_64 rng(2);
  SpMat M2 = assemble_divergence(g, smooth_density(g));
  std::normal_distribution<double> N(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    Vec w(g.faces());
    for (int f = 0; f < g.faces(); ++f) w[f] = N(rng);
    CHECK(std::fabs(g.cell_area() * (M2 * w).sum()) < 1e-12);
  }
}

TEST_CASE("divergence operator: second-order manufactured solution") {
  // phi = cos(pi x / 5) cos(pi y / 5) has zero normal derivative on the walls of [0,5]^2.
  const double k = std::numbers::pi / 5.0;
  auto error_at = [&](int n) {
    Grid2D g(0.0, 5.0, n);
    const Vec rho = smooth_density(g);
    SpMat M = assemble_divergence(g, rho);
    Vec v(g.faces());
    int f = 0;
    const double h = g.dx();
    for (int i = 0; i + 1 < g.nx; ++i)
      for (int j = 0; j < g.ny; ++j, ++f) v[f] = -k * std::sin(k * (g.xc(i) + 0.5 * h)) * std::cos(k * g.yc(j));
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j + 1 < g.ny; ++j, ++f) v[f] = -k * std::cos(k * g.xc(i)) * std::sin(k * (g.yc(j) + 0.5 * h));
    const Vec d = M * v;
    double err = 0.0;
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j < g.ny; ++j) {
        const double x = g.xc(i), y = g.yc(j);
        const double s = std::sqrt(1.0 + 0.5 * std::sin(x) * std::cos(0.7 * y));
        const double sx = 0.25 * std::cos(x) * std::cos(0.7 * y) / s;
        const double sy = -0.175 * std::sin(x) * std::sin(0.7 * y) / s;
        const double px = -k * std::sin(k * x) * std::cos(k * y), py = -k * std::cos(k * x) * std::sin(k * y);
        const double lap = -2.0 * k * k * std::cos(k * x) * std::cos(k * y);
        const double exact = -(sx * px + sy * py + s * lap);
        err = std::max(err, std::fabs(d[g.idx(i, j)] - exact));
      }
    return err;
  };
  const double e16 = error_at(16), e32 = error_at(32), e64 = error_at(64);
  CHECK(e32 < e16);
  CHECK(e16 / e32 > 3.0);
  CHECK(e32 / e64 > 3.0);
}

TEST_CASE("lift: min-norm solution of M v = g") {
  Grid2D g(0.0, 5.0, 10);
  SpMat M = assemble_divergence(g, smooth_density(g));
  LiftSolver solver(g, M);
  CHECK(solver.lift(Vec::Zero(g.cells())).norm() == 0.0);

  std::mt19937_64 rng(8);
  const Vec rhs = random_mean_zero(rng, g.cells());
  const Vec v = solver.lift(rhs);
  CHECK((M * v - rhs).norm() < 1e-10 * rhs.norm());
  CHECK(solver.last_residual() < 1e-10);

  // Null-space vectors of M from projecting random fields.
  Eigen::SimplicialLDLT<SpMat> mmT;
  SpMat A = M * SpMat(M.transpose());
  std::normal_distribution<double> N(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Vec w(g.faces());
    for (int f = 0; f < g.faces(); ++f) w[f] = N(rng);
    Vec mw = M * w;
    const Vec z = w - solver.lift(mw);
    CHECK((M * z).norm() < 1e-9 * w.norm());
    CHECK(std::fabs(v.dot(z)) <= 1e-8 * v.norm() * z.norm());
  }

  // A right-hand side with nonzero mass has no solution.
  CHECK_THROWS_AS(solver.lift(Vec::Ones(g.cells())), Error);
}

TEST_CASE("lift: one-dimensional strip has the antiderivative solution") {
  Grid2D g = Grid2D::strip(0.0, 3.0, 40);
  std::vector<double> xs;
  const Vec rho = [&] {
    Vec r(g.cells());
    for (int i = 0; i < g.nx; ++i) r[i] = 1.0 + 0.3 * std::cos(g.xc(i));
    return r;
  }();
  SpMat M = assemble_divergence(g, rho);
  LiftSolver solver(g, M);
  std::mt19937_64 rng(12);
  const Vec rhs = random_mean_zero(rng, g.cells());
  const Vec v = solver.lift(rhs);
  FaceWeights fw = face_weights(g, rho);
  // Flux through face i+1/2 is -dx times the mass to its left.
  double acc = 0.0;
  for (int i = 0; i + 1 < g.nx; ++i) {
    acc += rhs[i];
    const double expect = -g.dx() * acc / fw.sqrt_face[i];
    CHECK(v[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("natural_direction") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> N(0.0, 1.0);
  Mat lifts(30, 1);
  Vec dF(30);
  for (int i = 0; i < 30; ++i) {
    lifts(i, 0) = N(rng);
    dF[i] = N(rng);
  }
  NaturalDirection nd = natural_direction(lifts, dF, 0.1);
  CHECK(nd.p[0] == doctest::Approx(-dF.dot(lifts.col(0)) / lifts.col(0).squaredNorm()));
  CHECK(natural_direction(lifts, Vec::Zero(30), 0.1).p.norm() == 0.0);

  // Rank-deficient lifts take the ridge fallback.
  Mat twin(30, 2);
  twin.col(0) = lifts.col(0);
  twin.col(1) = lifts.col(0);
  NaturalDirection dup = natural_direction(twin, dF, 0.1);
  CHECK(dup.pseudo_solve);
  CHECK(dup.p.allFinite());
}

TEST_CASE("mixture loss and the Wasserstein metric") {
  MixtureProblem mp = mixture_problem(32);
  const Vec star = (Vec(2) << 1.0, 3.0).finished();
  for (int n : {16, 32, 48}) {
    MixtureProblem m = mixture_problem(n);
    MixtureLoss ml = mixture_loss(*m.model, star, m.grid, m.rho_star);
    CHECK(ml.L < 1e-20);
    CHECK(ml.grad.norm() == 0.0);
    CHECK(ml.grad_compat.norm() == 0.0);
  }

  const Vec th0 = (Vec(2) << 4.0, 4.2).finished();
  WassersteinWorkspace ws(mp.grid, *mp.model, th0);
  MixtureLoss ml = mixture_loss(*mp.model, th0, mp.grid, mp.rho_star);
  Vec e = ml.residual;
  mean_project(e);
  NaturalDirection nd = natural_direction(ws.lifts, ws.face_gradient(e), mp.grid.cell_area());
  const Vec direct = -ws.G.inverse() * ml.grad_compat;
  CHECK((nd.p - direct).norm() / direct.norm() < 1e-8);
  CHECK(ws.max_lift_residual < 1e-8);

  // The preconditioner applies the inverse metric to the raw gradient.
  WassersteinPreconditioner pre(mp.grid, mp.model);
  CHECK((pre.apply(th0, ml.grad) - ws.G.ldlt().solve(ml.grad)).norm() < 1e-10 * ml.grad.norm());
}

TEST_CASE("information matrix converges under grid refinement") {
  const Vec th0 = (Vec(2) << 4.0, 4.2).finished();
  std::vector<Mat> Gs;
  for (int n : {16, 32, 64}) {
    MixtureProblem mp = mixture_problem(n);
    WassersteinWorkspace ws(mp.grid, *mp.model, th0);
    Gs.push_back(ws.G);
  }
  const double c1 = (Gs[1] - Gs[0]).norm() / Gs[1].norm();
  const double c2 = (Gs[2] - Gs[1]).norm() / Gs[2].norm();
  CHECK(c2 < 0.05);
  CHECK(c2 < c1);
}
