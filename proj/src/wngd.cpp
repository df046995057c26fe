#include "energia/wngd.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace energia {

Grid2D Grid2D::strip(double lo, double hi, int n) {
  Grid2D g;
  g.lo = lo;
  g.hi = hi;
  g.nx = n;
  g.ny = 1;
  g.validate();
  return g;
}

void Grid2D::validate() const {
  if (nx < 4 || ny < 1) throw Error("grid needs at least 4 cells per dimension");
  if (!(hi > lo)) throw Error("grid needs hi > lo");
}

Vec GaussianMixture::density(const Grid2D& g, const Vec& theta) const {
  Vec rho(g.cells());
  const double norm = 1.0 / (2.0 * std::numbers::pi);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j) {
      const double x = g.xc(i), y = g.yc(j);
      const double g1 = norm * std::exp(-0.5 * ((x - theta[0]) * (x - theta[0]) + (y - y1_) * (y - y1_)));
      const double g2 = norm * std::exp(-0.5 * ((x - theta[1]) * (x - theta[1]) + (y - y2_) * (y - y2_)));
      rho[g.idx(i, j)] = w_ * g1 + (1.0 - w_) * g2;
    }
  return rho;
}

Mat GaussianMixture::derivatives(const Grid2D& g, const Vec& theta) const {
  Mat d(g.cells(), 2);
  const double norm = 1.0 / (2.0 * std::numbers::pi);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j) {
      const double x = g.xc(i), y = g.yc(j);
      const double g1 = norm * std::exp(-0.5 * ((x - theta[0]) * (x - theta[0]) + (y - y1_) * (y - y1_)));
      const double g2 = norm * std::exp(-0.5 * ((x - theta[1]) * (x - theta[1]) + (y - y2_) * (y - y2_)));
      d(g.idx(i, j), 0) = w_ * g1 * (x - theta[0]);
      d(g.idx(i, j), 1) = (1.0 - w_) * g2 * (x - theta[1]);
    }
  return d;
}

FaceWeights face_weights(const Grid2D& g, const Vec& rho, double floor_rel) {
  FaceWeights fw;
  const double floor = floor_rel * rho.maxCoeff();
  Vec s(rho.size());
  for (Eigen::Index c = 0; c < rho.size(); ++c) {
    double v = rho[c];
    if (!(v > floor)) {
      v = floor;
      fw.floor_active = true;
    }
    s[c] = std::sqrt(v);
  }
  fw.sqrt_face.resize(g.faces());
  int f = 0;
  for (int i = 0; i + 1 < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j) fw.sqrt_face[f++] = 0.5 * (s[g.idx(i, j)] + s[g.idx(i + 1, j)]);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j + 1 < g.ny; ++j) fw.sqrt_face[f++] = 0.5 * (s[g.idx(i, j)] + s[g.idx(i, j + 1)]);
  return fw;
}

SpMat assemble_divergence(const Grid2D& g, const Vec& rho, bool* floor_active) {
  FaceWeights fw = face_weights(g, rho);
  if (floor_active) *floor_active = fw.floor_active;
  const double inv_dx = 1.0 / g.dx();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * static_cast<std::size_t>(g.faces()));
  // A positive face velocity carries mass from the lower-index cell to the upper one.
  int f = 0;
  for (int i = 0; i + 1 < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j, ++f) {
      trip.emplace_back(g.idx(i, j), f, -fw.sqrt_face[f] * inv_dx);
      trip.emplace_back(g.idx(i + 1, j), f, fw.sqrt_face[f] * inv_dx);
    }
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j + 1 < g.ny; ++j, ++f) {
      trip.emplace_back(g.idx(i, j), f, -fw.sqrt_face[f] * inv_dx);
      trip.emplace_back(g.idx(i, j + 1), f, fw.sqrt_face[f] * inv_dx);
    }
  SpMat M(g.cells(), g.faces());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

LiftSolver::LiftSolver(const Grid2D& grid, SpMat M) : grid_(grid), M_(std::move(M)) {
  SpMat A = M_ * SpMat(M_.transpose());
  const Eigen::Index n = A.rows();
  // The weighted Laplacian M M^T has the constants as its kernel; fixing phi at
  // cell 0 leaves a nonsingular system whose solution solves the full one for
  // right-hand sides with zero sum.
  SpMat Ag = A.bottomRightCorner(n - 1, n - 1);
  ldlt_.compute(Ag);
  if (ldlt_.info() != Eigen::Success) throw FactorizationError("lift: grounded Laplacian factorization failed");
}

Vec LiftSolver::lift(const Vec& g, double tol) const {
  const double gn = g.norm();
  if (gn == 0.0) {
    last_residual_ = 0.0;
    return Vec::Zero(M_.cols());
  }
  Vec phi = Vec::Zero(g.size());
  phi.tail(g.size() - 1) = ldlt_.solve(g.tail(g.size() - 1));
  Vec v = M_.transpose() * phi;
  last_residual_ = (M_ * v - g).norm() / gn;
  if (!(last_residual_ <= tol))
    throw Error("ill-posed lift: relative constraint residual " + std::to_string(last_residual_));
  return v;
}

Vec tangent_lift(const LiftSolver& solver, const Vec& g_cells, double tol) { return solver.lift(g_cells, tol); }

double mean_project(Vec& g) {
  const double m = g.mean();
  g.array() -= m;
  return m;
}

Mat information_matrix(const Mat& lifts, double cell_area) {
  Mat G = lifts.transpose() * lifts * cell_area;
  return 0.5 * (G + G.transpose());
}

NaturalDirection natural_direction(const Mat& lifts, const Vec& dF_face, double cell_area) {
  NaturalDirection nd;
  const Mat G = information_matrix(lifts, cell_area);
  const Vec beta = lifts.transpose() * dF_face * cell_area;
  Eigen::LLT<Mat> llt(G);
  const double n = static_cast<double>(G.rows());
  if (llt.info() == Eigen::Success && G.diagonal().minCoeff() > 1e-12 * G.trace() / n) {
    nd.p = -llt.solve(beta);
  } else {
    nd.pseudo_solve = true;
    Mat Gr = G + (1e-12 * G.trace() / n) * Mat::Identity(G.rows(), G.cols());
    nd.p = -Gr.ldlt().solve(beta);
  }
  return nd;
}

WassersteinWorkspace::WassersteinWorkspace(const Grid2D& g, const DensityModel& model, const Vec& th)
    : grid(g), theta(th) {
  rho = model.density(grid, theta);
  drho = model.derivatives(grid, theta);
  removed_mean.resize(drho.cols());
  for (Eigen::Index i = 0; i < drho.cols(); ++i) {
    Vec col = drho.col(i);
    removed_mean[i] = mean_project(col);
    drho.col(i) = col;
  }
  solver = std::make_unique<LiftSolver>(grid, assemble_divergence(grid, rho, &floor_active));
  lifts.resize(grid.faces(), drho.cols());
  for (Eigen::Index i = 0; i < drho.cols(); ++i) {
    lifts.col(i) = solver->lift(drho.col(i));
    max_lift_residual = std::max(max_lift_residual, solver->last_residual());
  }
  G = information_matrix(lifts, grid.cell_area());
}

Vec WassersteinWorkspace::face_gradient(const Vec& psi) const { return solver->M().transpose() * psi; }

MixtureLoss mixture_loss(const DensityModel& model, const Vec& theta, const Grid2D& grid, const Vec& rho_star) {
  MixtureLoss out;
  const Vec rho = model.density(grid, theta);
  const Mat d = model.derivatives(grid, theta);
  const double a = grid.cell_area();
  out.residual = rho - rho_star;
  out.L = 0.5 * out.residual.squaredNorm() * a;
  out.grad = d.transpose() * out.residual * a;
  Vec e = out.residual;
  mean_project(e);
  Mat dp = d;
  for (Eigen::Index i = 0; i < dp.cols(); ++i) dp.col(i).array() -= dp.col(i).mean();
  out.grad_compat = dp.transpose() * e * a;
  return out;
}

Vec WassersteinPreconditioner::apply(const Vec& theta, const Vec& g) const {
  WassersteinWorkspace ws(grid_, *model_, theta);
  Eigen::LLT<Mat> llt(ws.G);
  if (llt.info() == Eigen::Success) return llt.solve(g);
  const double n = static_cast<double>(ws.G.rows());
  Mat Gr = ws.G + (1e-12 * ws.G.trace() / n) * Mat::Identity(ws.G.rows(), ws.G.cols());
  return Gr.ldlt().solve(g);
}

PrecondInfo WassersteinPreconditioner::describe() const { return {"wasserstein", model_->dim(), std::nullopt}; }

std::optional<SpectralBounds> WassersteinPreconditioner::spectrum_at(const Vec& theta) const {
  WassersteinWorkspace ws(grid_, *model_, theta);
  Eigen::SelfAdjointEigenSolver<Mat> es(ws.G, Eigen::EigenvaluesOnly);
  return SpectralBounds{es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), true};
}

}  // namespace energia
