#pragma once

#include "energia/preconditioner.hpp"
#include "energia/types.hpp"

#include <Eigen/Sparse>

#include <memory>

namespace energia {

using SpMat = Eigen::SparseMatrix<double>;

// Cell-centered grid on [lo, hi] x [lo, lo + ny*dx] with square cells of side dx = (hi-lo)/nx.
// The default is the square domain [0,5]^2.
struct Grid2D {
  double lo = 0.0;
  double hi = 5.0;
  int nx = 64;
  int ny = 64;

  Grid2D() = default;
  Grid2D(double lo_, double hi_, int n) : lo(lo_), hi(hi_), nx(n), ny(n) { validate(); }
  static Grid2D strip(double lo, double hi, int n);  // ny = 1

  void validate() const;
  double dx() const { return (hi - lo) / nx; }
  double cell_area() const { return dx() * dx(); }
  int cells() const { return nx * ny; }
  int x_faces() const { return (nx - 1) * ny; }
  int y_faces() const { return nx * (ny - 1); }
  int faces() const { return x_faces() + y_faces(); }
  int idx(int i, int j) const { return i * ny + j; }
  double xc(int i) const { return lo + (i + 0.5) * dx(); }
  double yc(int j) const { return lo + (j + 0.5) * dx(); }
};

// Parametric density rho(theta, x) with analytic parameter derivatives.
class DensityModel {
 public:
  virtual ~DensityModel() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Vec density(const Grid2D& g, const Vec& theta) const = 0;
  // Column i holds d rho / d theta_i at every cell.
  virtual Mat derivatives(const Grid2D& g, const Vec& theta) const = 0;
};

// w N(x; (theta1, y1), I) + (1-w) N(x; (theta2, y2), I), unnormalized on the grid.
class GaussianMixture final : public DensityModel {
 public:
  explicit GaussianMixture(double w = 0.05, double y1 = 3.0, double y2 = 2.0) : w_(w), y1_(y1), y2_(y2) {}
  Eigen::Index dim() const override { return 2; }
  Vec density(const Grid2D& g, const Vec& theta) const override;
  Mat derivatives(const Grid2D& g, const Vec& theta) const override;

 private:
  double w_, y1_, y2_;
};

// Face values of sqrt(rho), after flooring rho at floor_rel * max(rho).
struct FaceWeights {
  Vec sqrt_face;
  bool floor_active = false;
};
FaceWeights face_weights(const Grid2D& g, const Vec& rho, double floor_rel = 1e-12);

// M v = -div(sqrt(rho) v) on staggered interior faces with zero normal flux on the boundary.
SpMat assemble_divergence(const Grid2D& g, const Vec& rho, bool* floor_active = nullptr);

// Min-norm solver for M v = g: v = M^T phi with (M M^T) phi = g, grounded at cell 0.
class LiftSolver {
 public:
  LiftSolver(const Grid2D& grid, SpMat M);
  // g must have zero grid integral; throws if the constraint residual exceeds tol * |g|.
  Vec lift(const Vec& g, double tol = 1e-8) const;
  const SpMat& M() const { return M_; }
  double last_residual() const { return last_residual_; }

 private:
  Grid2D grid_;
  SpMat M_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  mutable double last_residual_ = 0.0;
};

Vec tangent_lift(const LiftSolver& solver, const Vec& g_cells, double tol = 1e-8);

// Subtract the grid mean so that the quadrature integral vanishes; returns the removed mean.
double mean_project(Vec& g);

// G_ij = <v_i, v_j> dx^2 over face values.
Mat information_matrix(const Mat& lifts, double cell_area);

struct NaturalDirection {
  Vec p;
  bool pseudo_solve = false;  // ridge was needed
};
// Least-squares coefficients: G p = -beta with beta_i = <dF, v_i> dx^2.
NaturalDirection natural_direction(const Mat& lifts, const Vec& dF_face, double cell_area);

// Everything the Wasserstein direction needs at one parameter value.
struct WassersteinWorkspace {
  Grid2D grid;
  Vec theta;
  Vec rho;
  Mat drho;          // mean-projected parameter derivatives (cells x n)
  Vec removed_mean;  // per-parameter mean removed from drho
  std::unique_ptr<LiftSolver> solver;
  Mat lifts;  // faces x n
  Mat G;
  bool floor_active = false;
  double max_lift_residual = 0.0;

  WassersteinWorkspace(const Grid2D& grid, const DensityModel& model, const Vec& theta);
  // Discrete sqrt(rho) grad(psi) on faces, i.e. M^T psi.
  Vec face_gradient(const Vec& psi_cells) const;
};

struct MixtureLoss {
  double L = 0.0;
  Vec grad;         // chain rule with the raw parameter derivatives
  Vec grad_compat;  // chain rule with mean-projected derivatives and residual
  Vec residual;     // rho - rho_star per cell
};
// L = (1/2) sum (rho - rho*)^2 dx^2.
MixtureLoss mixture_loss(const DensityModel& model, const Vec& theta, const Grid2D& grid, const Vec& rho_star);

// T(theta) = G(theta)^{-1}.
class WassersteinPreconditioner final : public Preconditioner {
 public:
  WassersteinPreconditioner(Grid2D grid, std::shared_ptr<const DensityModel> model)
      : grid_(grid), model_(std::move(model)) {}
  Vec apply(const Vec& theta, const Vec& g) const override;
  PrecondInfo describe() const override;
  std::optional<SpectralBounds> spectrum_at(const Vec& theta) const override;

 private:
  Grid2D grid_;
  std::shared_ptr<const DensityModel> model_;
};

}  // namespace energia
