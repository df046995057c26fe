#pragma once

#include "energia/types.hpp"

#include <memory>
#include <optional>
#include <string>

namespace energia {

class LegendreBarrier;
struct ObjectiveSpec;

// Extreme eigenvalues of the metric A = T^{-1}. Values computed on sampled
// iterates are labelled as estimates.
struct SpectralBounds {
  double lambda1 = 1.0;
  double lambdan = 1.0;
  bool estimate = true;
};

struct PrecondInfo {
  std::string kind;
  Eigen::Index dimension = 0;
  std::optional<SpectralBounds> bounds;
};

// Contract for T(theta): apply returns v = T(theta) g.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual Vec apply(const Vec& theta, const Vec& g) const = 0;
  virtual PrecondInfo describe() const = 0;
  // Spectrum of the metric at a specific point, if it can be computed.
  virtual std::optional<SpectralBounds> spectrum_at(const Vec& theta) const;
};

// Affine equality set {theta : B theta = b}.
struct AffineConstraint {
  Mat B;
  Vec b;
  AffineConstraint() = default;
  AffineConstraint(Mat B_, Vec b_);  // validates full row rank
  Eigen::Index rows() const { return B.rows(); }
  double residual(const Vec& theta) const;
};

// v = A^{-1} g via Cholesky. Throws FactorizationError for non-SPD input.
Vec fixed_spd_apply(const Mat& A, const Vec& g);

// P = I - G^{-1} B^T (B G^{-1} B^T)^{-1} B. With zero rows, P = I.
Mat projection_matrix(const Mat& G, const Mat& B);

// Hessian-Riemannian direction with optional affine projection.
Vec hr_apply(const LegendreBarrier& h, const AffineConstraint* constraint, const Vec& theta, const Vec& g);

// Closed form (diag(theta) - theta theta^T / sum(theta)) g on the simplex.
Vec simplex_apply(const Vec& theta, const Vec& g);

// Affine parametrization phi(z) = x0 + Z z of {B x = b}, where Z = (W; I) after
// undoing the column permutation chosen by pivoting on B.
struct AffineParametrization {
  Mat Z;
  Vec x0;
  Eigen::VectorXi pivots;  // first m entries are the pivot (dependent) columns
};
AffineParametrization affine_parametrization(const AffineConstraint& c, const Vec& feasible_point);

// || D phi p_nat - hr_apply(h, B, theta, -grad f) ||.
double ngd_equivalence_check(const LegendreBarrier& h, const AffineConstraint& c, const ObjectiveSpec& f,
                             const Vec& theta);

class IdentityPreconditioner final : public Preconditioner {
 public:
  explicit IdentityPreconditioner(Eigen::Index n) : n_(n) {}
  Vec apply(const Vec&, const Vec& g) const override { return g; }
  PrecondInfo describe() const override;
  std::optional<SpectralBounds> spectrum_at(const Vec&) const override { return SpectralBounds{1.0, 1.0, false}; }

 private:
  Eigen::Index n_;
};

class FixedSpdPreconditioner final : public Preconditioner {
 public:
  explicit FixedSpdPreconditioner(Mat A);
  Vec apply(const Vec&, const Vec& g) const override;
  PrecondInfo describe() const override;
  std::optional<SpectralBounds> spectrum_at(const Vec&) const override { return bounds_; }

 private:
  Mat A_;
  Eigen::LLT<Mat> llt_;
  SpectralBounds bounds_;
};

class HessianRiemannianPreconditioner final : public Preconditioner {
 public:
  HessianRiemannianPreconditioner(std::shared_ptr<const LegendreBarrier> h,
                                  std::optional<AffineConstraint> constraint = std::nullopt);
  Vec apply(const Vec& theta, const Vec& g) const override;
  PrecondInfo describe() const override;
  std::optional<SpectralBounds> spectrum_at(const Vec& theta) const override;
  const LegendreBarrier& barrier() const { return *h_; }

 private:
  std::shared_ptr<const LegendreBarrier> h_;
  std::optional<AffineConstraint> constraint_;
};

class SimplexPreconditioner final : public Preconditioner {
 public:
  explicit SimplexPreconditioner(Eigen::Index n) : n_(n) {}
  Vec apply(const Vec& theta, const Vec& g) const override;
  PrecondInfo describe() const override;
  std::optional<SpectralBounds> spectrum_at(const Vec& theta) const override;

 private:
  Eigen::Index n_;
};

}  // namespace energia
