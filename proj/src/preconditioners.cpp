#include "energia/barrier.hpp"
#include "energia/objective.hpp"
#include "energia/preconditioner.hpp"

#include <cmath>
#include <sstream>

namespace energia {

std::optional<SpectralBounds> Preconditioner::spectrum_at(const Vec&) const { return std::nullopt; }

AffineConstraint::AffineConstraint(Mat B_, Vec b_) : B(std::move(B_)), b(std::move(b_)) {
  if (B.rows() != b.size()) throw Error("affine constraint: B and b row counts differ");
  if (B.rows() == 0) return;
  if (B.rows() >= B.cols()) throw Error("affine constraint: need fewer rows than columns");
  Eigen::ColPivHouseholderQR<Mat> qr(B);
  qr.setThreshold(1e-10);
  if (qr.rank() != B.rows()) throw Error("affine constraint: B is rank deficient");
}

double AffineConstraint::residual(const Vec& theta) const {
  if (B.rows() == 0) return 0.0;
  return (B * theta - b).cwiseAbs().maxCoeff();
}

Vec fixed_spd_apply(const Mat& A, const Vec& g) {
  if ((A - A.transpose()).norm() > 1e-12 * std::max(1.0, A.norm()))
    throw FactorizationError("fixed SPD preconditioner: matrix is not symmetric");
  Eigen::LLT<Mat> llt(A);
  if (llt.info() != Eigen::Success) throw FactorizationError("fixed SPD preconditioner: Cholesky factorization failed");
  return llt.solve(g);
}

namespace {

// Row indices of B that a pivoted QR of the (metric-weighted) rows marks as dependent.
Eigen::ColPivHouseholderQR<Mat> rank_revealing(const Mat& rows_as_columns) {
  Eigen::ColPivHouseholderQR<Mat> qr(rows_as_columns);
  qr.setThreshold(1e-10);
  return qr;
}

bool has_dependent_rows(const Mat& rows_as_columns) {
  return rank_revealing(rows_as_columns).rank() < rows_as_columns.cols();
}

std::string dependent_rows(const Mat& rows_as_columns) {
  const auto qr = rank_revealing(rows_as_columns);
  std::ostringstream os;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = qr.rank(); i < perm.size(); ++i) os << (i > qr.rank() ? "," : "") << perm[i];
  return os.str();
}

// X S^{-1} (B w) with X = M^{-1} B^T and S = B X.
Vec schur_correction(const Mat& B, const Mat& X, const Vec& w) {
  Mat S = B * X;
  Eigen::LDLT<Mat> ldlt(S);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14 || has_dependent_rows(X))
    throw FactorizationError("B G^-1 B^T is numerically singular; dependent constraint rows: " +
                             dependent_rows(X));
  return X * ldlt.solve(B * w);
}

}  // namespace

Mat projection_matrix(const Mat& G, const Mat& B) {
  const Eigen::Index n = G.rows();
  if (B.rows() == 0) return Mat::Identity(n, n);
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success) throw FactorizationError("projection: G is not positive definite");
  Mat X = llt.solve(B.transpose());
  Mat S = B * X;
  Eigen::LDLT<Mat> ldlt(S);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14 || has_dependent_rows(X))
    throw FactorizationError("projection: B G^-1 B^T is numerically singular; dependent constraint rows: " +
                             dependent_rows(X));
  return Mat::Identity(n, n) - X * ldlt.solve(B);
}

Vec hr_apply(const LegendreBarrier& h, const AffineConstraint* c, const Vec& theta, const Vec& g) {
  Vec w = h.hess_inv_apply(theta, g);
  if (c == nullptr || c->rows() == 0) return w;
  const Mat& B = c->B;
  Mat X(B.cols(), B.rows());
  for (Eigen::Index i = 0; i < B.rows(); ++i) X.col(i) = h.hess_inv_apply(theta, B.row(i).transpose());
  return w - schur_correction(B, X, w);
}

Vec simplex_apply(const Vec& theta, const Vec& g) {
  const double s = theta.sum();
  if ((theta.array() < 0.0).any() || std::fabs(s - 1.0) > 1e-10)
    throw Error("simplex preconditioner: point is off the probability simplex");
  // The Schur complement is sum(theta); dividing by it keeps 1^T v = 0 exact
  // even when rounding has moved the sum slightly away from one.
  return theta.cwiseProduct(g) - theta * (theta.dot(g) / s);
}

AffineParametrization affine_parametrization(const AffineConstraint& c, const Vec& x0) {
  const Mat& B = c.B;
  const Eigen::Index m = B.rows(), n = B.cols();
  Eigen::ColPivHouseholderQR<Mat> qr(B);
  qr.setThreshold(1e-10);
  if (qr.rank() != m) throw Error("affine parametrization: B is rank deficient");
  AffineParametrization ap;
  ap.pivots = qr.colsPermutation().indices();
  ap.x0 = x0;
  Mat Bb(m, m), Bf(m, n - m);
  for (Eigen::Index j = 0; j < m; ++j) Bb.col(j) = B.col(ap.pivots[j]);
  for (Eigen::Index j = 0; j < n - m; ++j) Bf.col(j) = B.col(ap.pivots[m + j]);
  Mat W = -Bb.partialPivLu().solve(Bf);
  ap.Z = Mat::Zero(n, n - m);
  for (Eigen::Index j = 0; j < m; ++j) ap.Z.row(ap.pivots[j]) = W.row(j);
  for (Eigen::Index j = 0; j < n - m; ++j) ap.Z(ap.pivots[m + j], j) = 1.0;
  return ap;
}

double ngd_equivalence_check(const LegendreBarrier& h, const AffineConstraint& c, const ObjectiveSpec& f,
                             const Vec& theta) {
  if (c.rows() == 0) throw Error("ngd equivalence check needs at least one constraint row");
  AffineParametrization ap = affine_parametrization(c, theta);
  const Vec gf = f.grad(theta);
  const Mat H = h.hess(theta);
  const Mat G = ap.Z.transpose() * H * ap.Z;
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success) throw FactorizationError("ngd check: information matrix not positive definite");
  const Vec p_nat = -llt.solve(ap.Z.transpose() * gf);
  return (ap.Z * p_nat - hr_apply(h, &c, theta, -gf)).norm();
}

PrecondInfo IdentityPreconditioner::describe() const { return {"identity", n_, SpectralBounds{1.0, 1.0, false}}; }

FixedSpdPreconditioner::FixedSpdPreconditioner(Mat A) : A_(std::move(A)), llt_(A_) {
  if ((A_ - A_.transpose()).norm() > 1e-12 * std::max(1.0, A_.norm()))
    throw FactorizationError("fixed SPD preconditioner: matrix is not symmetric");
  if (llt_.info() != Eigen::Success) throw FactorizationError("fixed SPD preconditioner: Cholesky factorization failed");
  Eigen::SelfAdjointEigenSolver<Mat> es(A_, Eigen::EigenvaluesOnly);
  bounds_ = {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), false};
}

Vec FixedSpdPreconditioner::apply(const Vec&, const Vec& g) const { return llt_.solve(g); }

PrecondInfo FixedSpdPreconditioner::describe() const { return {"fixed_spd", A_.rows(), bounds_}; }

HessianRiemannianPreconditioner::HessianRiemannianPreconditioner(std::shared_ptr<const LegendreBarrier> h,
                                                                 std::optional<AffineConstraint> constraint)
    : h_(std::move(h)), constraint_(std::move(constraint)) {}

Vec HessianRiemannianPreconditioner::apply(const Vec& theta, const Vec& g) const {
  return hr_apply(*h_, constraint_ ? &*constraint_ : nullptr, theta, g);
}

PrecondInfo HessianRiemannianPreconditioner::describe() const {
  return {constraint_ ? "hessian_riemannian_projected" : "hessian_riemannian", h_->dim(), std::nullopt};
}

std::optional<SpectralBounds> HessianRiemannianPreconditioner::spectrum_at(const Vec& theta) const {
  if (h_->is_diagonal()) {
    Vec d = h_->hess_diag(theta);
    return SpectralBounds{d.minCoeff(), d.maxCoeff(), true};
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(h_->hess(theta), Eigen::EigenvaluesOnly);
  return SpectralBounds{es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), true};
}

Vec SimplexPreconditioner::apply(const Vec& theta, const Vec& g) const { return simplex_apply(theta, g); }

PrecondInfo SimplexPreconditioner::describe() const { return {"simplex", n_, std::nullopt}; }

std::optional<SpectralBounds> SimplexPreconditioner::spectrum_at(const Vec& theta) const {
  return SpectralBounds{1.0 / theta.maxCoeff(), 1.0 / theta.minCoeff(), true};
}

}  // namespace energia
