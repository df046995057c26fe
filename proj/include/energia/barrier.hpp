#pragma once

#include "energia/types.hpp"

#include <vector>

namespace energia {

enum class ConstraintKind { affine, ball, sign };

// One concave constraint U(theta) >= 0.
//   affine: U = a.theta - b   (bounds theta_i - lo use a = e_i)
//   ball:   U = 1 - (theta - center)^T S (theta - center)
//   sign:   U = s * theta_i with s = +1 or -1
struct Constraint {
  ConstraintKind kind = ConstraintKind::affine;
  Vec a;
  double b = 0.0;
  Vec center;
  Mat S;
  Eigen::Index index = -1;  // coordinate for sign kind
  double sign = 1.0;

  static Constraint affine(Vec a, double b);
  static Constraint lower_bound(Eigen::Index n, Eigen::Index i, double lo);
  static Constraint sign_of(Eigen::Index n, Eigen::Index i, double s);
  static Constraint ball(Vec center, Mat S);

  double value(const Vec& theta) const;
  Vec grad(const Vec& theta) const;
  Mat hess(Eigen::Index n) const;
  // True when grad is a constant multiple of a single unit vector.
  bool single_coordinate(Eigen::Index* coord, double* coef) const;
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  // The witness must be strictly feasible; throws Error otherwise.
  ConstraintSet(Eigen::Index dim, std::vector<Constraint> list, const Vec& witness);

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return list_.size(); }
  const Constraint& operator[](std::size_t i) const { return list_[i]; }
  const std::vector<Constraint>& list() const { return list_; }
  const Vec& witness() const { return witness_; }

  Vec values(const Vec& theta) const;
  double min_value(const Vec& theta) const;
  bool strictly_feasible(const Vec& theta) const { return min_value(theta) > 0.0; }

 private:
  Eigen::Index dim_ = 0;
  std::vector<Constraint> list_;
  Vec witness_;
};

enum class Kernel { entropy, log };

double kernel_value(Kernel K, double s);
double kernel_d1(Kernel K, double s);
double kernel_d2(Kernel K, double s);

// h = sum_i K(U_i) + (1/2) theta^T C theta.
// C is the orthogonal projector onto the directions on which every constraint
// is flat to second order at the witness; it is zero when no such direction exists.
class LegendreBarrier {
 public:
  LegendreBarrier(ConstraintSet constraints, Kernel kernel = Kernel::entropy, bool auto_correct = true);

  Eigen::Index dim() const { return cons_.dim(); }
  Kernel kernel() const { return kernel_; }
  const ConstraintSet& constraints() const { return cons_; }
  const Mat& correction() const { return C_; }
  bool corrected() const { return corrected_; }

  double value(const Vec& theta) const;
  Vec grad(const Vec& theta) const;
  Mat hess(const Vec& theta) const;
  // Diagonal of the Hessian when every constraint acts on one coordinate and no
  // off-diagonal correction is present.
  bool is_diagonal() const { return diagonal_; }
  Vec hess_diag(const Vec& theta) const;
  Vec hess_inv_apply(const Vec& theta, const Vec& g) const;

 private:
  void require_interior(const Vec& theta) const;

  ConstraintSet cons_;
  Kernel kernel_;
  Mat C_;
  bool corrected_ = false;
  bool diagonal_ = false;
};

Mat barrier_hess(const LegendreBarrier& h, const Vec& theta);
Vec barrier_grad(const LegendreBarrier& h, const Vec& theta);
Vec barrier_hess_inv_apply(const LegendreBarrier& h, const Vec& theta, const Vec& g);

struct Bregman {
  double divergence;
  double h_xi;
  double h_theta;
};
Bregman bregman_divergence(const LegendreBarrier& h, const Vec& xi, const Vec& theta);

struct LineSearchResult {
  double eta = 0.0;
  bool ok = false;
  int evaluations = 0;
};

// Largest eta in (0, eta_star] (up to bisection tolerance) such that the candidate
// theta - 2 eta r v / (1 + 2 eta |v|^2) keeps every U_i >= eps_feas * U_i(theta).
LineSearchResult feasible_line_search(const Vec& theta, const Vec& v, double r, const ConstraintSet& cons,
                                      double eps_feas, double eta_star, double eta_min = 1e-12,
                                      int bisection_steps = 30);

}  // namespace energia
