#pragma once

#include "energia/barrier.hpp"
#include "energia/objective.hpp"
#include "energia/preconditioner.hpp"
#include "energia/stepper.hpp"
#include "energia/wngd.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>

namespace energia {

struct ProblemInstance {
  std::string id;
  ObjectiveSpec objective;
  Vec theta0;
  std::optional<ConstraintSet> constraints;
  std::optional<AffineConstraint> affine;
  std::shared_ptr<const LegendreBarrier> barrier;
  double alpha_cond = 0.0;
  // Draws a strictly feasible point; used by gradient and feasibility tests.
  std::function<Vec(std::mt19937_64&)> sample_feasible;
};

// f = (x1-1)^2 + alpha (x2-1)^2 on the disk (x1+0.5)^2 + (x2-1)^2 <= 1.
ProblemInstance quadratic_problem(double alpha);

// f = (x1-1)^2 + alpha (x2-x1^2)^2 on x1 < 0, x2 > 0.
ProblemInstance rosenbrock_problem(double alpha);

// Rows of U are the design vectors u_i in R^m.
struct DoptimalData {
  int m = 0;
  int n = 0;
  std::uint64_t seed = 0;
  Mat U;
};

// Standard normal entries from a 64-bit Mersenne twister and the Box-Muller
// transform (generator tag "mt19937_64-boxmuller-v1"). A draw whose information
// matrix at the uniform design is singular is regenerated from seed + 1.
DoptimalData generate_doptimal_data(int m, int n, std::uint64_t seed);
inline constexpr const char* kDoptimalGenerator = "mt19937_64-boxmuller-v1";

void save_doptimal_csv(const std::string& path, const DoptimalData& d);
DoptimalData load_doptimal_csv(const std::string& path);

struct DoptimalEval {
  double L;
  Vec grad;   // -omega
  Vec omega;  // leverage scores u_i^T S^-1 u_i
};
// Throws Error naming the support when S is singular.
DoptimalEval doptimal_eval(const DoptimalData& d, const Vec& theta);

// L = -log det(sum theta_i u_i u_i^T) on the simplex, started from the uniform design.
ProblemInstance doptimal_problem(const DoptimalData& d);

struct FwReference {
  Vec theta;
  double L = 0.0;
  double gap = 0.0;
  long iterations = 0;
  bool converged = false;
};
// Away-step Frank-Wolfe to duality gap below gap_tol.
FwReference fw_away_reference(const DoptimalData& d, double gap_tol = 1e-10, long max_iter = 1000000);

struct MixtureProblem {
  ProblemInstance problem;
  Grid2D grid;
  std::shared_ptr<const GaussianMixture> model;
  Vec rho_star;
};
// Two-component mixture fit on [0,5]^2 against rho(.; (1,3)), started from (4, 4.2).
MixtureProblem mixture_problem(int grid_n);

enum class BaselineKind { gd, hrgd, wngd, aegd, fw, fw_away };
const char* to_string(BaselineKind k);
std::optional<BaselineKind> baseline_from_string(const std::string& s);

struct BaselineContext {
  const ProblemInstance* problem = nullptr;
  const Preconditioner* precond = nullptr;  // hrgd / wngd
  const DoptimalData* data = nullptr;       // fw / fw_away
};

struct BaselineStep {
  Vec theta;
  long k = 0;
  Status status = Status::converged;  // infeasible_step / numerical_failure on failure
  double eta = 0.0;                   // step actually taken
};

// One step of a fixed-step baseline. aegd is handled by run_baseline through run_aepg.
BaselineStep baseline_step(BaselineKind kind, const BaselineContext& ctx, const Vec& theta, long k, double eta);

struct BaselineConfig {
  double eta = 0.1;
  long max_iter = 10000;
  double tol = 1e-8;
  bool record_timing = true;
};

// Runs a baseline to the objective gap tolerance (when L* is known) or to the
// stationarity measure otherwise (Frank-Wolfe uses its duality gap). The r
// column of the trace is zero for methods without an energy variable.
RunTrace run_baseline(BaselineKind kind, const BaselineContext& ctx, const BaselineConfig& cfg);

struct ProjectedPl {
  double pgrad_sq;  // |P^T grad L|^2
  double gap;       // L - L*
  double mu;
  Vec theta_star;
};
// L = (beta theta1^2 + alpha theta2^2)/2 on a theta1 + b theta2 = 1.
ProjectedPl projected_pl_example(double a, double b, double alpha, double beta, const Vec& theta);

// Central finite differences with step h * max(|x_i|, 0.01).
Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6);

}  // namespace energia
