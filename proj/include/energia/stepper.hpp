#pragma once

#include "energia/objective.hpp"
#include "energia/preconditioner.hpp"
#include "energia/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace energia {

class ConstraintSet;

struct EnergyState {
  Vec theta;
  double r = 1.0;
  long k = 0;
};

struct StepResult {
  EnergyState state;
  Status status = Status::converged;  // numerical_failure when v or |v|^2 is not finite
};

// r' = r / (1 + 2 eta |v|^2), theta' = theta - 2 eta r' v.
StepResult aepg_step(const EnergyState& state, const Vec& v, double eta);

enum class StopMode { objective_gap, gradient_norm, projected_gradient_norm, iteration_budget };

struct AepgConfig {
  double eta = 0.1;
  std::optional<double> r0;  // default l(theta0)
  long max_iter = 10000;
  double tol = 1e-8;
  std::optional<StopMode> stop_mode;  // default: objective_gap if L* known, else gradient_norm
  double eps_feas = 0.5;
  std::optional<double> eta_star;  // line-search cap, default eta
  bool record_timing = true;
  // Called with every accepted iterate, including theta0.
  std::function<void(long, const Vec&)> on_iterate;
};

struct StepRecord {
  long k = 0;
  double L = 0.0;
  double r = 0.0;
  double v_norm = 0.0;
  double grad_norm = 0.0;
  double dtheta_norm = 0.0;
  double eta_eff = 0.0;  // eta_k r_{k+1} / l(theta_k)
  double t_us = 0.0;
  double eta = 0.0;      // step actually used (after line search)
  double l = 0.0;
};

struct RunTrace {
  std::vector<StepRecord> records;
  Status status = Status::budget_exhausted;
  std::string message;
  Vec theta0;
  Vec theta_final;
  double L_final = 0.0;
  double r_final = 0.0;
  double r0 = 0.0;
  double l0 = 0.0;
  double c = 0.0;
  double eta = 0.0;  // base step
  long iterations() const { return static_cast<long>(records.size()) - (status == Status::converged ? 1 : 0); }
  // Running extremes of the metric spectrum over visited iterates, when available.
  std::optional<SpectralBounds> spectrum;
};

// Full AEPG loop. With `feasibility`, each step size comes from the feasibility
// line search capped at eta_star. With `affine`, the projected_gradient_norm
// stop uses the Euclidean projection of the gradient onto ker B.
// When `track_spectrum` is set, the preconditioner spectrum is sampled at each iterate.
RunTrace run_aepg(const ObjectiveSpec& objective, const Preconditioner& precond, const Vec& theta0,
                  const AepgConfig& config, const ConstraintSet* feasibility = nullptr,
                  const AffineConstraint* affine = nullptr, bool track_spectrum = false);

struct SmoothnessProfile {
  double alpha = 0.0;
  double lambda1 = 1.0;
  double lambdan = 1.0;
  double lstar = 1.0;
  double r0 = 1.0;
};

struct StepBounds {
  double eta_s;
  double eta_0;
  double safe;          // min(eta_s, eta_0)
  bool r0_sufficient;   // r0 >= (l(theta0) - l*) / lambda1
};

StepBounds compute_step_bounds(const SmoothnessProfile& p, double l_theta0);

// Lower bound on r_k guaranteed when eta < eta_s.
double energy_floor(const SmoothnessProfile& p, double eta_s, double eta);

// Smallest c for which l(theta0) >= margin (l(theta0) - l*) / lambda1 holds; margin 1
// gives the exact threshold. Returns -infinity when any c works.
double shift_for_energy_floor(double L0, double Lstar, double lambda1, double margin);

struct EnergyReport {
  double max_residual = 0.0;
  double path_length_sq = 0.0;  // sum |dtheta|^2
  double path_bound = 0.0;      // eta_max r0^2
  bool path_ok = true;
  bool monotone = true;
  long violations = 0;          // steps with residual above tolerance or increasing r
};

// Step-wise residual of r_{k+1}^2 - r_k^2 + (r_{k+1}-r_k)^2 + |dtheta|^2/eta_k,
// normalized by max(r_k^2, 1). Uses the recorded step sizes unless `etas` is given.
EnergyReport check_energy_identity(const RunTrace& trace, std::span<const double> etas = {},
                                   double tol = 1e-12);

enum class RateRegime { general, pl, convex, projected_pl, smoothness_envelope };

struct BoundReport {
  bool accepted = true;  // false when required metadata is missing
  std::string message;
  std::vector<double> margins;  // bound - observed, per k (k = 0 vacuous)
  // Smallest margin over k >= 1 (the k = 0 term is an identity for some regimes).
  double tightest = 0.0;
  long violations = 0;
  bool pass() const { return accepted && violations == 0; }
};

BoundReport check_rate_bounds(const RunTrace& trace, const SmoothnessProfile& profile, const ObjectiveSpec& objective,
                              RateRegime regime, double slack = 1e-9);

const char* to_string(StopMode m);
const char* to_string(RateRegime r);

}  // namespace energia
