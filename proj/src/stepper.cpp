#include "energia/stepper.hpp"

#include "energia/barrier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace energia {

const char* to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::budget_exhausted: return "budget_exhausted";
    case Status::infeasible_step: return "infeasible_step";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

const char* to_string(StopMode m) {
  switch (m) {
    case StopMode::objective_gap: return "objective_gap";
    case StopMode::gradient_norm: return "gradient_norm";
    case StopMode::projected_gradient_norm: return "projected_gradient_norm";
    case StopMode::iteration_budget: return "iteration_budget";
  }
  return "unknown";
}

const char* to_string(RateRegime r) {
  switch (r) {
    case RateRegime::general: return "general";
    case RateRegime::pl: return "pl";
    case RateRegime::convex: return "convex";
    case RateRegime::projected_pl: return "projected_pl";
    case RateRegime::smoothness_envelope: return "smoothness_envelope";
  }
  return "unknown";
}

StepResult aepg_step(const EnergyState& state, const Vec& v, double eta) {
  StepResult out{state, Status::converged};
  const double vv = v.squaredNorm();
  if (!v.allFinite() || !std::isfinite(vv) || !(eta > 0.0)) {
    out.status = Status::numerical_failure;
    return out;
  }
  const double r_next = state.r / (1.0 + 2.0 * eta * vv);
  out.state.r = r_next;
  out.state.theta = state.theta - (2.0 * eta * r_next) * v;
  out.state.k = state.k + 1;
  if (!out.state.theta.allFinite()) out.status = Status::numerical_failure;
  return out;
}

namespace {

double projected_norm(const Vec& g, const AffineConstraint* affine) {
  if (affine == nullptr || affine->rows() == 0) return g.norm();
  const Mat& B = affine->B;
  Mat BBt = B * B.transpose();
  Vec lam = BBt.ldlt().solve(B * g);
  return (g - B.transpose() * lam).norm();
}

}  // namespace

RunTrace run_aepg(const ObjectiveSpec& obj, const Preconditioner& precond, const Vec& theta0, const AepgConfig& cfg,
                  const ConstraintSet* feas, const AffineConstraint* affine, bool track_spectrum) {
  if (!(cfg.eta > 0.0)) throw Error("eta must be positive");
  if (cfg.eps_feas < 0.0 || cfg.eps_feas > 0.5) throw Error("eps_feas must lie in [0, 1/2]");
  if (feas != nullptr && !feas->strictly_feasible(theta0))
    throw BoundaryError("initial point is not strictly feasible", feas->min_value(theta0));

  RunTrace tr;
  tr.theta0 = theta0;
  tr.c = obj.c;
  tr.eta = cfg.eta;
  const double L0 = obj.eval(theta0);
  if (!std::isfinite(L0) || !(L0 + obj.c > 0.0))
    throw Error("L(theta0) + c must be finite and positive (c = " + std::to_string(obj.c) + ")");
  tr.l0 = std::sqrt(L0 + obj.c);
  tr.r0 = cfg.r0.value_or(tr.l0);
  if (!(tr.r0 > 0.0)) throw Error("r0 must be positive");

  StopMode mode = cfg.stop_mode.value_or(obj.optimum ? StopMode::objective_gap : StopMode::gradient_norm);
  if (mode == StopMode::objective_gap && !obj.optimum) throw Error("objective_gap stop requires a known optimum");
  const double eta_star = cfg.eta_star.value_or(cfg.eta);

  EnergyState st{theta0, tr.r0, 0};
  if (cfg.on_iterate) cfg.on_iterate(0, theta0);
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_us = [&] {
    if (!cfg.record_timing) return 0.0;
    return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t_start).count();
  };

  bool finished = false;
  double L = L0;
  for (long k = 0; k <= cfg.max_iter; ++k) {
    Vec g;
    try {
      if (k > 0) L = obj.eval(st.theta);
      if (std::isfinite(L)) g = obj.grad(st.theta);
    } catch (const Error& e) {
      tr.status = Status::numerical_failure;
      tr.message = std::string("objective evaluation failed: ") + e.what();
      finished = true;
      break;
    }
    StepRecord rec;
    rec.k = k;
    rec.L = L;
    rec.r = st.r;
    if (!std::isfinite(L) || !(L + obj.c > 0.0)) {
      tr.status = Status::numerical_failure;
      tr.message = "objective not finite or L + c <= 0 at iterate " + std::to_string(k);
      finished = true;
      break;
    }
    if (!g.allFinite()) {
      tr.status = Status::numerical_failure;
      tr.message = "non-finite gradient at iterate " + std::to_string(k);
      finished = true;
      break;
    }
    const double l = std::sqrt(L + obj.c);
    rec.l = l;
    rec.grad_norm = g.norm();
    Vec v;
    try {
      v = precond.apply(st.theta, g / (2.0 * l));
    } catch (const Error& e) {
      tr.status = Status::numerical_failure;
      tr.message = std::string("preconditioner failed: ") + e.what();
      finished = true;
      break;
    }
    rec.v_norm = v.norm();
    if (track_spectrum) {
      if (auto sb = precond.spectrum_at(st.theta)) {
        if (!tr.spectrum) tr.spectrum = *sb;
        tr.spectrum->lambda1 = std::min(tr.spectrum->lambda1, sb->lambda1);
        tr.spectrum->lambdan = std::max(tr.spectrum->lambdan, sb->lambdan);
      }
    }

    bool stop = rec.grad_norm == 0.0;
    switch (mode) {
      case StopMode::objective_gap: stop = stop || std::fabs(L - obj.optimum->value) < cfg.tol; break;
      case StopMode::gradient_norm: stop = stop || 2.0 * l * rec.v_norm < cfg.tol; break;
      case StopMode::projected_gradient_norm: stop = stop || projected_norm(g, affine) < cfg.tol; break;
      case StopMode::iteration_budget: break;
    }
    if (stop) {
      rec.t_us = elapsed_us();
      tr.records.push_back(rec);
      tr.status = Status::converged;
      finished = true;
      break;
    }
    if (k == cfg.max_iter) break;  // budget spent; the last iterate was still tested

    double eta_k = cfg.eta;
    if (feas != nullptr) {
      LineSearchResult ls = feasible_line_search(st.theta, v, st.r, *feas, cfg.eps_feas, eta_star);
      if (!ls.ok) {
        tr.status = Status::infeasible_step;
        tr.message = "no admissible step at iterate " + std::to_string(k);
        finished = true;
        break;
      }
      eta_k = ls.eta;
    }
    StepResult sr = aepg_step(st, v, eta_k);
    if (sr.status != Status::converged) {
      tr.status = Status::numerical_failure;
      tr.message = "step produced non-finite values at iterate " + std::to_string(k);
      finished = true;
      break;
    }
    rec.eta = eta_k;
    rec.dtheta_norm = (sr.state.theta - st.theta).norm();
    rec.eta_eff = eta_k * sr.state.r / l;
    rec.t_us = elapsed_us();
    tr.records.push_back(rec);
    st = sr.state;
    if (cfg.on_iterate) cfg.on_iterate(st.k, st.theta);
  }
  if (!finished) {
    tr.status = Status::budget_exhausted;
    try {
      L = obj.eval(st.theta);
    } catch (const Error&) {
      L = std::numeric_limits<double>::quiet_NaN();
    }
  }
  tr.theta_final = st.theta;
  tr.r_final = st.r;
  tr.L_final = L;
  return tr;
}

StepBounds compute_step_bounds(const SmoothnessProfile& p, double l0) {
  const double inf = std::numeric_limits<double>::infinity();
  StepBounds b{inf, inf, inf, p.r0 >= (l0 - p.lstar) / p.lambda1};
  if (p.alpha > 0.0) {
    b.eta_s = 4.0 * p.lstar * p.lambda1 / (p.alpha * p.r0 * p.r0) * (p.r0 - (l0 - p.lstar) / p.lambda1);
    b.eta_0 = p.lambda1 * p.lstar / (p.alpha * p.r0);
  }
  b.safe = std::min(b.eta_s, b.eta_0);
  return b;
}

double energy_floor(const SmoothnessProfile& p, double eta_s, double eta) {
  return p.alpha * p.r0 * p.r0 / (4.0 * p.lstar * p.lambda1) * (eta_s - eta);
}

double shift_for_energy_floor(double L0, double Lstar, double lambda1, double margin) {
  // With s = c + L*, D = L0 - L*, q = margin / lambda1 the requirement
  // sqrt(D + s) >= q (sqrt(D + s) - sqrt(s)) reduces to s >= (q-1)^2 D / (2q - 1).
  const double q = margin / lambda1;
  if (q <= 1.0) return -std::numeric_limits<double>::infinity();
  return (q - 1.0) * (q - 1.0) / (2.0 * q - 1.0) * (L0 - Lstar) - Lstar;
}

EnergyReport check_energy_identity(const RunTrace& tr, std::span<const double> etas, double tol) {
  EnergyReport rep;
  const auto& R = tr.records;
  double eta_max = 0.0;
  for (std::size_t k = 0; k < R.size(); ++k) {
    const double eta = etas.empty() ? R[k].eta : etas[k];
    if (!(eta > 0.0)) continue;  // terminal record: no step taken
    const double rk = R[k].r;
    const double rn = (k + 1 < R.size()) ? R[k + 1].r : tr.r_final;
    const double d2 = R[k].dtheta_norm * R[k].dtheta_norm;
    const double res = std::fabs(rn * rn - rk * rk + (rn - rk) * (rn - rk) + d2 / eta) / std::max(rk * rk, 1.0);
    rep.max_residual = std::max(rep.max_residual, res);
    if (res > tol) ++rep.violations;
    if (rn > rk) {
      rep.monotone = false;
      ++rep.violations;
    }
    rep.path_length_sq += d2;
    eta_max = std::max(eta_max, eta);
  }
  rep.path_bound = eta_max * tr.r0 * tr.r0;
  rep.path_ok = rep.path_length_sq <= rep.path_bound * (1.0 + 1e-12);
  return rep;
}

BoundReport check_rate_bounds(const RunTrace& tr, const SmoothnessProfile& prof, const ObjectiveSpec& obj,
                              RateRegime regime, double slack) {
  BoundReport rep;
  const bool need_opt = regime != RateRegime::general && regime != RateRegime::smoothness_envelope;
  if (need_opt && !obj.optimum) {
    rep.accepted = false;
    rep.message = std::string("regime ") + to_string(regime) + " requires a known optimum (theta*, L*)";
    return rep;
  }
  if ((regime == RateRegime::pl || regime == RateRegime::projected_pl) && !obj.mu) {
    rep.accepted = false;
    rep.message = std::string("regime ") + to_string(regime) + " requires the PL constant mu";
    return rep;
  }
  if (regime == RateRegime::smoothness_envelope && !(prof.alpha > 0.0) && !obj.alpha) {
    rep.accepted = false;
    rep.message = "smoothness envelope requires alpha";
    return rep;
  }

  const auto& R = tr.records;
  // Iterates 0..N with L and r; the final iterate is appended when not recorded.
  std::vector<double> Ls, rs, gs, etas;
  for (const auto& rec : R) {
    Ls.push_back(rec.L);
    rs.push_back(rec.r);
    gs.push_back(rec.grad_norm);
    etas.push_back(rec.eta);
  }
  if (tr.status != Status::converged) {
    Ls.push_back(tr.L_final);
    rs.push_back(tr.r_final);
  }
  const std::size_t N = Ls.size();
  rep.margins.assign(N, std::numeric_limits<double>::infinity());
  const double lamn = prof.lambdan;
  const double alpha = prof.alpha > 0.0 ? prof.alpha : obj.alpha.value_or(0.0);

  double eta_min = std::numeric_limits<double>::infinity(), eta_max = 0.0;
  for (double e : etas)
    if (e > 0.0) {
      eta_min = std::min(eta_min, e);
      eta_max = std::max(eta_max, e);
    }
  if (eta_max == 0.0) eta_min = eta_max = tr.eta;

  double min_g2 = std::numeric_limits<double>::infinity();
  double max_L = -std::numeric_limits<double>::infinity();
  double running_eta_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < N; ++k) {
    double margin = std::numeric_limits<double>::infinity();
    const double kk = static_cast<double>(k);
    switch (regime) {
      case RateRegime::general:
        if (k > 0) margin = 2.0 * tr.r0 * lamn * lamn / (running_eta_min * rs[k] * kk) * (max_L + tr.c) - min_g2;
        break;
      case RateRegime::pl:
      case RateRegime::projected_pl: {
        const double Ls_ = obj.optimum->value;
        const double c0 = *obj.mu * eta_min / tr.l0;
        margin = std::exp(-c0 * kk * rs[k] / lamn) * (Ls[0] - Ls_) - (Ls[k] - Ls_);
        break;
      }
      case RateRegime::convex:
        if (k > 0) {
          const double c1 = 2.0 * tr.l0 / eta_min;
          const double d0 = (tr.theta0 - obj.optimum->theta).squaredNorm();
          margin = c1 * lamn * d0 / (kk * rs[k]) - (Ls[k] - obj.optimum->value);
        }
        break;
      case RateRegime::smoothness_envelope:
        margin = Ls[0] + alpha * eta_max * tr.r0 * tr.r0 / 2.0 - Ls[k];
        break;
    }
    rep.margins[k] = margin;
    if (margin < -slack) ++rep.violations;
    if (k < gs.size()) {
      min_g2 = std::min(min_g2, gs[k] * gs[k]);
      max_L = std::max(max_L, Ls[k]);
      const double e = etas[k] > 0.0 ? etas[k] : tr.eta;
      running_eta_min = std::min(running_eta_min, e);
    }
  }
  rep.tightest = std::numeric_limits<double>::infinity();
  for (std::size_t k = N > 1 ? 1 : 0; k < N; ++k) rep.tightest = std::min(rep.tightest, rep.margins[k]);
  return rep;
}

}  // namespace energia
