#include "energia/problems.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <mutex>
#include <sstream>

namespace energia {

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(std::fabs(x[i]), 1e-2);
    Vec xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

ProblemInstance quadratic_problem(double alpha) {
  if (!(alpha > 0.0)) throw Error("quadratic problem: alpha must be positive");
  ProblemInstance p;
  p.id = "quad";
  p.alpha_cond = alpha;
  p.objective.eval = [alpha](const Vec& x) {
    return (x[0] - 1.0) * (x[0] - 1.0) + alpha * (x[1] - 1.0) * (x[1] - 1.0);
  };
  p.objective.grad = [alpha](const Vec& x) {
    Vec g(2);
    g << 2.0 * (x[0] - 1.0), 2.0 * alpha * (x[1] - 1.0);
    return g;
  };
  p.objective.optimum = Optimum{(Vec(2) << 0.5, 1.0).finished(), 0.25};
  p.objective.c = ObjectiveSpec::default_shift(p.objective.optimum);
  p.objective.alpha = 2.0 * std::max(1.0, alpha);
  p.objective.mu = 2.0 * std::min(1.0, alpha);
  p.theta0 = (Vec(2) << -1.0, 1.8).finished();
  const Vec center = (Vec(2) << -0.5, 1.0).finished();
  p.constraints = ConstraintSet(2, {Constraint::ball(center, Mat::Identity(2, 2))}, p.theta0);
  p.barrier = std::make_shared<LegendreBarrier>(*p.constraints, Kernel::entropy);
  p.sample_feasible = [center](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double rad = 0.98 * std::sqrt(U(rng)), ang = 2.0 * std::numbers::pi * U(rng);
    return Vec(center + rad * (Vec(2) << std::cos(ang), std::sin(ang)).finished());
  };
  return p;
}

ProblemInstance rosenbrock_problem(double alpha) {
  if (!(alpha > 0.0)) throw Error("rosenbrock problem: alpha must be positive");
  ProblemInstance p;
  p.id = "rosen";
  p.alpha_cond = alpha;
  p.objective.eval = [alpha](const Vec& x) {
    const double t = x[1] - x[0] * x[0];
    return (x[0] - 1.0) * (x[0] - 1.0) + alpha * t * t;
  };
  p.objective.grad = [alpha](const Vec& x) {
    const double t = x[1] - x[0] * x[0];
    Vec g(2);
    g << 2.0 * (x[0] - 1.0) - 4.0 * alpha * x[0] * t, 2.0 * alpha * t;
    return g;
  };
  p.objective.optimum = Optimum{Vec::Zero(2), 1.0};
  p.objective.c = ObjectiveSpec::default_shift(p.objective.optimum);
  p.theta0 = (Vec(2) << -0.5, 2.0).finished();
  p.constraints = ConstraintSet(2, {Constraint::sign_of(2, 0, -1.0), Constraint::sign_of(2, 1, 1.0)}, p.theta0);
  p.barrier = std::make_shared<LegendreBarrier>(*p.constraints, Kernel::entropy);
  p.sample_feasible = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> X(-1.5, -0.05), Y(0.05, 3.0);
    Vec x(2);
    x[0] = X(rng);
    x[1] = Y(rng);
    return x;
  };
  return p;
}

namespace {

double unit_open(std::mt19937_64& rng) {
  // 53 random bits mapped into (0, 1].
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

bool information_full_rank(const Mat& U) {
  const Mat S = U.transpose() * U / static_cast<double>(U.rows());
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) return false;
  const Vec d = llt.matrixL().toDenseMatrix().diagonal();
  return d.minCoeff() > 1e-8 * d.maxCoeff();
}

}  // namespace

DoptimalData generate_doptimal_data(int m, int n, std::uint64_t seed) {
  if (m < 1 || n <= m) throw Error("D-optimal data needs 1 <= m < n");
  DoptimalData d;
  d.m = m;
  d.n = n;
  for (std::uint64_t s = seed;; ++s) {
    std::mt19937_64 rng(s);
    d.seed = s;
    d.U.resize(n, m);
    std::vector<double> z(static_cast<std::size_t>(n) * m);
    for (std::size_t i = 0; i < z.size(); i += 2) {
      const double rad = std::sqrt(-2.0 * std::log(unit_open(rng)));
      const double ang = 2.0 * std::numbers::pi * unit_open(rng);
      z[i] = rad * std::cos(ang);
      if (i + 1 < z.size()) z[i + 1] = rad * std::sin(ang);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) d.U(i, j) = z[static_cast<std::size_t>(i) * m + j];
    if (information_full_rank(d.U)) return d;
  }
}

void save_doptimal_csv(const std::string& path, const DoptimalData& d) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << "# generator=" << kDoptimalGenerator << ",m=" << d.m << ",n=" << d.n << ",seed=" << d.seed << "\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < d.U.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.U.cols(); ++j) os << (j ? "," : "") << d.U(i, j);
    os << "\n";
  }
}

DoptimalData load_doptimal_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  DoptimalData d;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto pos = line.find("seed=");
      if (pos != std::string::npos) d.seed = std::stoull(line.substr(pos + 5));
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) throw Error("ragged D-optimal CSV: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("empty D-optimal CSV: " + path);
  d.n = static_cast<int>(rows.size());
  d.m = static_cast<int>(rows.front().size());
  d.U.resize(d.n, d.m);
  for (int i = 0; i < d.n; ++i)
    for (int j = 0; j < d.m; ++j) d.U(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return d;
}

DoptimalEval doptimal_eval(const DoptimalData& d, const Vec& theta) {
  const Mat V = (d.U.array().colwise() * theta.array().max(0.0).sqrt()).matrix();
  Mat S = Mat::Zero(d.m, d.m);
  S.selfadjointView<Eigen::Lower>().rankUpdate(V.transpose());
  Eigen::LLT<Mat> llt(S);
  const Vec diag = llt.matrixL().toDenseMatrix().diagonal();
  if (llt.info() != Eigen::Success || !(diag.minCoeff() > 0.0)) {
    std::ostringstream os;
    os << "singular information matrix; support = {";
    bool first = true;
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      if (theta[i] > 0.0) {
        os << (first ? "" : ",") << i;
        first = false;
      }
    os << "}";
    throw Error(os.str());
  }
  DoptimalEval e;
  e.L = -2.0 * diag.array().log().sum();
  const Mat Y = llt.matrixL().solve(d.U.transpose());
  e.omega = Y.colwise().squaredNorm().transpose();
  e.grad = -e.omega;
  return e;
}

ProblemInstance doptimal_problem(const DoptimalData& data) {
  auto d = std::make_shared<DoptimalData>(data);
  ProblemInstance p;
  p.id = "doptimal";
  const int n = d->n;
  // Value and gradient are requested at the same point in turn; one cached
  // evaluation serves both.
  struct Cache {
    std::mutex mu;
    Vec theta;
    DoptimalEval e;
  };
  auto cache = std::make_shared<Cache>();
  auto lookup = [d, cache](const Vec& th) {
    std::lock_guard<std::mutex> lock(cache->mu);
    if (cache->theta.size() != th.size() || cache->theta != th) {
      cache->e = doptimal_eval(*d, th);
      cache->theta = th;
    }
    return cache->e;
  };
  p.objective.eval = [lookup](const Vec& th) { return lookup(th).L; };
  p.objective.grad = [lookup](const Vec& th) { return lookup(th).grad; };
  p.theta0 = Vec::Constant(n, 1.0 / n);
  // Convexity gives L* >= L(theta0) - gap(theta0), so this shift keeps L + c >= 1.
  const DoptimalEval e0 = doptimal_eval(*d, p.theta0);
  const double gap0 = e0.omega.maxCoeff() - d->m;
  p.objective.c = 1.0 - (e0.L - gap0);
  std::vector<Constraint> cons;
  cons.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) cons.push_back(Constraint::sign_of(n, i, 1.0));
  p.constraints = ConstraintSet(n, std::move(cons), p.theta0);
  p.affine = AffineConstraint(Mat::Ones(1, n), Vec::Ones(1));
  p.barrier = std::make_shared<LegendreBarrier>(*p.constraints, Kernel::entropy);
  p.sample_feasible = [n](std::mt19937_64& rng) {
    std::exponential_distribution<double> E(1.0);
    Vec th(n);
    for (int i = 0; i < n; ++i) th[i] = E(rng) + 1e-3;
    return Vec(th / th.sum());
  };
  return p;
}

namespace {

// Exact line search on phi(eta) = -m log a(eta) - log(1 + t(eta) omega) for the
// toward (a = 1 - eta, t = eta/a) or away (a = 1 + eta, t = -eta/a) update.
double fw_line_search(int m, double omega, bool away, double eta_max, long k) {
  const double fallback = std::min(2.0 / (k + 2.0), eta_max);
  const double hi = away ? eta_max : std::min(eta_max, 1.0 - 1e-15);
  auto derivs = [&](double eta, double* d1, double* d2) {
    double a, ap, t, tp, tpp;
    if (!away) {
      a = 1.0 - eta;
      ap = -1.0;
      t = eta / a;
      tp = 1.0 / (a * a);
      tpp = 2.0 / (a * a * a);
    } else {
      a = 1.0 + eta;
      ap = 1.0;
      t = -eta / a;
      tp = -1.0 / (a * a);
      tpp = 2.0 / (a * a * a);
    }
    const double q = 1.0 + t * omega;
    *d1 = -m * ap / a - omega * tp / q;
    *d2 = m * ap * ap / (a * a) - (omega * tpp * q - omega * omega * tp * tp) / (q * q);
  };
  double eta = std::min(0.5 * hi, fallback);
  for (int it = 0; it < 20; ++it) {
    double d1, d2;
    derivs(eta, &d1, &d2);
    if (!std::isfinite(d1) || !std::isfinite(d2) || d2 <= 0.0) return fallback;
    double next = std::clamp(eta - d1 / d2, 0.0, hi);
    if (next == hi && !away) next = 0.5 * (eta + hi);  // stay off the singular endpoint
    if (std::fabs(next - eta) <= 1e-15 * std::max(1.0, eta)) {
      eta = next;
      break;
    }
    eta = next;
  }
  if (!std::isfinite(eta)) return fallback;
  return eta;
}

struct FwOutcome {
  Vec theta;
  double eta;
};

FwOutcome fw_step(const DoptimalData& d, const Vec& theta, const DoptimalEval& e, long k, bool allow_away) {
  Eigen::Index j;
  e.omega.maxCoeff(&j);
  const double fw_gap = e.omega[j] - d.m;
  if (allow_away) {
    Eigen::Index a = -1;
    double om_a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      if (theta[i] > 0.0 && e.omega[i] < om_a) {
        om_a = e.omega[i];
        a = i;
      }
    const double away_gap = d.m - om_a;
    if (a >= 0 && away_gap > fw_gap && theta[a] < 1.0) {
      const double eta_max = theta[a] / (1.0 - theta[a]);
      const double eta = fw_line_search(d.m, om_a, true, eta_max, k);
      Vec th = (1.0 + eta) * theta;
      th[a] -= eta;
      if (eta >= eta_max * (1.0 - 1e-14)) th[a] = 0.0;  // drop step
      return {th, eta};
    }
  }
  const double eta = fw_line_search(d.m, e.omega[j], false, 1.0, k);
  Vec th = (1.0 - eta) * theta;
  th[j] += eta;
  return {th, eta};
}

}  // namespace

FwReference fw_away_reference(const DoptimalData& d, double gap_tol, long max_iter) {
  FwReference ref;
  ref.theta = Vec::Constant(d.n, 1.0 / d.n);
  for (long k = 0; k <= max_iter; ++k) {
    const DoptimalEval e = doptimal_eval(d, ref.theta);
    ref.L = e.L;
    ref.gap = e.omega.maxCoeff() - d.m;
    ref.iterations = k;
    if (ref.gap < gap_tol) {
      ref.converged = true;
      break;
    }
    if (k == max_iter) break;
    ref.theta = fw_step(d, ref.theta, e, k, true).theta;
  }
  return ref;
}

MixtureProblem mixture_problem(int grid_n) {
  MixtureProblem mp;
  mp.grid = Grid2D(0.0, 5.0, grid_n);
  mp.model = std::make_shared<GaussianMixture>(0.05, 3.0, 2.0);
  const Vec theta_star = (Vec(2) << 1.0, 3.0).finished();
  mp.rho_star = mp.model->density(mp.grid, theta_star);
  ProblemInstance& p = mp.problem;
  p.id = "mixture";
  auto model = mp.model;
  auto grid = mp.grid;
  auto rs = std::make_shared<Vec>(mp.rho_star);
  p.objective.eval = [model, grid, rs](const Vec& th) { return mixture_loss(*model, th, grid, *rs).L; };
  p.objective.grad = [model, grid, rs](const Vec& th) { return mixture_loss(*model, th, grid, *rs).grad; };
  p.objective.optimum = Optimum{theta_star, 0.0};
  p.objective.c = ObjectiveSpec::default_shift(p.objective.optimum);
  p.theta0 = (Vec(2) << 4.0, 4.2).finished();
  p.sample_feasible = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 5.0);
    Vec x(2);
    x[0] = U(rng);
    x[1] = U(rng);
    return x;
  };
  return mp;
}

const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::gd: return "gd";
    case BaselineKind::hrgd: return "hrgd";
    case BaselineKind::wngd: return "wngd";
    case BaselineKind::aegd: return "aegd";
    case BaselineKind::fw: return "fw";
    case BaselineKind::fw_away: return "fw_away";
  }
  return "unknown";
}

std::optional<BaselineKind> baseline_from_string(const std::string& s) {
  for (auto k : {BaselineKind::gd, BaselineKind::hrgd, BaselineKind::wngd, BaselineKind::aegd, BaselineKind::fw,
                 BaselineKind::fw_away})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

BaselineStep baseline_step(BaselineKind kind, const BaselineContext& ctx, const Vec& theta, long k, double eta) {
  BaselineStep out{theta, k + 1, Status::converged, eta};
  switch (kind) {
    case BaselineKind::gd: out.theta = theta - eta * ctx.problem->objective.grad(theta); break;
    case BaselineKind::hrgd:
    case BaselineKind::wngd: {
      if (ctx.precond == nullptr) throw Error("preconditioned baseline needs a preconditioner");
      out.theta = theta - eta * ctx.precond->apply(theta, ctx.problem->objective.grad(theta));
      break;
    }
    case BaselineKind::fw:
    case BaselineKind::fw_away: {
      if (ctx.data == nullptr) throw Error("Frank-Wolfe is only supported on D-optimal problems");
      FwOutcome o = fw_step(*ctx.data, theta, doptimal_eval(*ctx.data, theta), k, kind == BaselineKind::fw_away);
      out.theta = o.theta;
      out.eta = o.eta;
      break;
    }
    case BaselineKind::aegd: throw Error("aegd steps are taken through run_aepg");
  }
  if (!out.theta.allFinite()) out.status = Status::numerical_failure;
  if (ctx.problem && ctx.problem->constraints && kind != BaselineKind::fw && kind != BaselineKind::fw_away &&
      out.status == Status::converged && !ctx.problem->constraints->strictly_feasible(out.theta))
    out.status = Status::infeasible_step;
  return out;
}

RunTrace run_baseline(BaselineKind kind, const BaselineContext& ctx, const BaselineConfig& cfg) {
  const ProblemInstance& p = *ctx.problem;
  if (kind == BaselineKind::aegd) {
    IdentityPreconditioner id(p.theta0.size());
    AepgConfig ac;
    ac.eta = cfg.eta;
    ac.max_iter = cfg.max_iter;
    ac.tol = cfg.tol;
    ac.record_timing = cfg.record_timing;
    return run_aepg(p.objective, id, p.theta0, ac);
  }
  const bool fw = kind == BaselineKind::fw || kind == BaselineKind::fw_away;
  if (fw && ctx.data == nullptr) throw Error("Frank-Wolfe is only supported on D-optimal problems");
  RunTrace tr;
  tr.theta0 = p.theta0;
  tr.c = p.objective.c;
  tr.eta = cfg.eta;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return cfg.record_timing
               ? std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count()
               : 0.0;
  };
  Vec th = p.theta0;
  bool finished = false;
  double L = 0.0;
  for (long k = 0; k <= cfg.max_iter; ++k) {
    StepRecord rec;
    rec.k = k;
    Vec g;
    double measure;
    try {
      if (fw) {
        const DoptimalEval e = doptimal_eval(*ctx.data, th);
        L = e.L;
        g = e.grad;
        measure = e.omega.maxCoeff() - ctx.data->m;
      } else {
        L = p.objective.eval(th);
        g = p.objective.grad(th);
        measure = (kind == BaselineKind::gd) ? g.norm() : ctx.precond->apply(th, g).norm();
      }
    } catch (const Error& e) {
      tr.status = Status::numerical_failure;
      tr.message = e.what();
      finished = true;
      break;
    }
    rec.L = L;
    rec.grad_norm = g.norm();
    if (!std::isfinite(L) || !g.allFinite()) {
      tr.status = Status::numerical_failure;
      tr.message = "non-finite objective or gradient";
      finished = true;
      break;
    }
    const bool stop = p.objective.optimum ? std::fabs(L - p.objective.optimum->value) < cfg.tol : measure < cfg.tol;
    if (stop) {
      rec.t_us = elapsed();
      tr.records.push_back(rec);
      tr.status = Status::converged;
      finished = true;
      break;
    }
    if (k == cfg.max_iter) break;  // budget spent; the last iterate was still tested
    BaselineStep s;
    try {
      s = baseline_step(kind, ctx, th, k, cfg.eta);
    } catch (const Error& e) {
      tr.status = Status::numerical_failure;
      tr.message = e.what();
      finished = true;
      break;
    }
    if (s.status != Status::converged) {
      tr.status = s.status;
      tr.message = std::string("baseline step failed: ") + to_string(s.status);
      finished = true;
      break;
    }
    rec.eta = s.eta;
    rec.eta_eff = s.eta;
    rec.dtheta_norm = (s.theta - th).norm();
    rec.v_norm = s.eta > 0.0 ? rec.dtheta_norm / s.eta : 0.0;
    rec.t_us = elapsed();
    tr.records.push_back(rec);
    th = s.theta;
  }
  if (!finished) {
    tr.status = Status::budget_exhausted;
    try {
      L = fw ? doptimal_eval(*ctx.data, th).L : p.objective.eval(th);
    } catch (const Error&) {
      L = std::numeric_limits<double>::quiet_NaN();
    }
  }
  tr.theta_final = th;
  tr.L_final = L;
  return tr;
}

ProjectedPl projected_pl_example(double a, double b, double alpha, double beta, const Vec& theta) {
  if (a * b == 0.0) throw Error("projected PL example needs a b != 0");
  if (!(alpha >= beta && beta > 0.0)) throw Error("projected PL example needs alpha >= beta > 0");
  if (std::fabs(a * theta[0] + b * theta[1] - 1.0) > 1e-10 * std::max(1.0, theta.norm()))
    throw Error("projected PL example: theta is not on the constraint line");
  ProjectedPl out;
  const double K = a * a * alpha + b * b * beta;
  out.mu = K / (a * a + b * b);
  out.theta_star = (Vec(2) << a * alpha / K, b * beta / K).finished();
  auto L = [&](const Vec& x) { return 0.5 * (beta * x[0] * x[0] + alpha * x[1] * x[1]); };
  const Vec grad = (Vec(2) << beta * theta[0], alpha * theta[1]).finished();
  const Mat B = (Mat(1, 2) << a, b).finished();
  const Mat P = projection_matrix(Mat::Identity(2, 2), B);
  out.pgrad_sq = (P.transpose() * grad).squaredNorm();
  out.gap = L(theta) - L(out.theta_star);
  return out;
}

}  // namespace energia
