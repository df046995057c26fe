#include "energia/harness.hpp"

#include "energia/barrier.hpp"
#include "energia/wngd.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace energia {

using nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

const std::set<std::string> kProblems = {"quad", "rosen", "doptimal", "mixture"};
const std::set<std::string> kMethods = {"aepg", "aegd", "gd", "hrgd", "wngd", "fw", "fw_away"};
const std::set<std::string> kKeys = {"version", "problem", "alpha",   "m",        "n",        "seed",
                                     "grid_n",  "data",    "method",  "eta",      "eta_grid", "c",
                                     "r0",      "max_iter", "tol",    "eps_feas", "eta_star", "out",
                                     "format",  "timing"};

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  if (c.version != kConfigVersion) throw Error("unsupported config version " + std::to_string(c.version));
  if (!kProblems.count(c.problem)) throw Error("unknown problem '" + c.problem + "'");
  if (!kMethods.count(c.method)) throw Error("unknown method '" + c.method + "'");
  if (!(c.eta > 0.0)) throw Error("eta must be positive");
  for (double e : c.eta_grid)
    if (!(e > 0.0)) throw Error("eta_grid values must be positive");
  if (!(c.alpha > 0.0)) throw Error("alpha must be positive");
  if (c.max_iter < 0) throw Error("max_iter must be nonnegative");
  if (!(c.tol > 0.0)) throw Error("tol must be positive");
  if (c.eps_feas < 0.0 || c.eps_feas > 0.5) throw Error("eps_feas must lie in [0, 1/2]");
  if (c.eta_star && *c.eta_star < c.eta) throw Error("eta_star must be at least eta");
  if (c.r0 && !(*c.r0 > 0.0)) throw Error("r0 must be positive");
  if (c.format != "csv" && c.format != "json") throw Error("format must be csv or json");
  if (c.problem == "doptimal" && c.data.empty() && (c.m < 1 || c.n <= c.m))
    throw Error("doptimal needs 1 <= m < n");
  if (c.problem == "mixture" && c.grid_n < 4) throw Error("grid_n must be at least 4");
  const bool fw = c.method == "fw" || c.method == "fw_away";
  if (fw && c.problem != "doptimal") throw Error("Frank-Wolfe methods are only supported on doptimal");
  if (c.method == "wngd" && c.problem != "mixture") throw Error("wngd is only supported on mixture");
  if (c.method == "hrgd" && c.problem == "mixture") throw Error("hrgd needs a barrier problem");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kKeys.count(it.key())) throw Error("unknown config key '" + it.key() + "'");
  if (!j.contains("version")) throw Error("config is missing the 'version' field");
  ExperimentConfig c;
  c.version = get_as<int>(j, "version");
  if (j.contains("problem")) c.problem = get_as<std::string>(j, "problem");
  if (j.contains("alpha")) c.alpha = get_as<double>(j, "alpha");
  if (j.contains("m")) c.m = get_as<int>(j, "m");
  if (j.contains("n")) c.n = get_as<int>(j, "n");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("grid_n")) c.grid_n = get_as<int>(j, "grid_n");
  if (j.contains("data")) c.data = get_as<std::string>(j, "data");
  if (j.contains("method")) c.method = get_as<std::string>(j, "method");
  if (j.contains("eta")) c.eta = get_as<double>(j, "eta");
  if (j.contains("eta_grid")) c.eta_grid = get_as<std::vector<double>>(j, "eta_grid");
  if (j.contains("c")) c.c = get_as<double>(j, "c");
  if (j.contains("r0")) c.r0 = get_as<double>(j, "r0");
  if (j.contains("max_iter")) c.max_iter = get_as<long>(j, "max_iter");
  if (j.contains("tol")) c.tol = get_as<double>(j, "tol");
  if (j.contains("eps_feas")) c.eps_feas = get_as<double>(j, "eps_feas");
  if (j.contains("eta_star")) c.eta_star = get_as<double>(j, "eta_star");
  if (j.contains("out")) c.out = get_as<std::string>(j, "out");
  if (j.contains("format")) c.format = get_as<std::string>(j, "format");
  if (j.contains("timing")) c.timing = get_as<bool>(j, "timing");
  validate_config(c);
  return c;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = c.version;
  j["problem"] = c.problem;
  j["alpha"] = c.alpha;
  j["m"] = c.m;
  j["n"] = c.n;
  j["seed"] = c.seed;
  j["grid_n"] = c.grid_n;
  if (!c.data.empty()) j["data"] = c.data;
  j["method"] = c.method;
  j["eta"] = c.eta;
  if (!c.eta_grid.empty()) j["eta_grid"] = c.eta_grid;
  if (c.c) j["c"] = *c.c;
  if (c.r0) j["r0"] = *c.r0;
  j["max_iter"] = c.max_iter;
  j["tol"] = c.tol;
  j["eps_feas"] = c.eps_feas;
  if (c.eta_star) j["eta_star"] = *c.eta_star;
  if (!c.out.empty()) j["out"] = c.out;
  j["format"] = c.format;
  j["timing"] = c.timing;
  return j.dump(2);
}

std::vector<double> log_grid(double lo, double hi, int per_decade) {
  const int npts = static_cast<int>(std::lround((hi - lo) * per_decade)) + 1;
  std::vector<double> g;
  for (int i = 0; i < npts; ++i) g.push_back(std::pow(10.0, lo + (hi - lo) * i / (npts - 1.0)));
  return g;
}

std::vector<double> default_eta_grid() { return log_grid(-3.0, 1.0, 3); }
std::vector<double> table_eta_grid() { return log_grid(-5.0, 1.0, 5); }

// ---------------------------------------------------------------- experiments

namespace {

std::shared_ptr<const FwReference> cached_reference(const std::shared_ptr<const DoptimalData>& d) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const FwReference>> cache;
  std::ostringstream key;
  key << d->m << "/" << d->n << "/" << d->seed << "/" << d->U.sum();
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key.str());
  if (it != cache.end()) return it->second;
  auto ref = std::make_shared<const FwReference>(fw_away_reference(*d, 1e-10, 1000000));
  cache[key.str()] = ref;
  return ref;
}

}  // namespace

double harness_shift(const ProblemInstance& p) {
  double c = ObjectiveSpec::default_shift(p.objective.optimum);
  if (p.barrier && p.objective.optimum) {
    HessianRiemannianPreconditioner hr(p.barrier);
    const double lambda1 = hr.spectrum_at(p.theta0)->lambda1;
    const double L0 = p.objective.eval(p.theta0);
    c = std::max(c, shift_for_energy_floor(L0, p.objective.optimum->value, lambda1, 2.0));
  }
  return c;
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  Experiment ex;
  ex.cfg = cfg;
  if (cfg.problem == "quad") {
    ex.problem = quadratic_problem(cfg.alpha);
  } else if (cfg.problem == "rosen") {
    ex.problem = rosenbrock_problem(cfg.alpha);
  } else if (cfg.problem == "doptimal") {
    auto d = std::make_shared<const DoptimalData>(cfg.data.empty() ? generate_doptimal_data(cfg.m, cfg.n, cfg.seed)
                                                                   : load_doptimal_csv(cfg.data));
    ex.data = d;
    ex.problem = doptimal_problem(*d);
    auto ref = cached_reference(d);
    ex.reference = *ref;
    ex.problem.objective.optimum = Optimum{ref->theta, ref->L};
  } else {
    auto mp = std::make_shared<const MixtureProblem>(mixture_problem(cfg.grid_n));
    ex.mixture = mp;
    ex.problem = mp->problem;
  }
  ex.problem.objective.c = cfg.c ? *cfg.c : harness_shift(ex.problem);

  const std::string& m = cfg.method;
  if (m == "gd" || m == "aegd" || m == "fw" || m == "fw_away") {
    ex.precond = std::make_shared<IdentityPreconditioner>(ex.problem.theta0.size());
  } else if (cfg.problem == "mixture") {
    ex.precond = std::make_shared<WassersteinPreconditioner>(ex.mixture->grid, ex.mixture->model);
  } else if (cfg.problem == "doptimal" && m == "aepg") {
    ex.precond = std::make_shared<SimplexPreconditioner>(ex.problem.theta0.size());
  } else {
    ex.precond = std::make_shared<HessianRiemannianPreconditioner>(ex.problem.barrier, ex.problem.affine);
  }
  return ex;
}

RunTrace run_experiment(const Experiment& ex, const RunOptions& opt) {
  const ExperimentConfig& cfg = ex.cfg;
  if (cfg.method == "aepg") {
    AepgConfig ac;
    ac.eta = opt.eta;
    ac.r0 = cfg.r0;
    ac.max_iter = opt.max_iter;
    ac.tol = cfg.tol;
    ac.eps_feas = cfg.eps_feas;
    ac.eta_star = cfg.eta_star ? std::max(*cfg.eta_star, opt.eta) : opt.eta;
    ac.record_timing = opt.timing;
    ac.on_iterate = opt.on_iterate;
    const ConstraintSet* feas = ex.problem.constraints ? &*ex.problem.constraints : nullptr;
    const AffineConstraint* aff = ex.problem.affine ? &*ex.problem.affine : nullptr;
    return run_aepg(ex.problem.objective, *ex.precond, ex.problem.theta0, ac, feas, aff);
  }
  BaselineContext ctx;
  ctx.problem = &ex.problem;
  ctx.precond = ex.precond.get();
  ctx.data = ex.data.get();
  BaselineConfig bc;
  bc.eta = opt.eta;
  bc.max_iter = opt.max_iter;
  bc.tol = cfg.tol;
  bc.record_timing = opt.timing;
  return run_baseline(*baseline_from_string(cfg.method), ctx, bc);
}

SummaryRow summarize(const Experiment& ex, const RunTrace& tr, double eta, double wall_ms) {
  SummaryRow row;
  row.problem = ex.cfg.problem;
  row.method = ex.cfg.method;
  row.alpha_cond = (ex.cfg.problem == "quad" || ex.cfg.problem == "rosen") ? ex.cfg.alpha : 0.0;
  row.eps = ex.cfg.tol;
  row.iterations = tr.status == Status::converged ? tr.iterations() : static_cast<long>(tr.records.size());
  row.wall_ms = wall_ms;
  const double Lend = tr.status == Status::converged && !tr.records.empty() ? tr.records.back().L : tr.L_final;
  row.gap = ex.problem.objective.optimum ? std::fabs(Lend - ex.problem.objective.optimum->value) : Lend;
  row.eta = eta;
  row.status = to_string(tr.status);
  row.theta_final = tr.theta_final;
  return row;
}

TuneResult tune_eta(const Experiment& ex, const std::vector<double>& grid, long max_iter, bool timing) {
  // Budgets grow tenfold per round. A step size leaves the pool once it converges,
  // fails, or exhausts a budget that already matches the best count found. The
  // outcome equals a full sweep at max_iter, without running slow steps to the end.
  TuneResult res;
  std::vector<double> pool(grid);
  // Large steps first: they tend to finish or fail quickly and set a low cap.
  std::sort(pool.begin(), pool.end(), std::greater<>());
  std::optional<SummaryRow> lowest_gap;
  for (long budget = std::min<long>(100, max_iter);; budget = std::min(budget * 10, max_iter)) {
    std::vector<double> keep;
    for (double eta : pool) {
      const long cap = res.found ? std::min(budget, res.best.iterations) : budget;
      const auto t0 = std::chrono::steady_clock::now();
      RunTrace tr = run_experiment(ex, RunOptions{eta, cap, timing, {}});
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      SummaryRow row = summarize(ex, tr, eta, timing ? ms : 0.0);
      res.tried.push_back(row);
      if (tr.status == Status::converged) {
        if (!res.found || row.iterations < res.best.iterations ||
            (row.iterations == res.best.iterations && eta < res.best.eta)) {
          res.best = row;
          res.found = true;
        }
      } else if (tr.status == Status::budget_exhausted && cap == budget && budget < max_iter) {
        keep.push_back(eta);
      } else if (cap == max_iter && std::isfinite(row.gap) && (!lowest_gap || row.gap < lowest_gap->gap)) {
        lowest_gap = row;
      }
    }
    pool = std::move(keep);
    if (pool.empty() || budget >= max_iter) break;
  }
  if (!res.found && lowest_gap) res.best = *lowest_gap;
  return res;
}

// ---------------------------------------------------------------- bench

namespace {

void run_pool(std::vector<std::function<void()>>& tasks, int threads) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) tasks[i]();
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

BenchReport bench_table(const std::string& table, const BenchOptions& opt) {
  BenchReport rep;
  rep.table = table;
  std::vector<std::function<void()>> tasks;
  std::vector<SummaryRow> rows;

  if (table == "quad" || table == "rosen") {
    const double alphas[] = {1, 10, 100, 1000, 10000};
    const double eps[] = {1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
    const std::vector<double> grid = opt.eta_grid.empty() ? table_eta_grid() : opt.eta_grid;
    const long budget = opt.max_iter > 0 ? opt.max_iter : 1000000;
    const std::string methods[] = {"hrgd", "aepg"};
    rows.resize(10);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 2; ++j)
        tasks.emplace_back([&, i, j] {
          ExperimentConfig c;
          c.problem = table;
          c.alpha = alphas[i];
          c.tol = eps[i];
          c.method = methods[j];
          c.max_iter = budget;
          Experiment ex = build_experiment(c);
          TuneResult t = tune_eta(ex, grid, budget, opt.timing);
          rows[static_cast<std::size_t>(2 * i + j)] = t.best;
          if (!t.found) rows[static_cast<std::size_t>(2 * i + j)].status = "not_converged";
        });
    run_pool(tasks, opt.threads);
    for (int i = 0; i < 5; ++i) {
      const SummaryRow &h = rows[2 * i], &a = rows[2 * i + 1];
      if (h.status == "converged" && a.status == "converged")
        rep.notes.push_back("alpha=" + fmt(alphas[i]) + " ratio hrgd/aepg=" +
                            fmt(static_cast<double>(h.iterations) / std::max<long>(a.iterations, 1)));
    }
  } else if (table == "doptimal") {
    const long budget = opt.max_iter > 0 ? opt.max_iter : 20000;
    const std::vector<double> grid = opt.eta_grid.empty() ? default_eta_grid() : opt.eta_grid;
    const std::string methods[] = {"aepg", "fw", "fw_away"};
    rows.resize(3);
    for (int j = 0; j < 3; ++j)
      tasks.emplace_back([&, j] {
        ExperimentConfig c;
        c.problem = "doptimal";
        c.m = opt.m;
        c.n = opt.n;
        c.seed = opt.seed;
        c.method = methods[j];
        c.tol = 1e-7;
        c.max_iter = budget;
        Experiment ex = build_experiment(c);
        if (methods[j] == "aepg") {
          TuneResult t = tune_eta(ex, grid, budget, opt.timing);
          rows[static_cast<std::size_t>(j)] = t.best;
          if (!t.found) rows[static_cast<std::size_t>(j)].status = "not_converged";
        } else {
          const auto t0 = std::chrono::steady_clock::now();
          RunTrace tr = run_experiment(ex, RunOptions{1.0, budget, opt.timing, {}});
          const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          rows[static_cast<std::size_t>(j)] = summarize(ex, tr, 0.0, opt.timing ? ms : 0.0);
        }
      });
    run_pool(tasks, opt.threads);
    ExperimentConfig c;
    c.problem = "doptimal";
    c.m = opt.m;
    c.n = opt.n;
    c.seed = opt.seed;
    const Experiment ex = build_experiment(c);
    rep.notes.push_back("L_ref=" + fmt(ex.reference->L) + " from fw_away duality gap " + fmt(ex.reference->gap) +
                        " after " + std::to_string(ex.reference->iterations) + " iterations");
  } else if (table == "mixture") {
    const long budget = opt.max_iter > 0 ? opt.max_iter : 2000;
    const std::vector<double> grid = opt.eta_grid.empty() ? default_eta_grid() : opt.eta_grid;
    const std::string methods[] = {"gd", "aegd", "wngd", "aepg"};
    rows.resize(4);
    for (int j = 0; j < 4; ++j)
      tasks.emplace_back([&, j] {
        ExperimentConfig c;
        c.problem = "mixture";
        c.grid_n = opt.grid_n;
        c.method = methods[j];
        c.tol = 1e-10;
        c.max_iter = budget;
        Experiment ex = build_experiment(c);
        TuneResult t = tune_eta(ex, grid, budget, opt.timing);
        rows[static_cast<std::size_t>(j)] = t.best;
        if (!t.found) rows[static_cast<std::size_t>(j)].status = "not_converged";
      });
    run_pool(tasks, opt.threads);
    const Vec star = (Vec(2) << 1.0, 3.0).finished();
    for (const auto& r : rows)
      if (r.theta_final.size() == 2)
        rep.notes.push_back(r.method + " terminal theta=(" + fmt(r.theta_final[0]) + "," + fmt(r.theta_final[1]) +
                            ") distance to (1,3)=" + fmt((r.theta_final - star).norm()));
  } else {
    throw Error("unknown bench table '" + table + "'");
  }
  rep.rows = std::move(rows);
  return rep;
}

// ---------------------------------------------------------------- verify

namespace {

CheckResult check(const std::string& suite, const std::string& name, double tol, double obs, bool pass,
                  std::string detail = {}) {
  return CheckResult{suite, name, tol, obs, pass, std::move(detail)};
}

Mat random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = N(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  std::uniform_real_distribution<double> U(0.5, 5.0);
  Vec d(n);
  for (int i = 0; i < n; ++i) d[i] = U(rng);
  Mat G = Q * d.asDiagonal() * Q.transpose();
  return 0.5 * (G + G.transpose());
}

Mat random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat B(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) B(i, j) = N(rng);
  return B;
}

std::vector<CheckResult> suite_energy() {
  std::vector<CheckResult> out;
  const std::vector<double> etas = {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0};
  struct Case {
    ExperimentConfig cfg;
    long budget;
  };
  std::vector<Case> cases;
  auto add = [&](std::string problem, double alpha, long budget) {
    ExperimentConfig c;
    c.problem = std::move(problem);
    c.alpha = alpha;
    c.method = "aepg";
    c.m = 10;
    c.n = 100;
    c.grid_n = 16;
    c.tol = 1e-12;
    cases.push_back({c, budget});
  };
  add("quad", 10.0, 2000);
  add("rosen", 100.0, 2000);
  add("doptimal", 1.0, 1000);
  add("mixture", 1.0, 100);
  for (const auto& cs : cases) {
    Experiment ex = build_experiment(cs.cfg);
    double worst = 0.0, worst_path = -1.0;
    bool monotone = true, path_ok = true;
    long steps = 0;
    for (double eta : etas) {
      RunTrace tr = run_experiment(ex, RunOptions{eta, cs.budget, false, {}});
      EnergyReport er = check_energy_identity(tr);
      worst = std::max(worst, er.max_residual);
      monotone = monotone && er.monotone;
      path_ok = path_ok && er.path_ok;
      if (er.path_bound > 0.0) worst_path = std::max(worst_path, er.path_length_sq / er.path_bound);
      steps += static_cast<long>(tr.records.size());
    }
    const std::string tag = "[" + cs.cfg.problem + "]";
    out.push_back(check("energy", "identity_residual" + tag, 1e-12, worst, worst < 1e-12,
                        std::to_string(steps) + " steps over 6 step sizes"));
    out.push_back(check("energy", "r_monotone" + tag, 0.0, monotone ? 0.0 : 1.0, monotone));
    out.push_back(check("energy", "path_length_ratio" + tag, 1.0, worst_path, path_ok,
                        "sum |dtheta|^2 / (eta_max r0^2)"));
  }
  return out;
}

std::vector<CheckResult> suite_bounds() {
  std::vector<CheckResult> out;
  for (double alpha : {1.0, 10.0, 100.0}) {
    ProblemInstance p = quadratic_problem(alpha);
    p.objective.c = harness_shift(p);
    HessianRiemannianPreconditioner hr(p.barrier);
    for (double eta : {1e-3, 1e-2, 0.1, 1.0}) {
      AepgConfig ac;
      ac.eta = eta;
      ac.max_iter = 5000;
      ac.tol = 1e-12;
      ac.record_timing = false;
      RunTrace tr = run_aepg(p.objective, hr, p.theta0, ac, &*p.constraints, nullptr, true);
      SmoothnessProfile prof;
      prof.alpha = *p.objective.alpha;
      prof.lambda1 = tr.spectrum->lambda1;
      prof.lambdan = tr.spectrum->lambdan;
      prof.lstar = std::sqrt(p.objective.optimum->value + p.objective.c);
      prof.r0 = tr.r0;
      const std::string tag = "[quad alpha=" + fmt(alpha) + " eta=" + fmt(eta) + "]";
      for (RateRegime rg : {RateRegime::general, RateRegime::convex, RateRegime::smoothness_envelope}) {
        BoundReport br = check_rate_bounds(tr, prof, p.objective, rg);
        out.push_back(check("bounds", std::string(to_string(rg)) + tag, 1e-9, br.tightest, br.pass(),
                            std::to_string(br.violations) + " violations over " + std::to_string(br.margins.size()) +
                                " iterates"));
      }
    }
  }
  // Strongly convex unconstrained quadratic with the identity metric and a step
  // below min(eta_s, eta_0).
  for (double a : {1.0, 10.0}) {
    ObjectiveSpec f;
    f.eval = [a](const Vec& x) { return (x[0] - 1.0) * (x[0] - 1.0) + a * (x[1] - 1.0) * (x[1] - 1.0); };
    f.grad = [a](const Vec& x) { return Vec((Vec(2) << 2.0 * (x[0] - 1.0), 2.0 * a * (x[1] - 1.0)).finished()); };
    f.optimum = Optimum{Vec::Ones(2), 0.0};
    f.c = 1.0;
    f.alpha = 2.0 * std::max(1.0, a);
    f.mu = 2.0 * std::min(1.0, a);
    const Vec x0 = (Vec(2) << -1.0, 3.0).finished();
    SmoothnessProfile prof{*f.alpha, 1.0, 1.0, 1.0, f.l(x0)};
    StepBounds sb = compute_step_bounds(prof, f.l(x0));
    IdentityPreconditioner id(2);
    AepgConfig ac;
    ac.eta = 0.9 * sb.safe;
    ac.max_iter = 20000;
    ac.tol = 1e-12;
    ac.record_timing = false;
    RunTrace tr = run_aepg(f, id, x0, ac);
    BoundReport br = check_rate_bounds(tr, prof, f, RateRegime::pl);
    out.push_back(check("bounds", "pl[a=" + fmt(a) + " eta=" + fmt(ac.eta) + "]", 1e-9, br.tightest, br.pass(),
                        std::to_string(br.violations) + " violations over " + std::to_string(br.margins.size()) +
                            " iterates"));
  }
  return out;
}

std::vector<CheckResult> suite_projections() {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(2024);
  for (int n : {2, 5, 20}) {
    double idem = 0.0, annih = 0.0, selfadj = 0.0;
    std::uniform_int_distribution<int> M(1, n - 1);
    for (int t = 0; t < 100; ++t) {
      const int m = M(rng);
      Mat G = random_spd(rng, n), B = random_matrix(rng, m, n);
      Mat P = projection_matrix(G, B);
      idem = std::max(idem, (P * P - P).cwiseAbs().maxCoeff());
      annih = std::max(annih, (B * P).cwiseAbs().maxCoeff() / B.cwiseAbs().maxCoeff());
      selfadj = std::max(selfadj, (G * P - P.transpose() * G).cwiseAbs().maxCoeff() / G.cwiseAbs().maxCoeff());
    }
    const std::string tag = "[n=" + std::to_string(n) + "]";
    out.push_back(check("projections", "idempotent" + tag, 1e-10, idem, idem < 1e-10));
    out.push_back(check("projections", "annihilates_B" + tag, 1e-10, annih, annih < 1e-10));
    out.push_back(check("projections", "G_self_adjoint" + tag, 1e-10, selfadj, selfadj < 1e-10));
  }
  return out;
}

std::vector<CheckResult> suite_ngd_equiv() {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.2, 2.0);
  auto orthant_barrier = [](int n, const Vec& w) {
    std::vector<Constraint> cs;
    for (int i = 0; i < n; ++i) cs.push_back(Constraint::sign_of(n, i, 1.0));
    return LegendreBarrier(ConstraintSet(n, cs, w), Kernel::entropy);
  };
  {
    // Two variables, one row: the projected-PL quadratic.
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const double a = U(rng), b = U(rng), beta = U(rng), alpha = beta * (1.0 + U(rng));
      ObjectiveSpec f;
      f.eval = [=](const Vec& x) { return 0.5 * (beta * x[0] * x[0] + alpha * x[1] * x[1]); };
      f.grad = [=](const Vec& x) { return Vec((Vec(2) << beta * x[0], alpha * x[1]).finished()); };
      std::uniform_real_distribution<double> S(0.05, 0.95);
      const double s = S(rng);
      Vec th(2);
      th << s / a, (1.0 - s) / b;
      AffineConstraint c((Mat(1, 2) << a, b).finished(), Vec::Ones(1));
      worst = std::max(worst, ngd_equivalence_check(orthant_barrier(2, th), c, f, th));
    }
    out.push_back(check("ngd_equiv", "discrepancy[n=2,m=1]", 1e-10, worst, worst < 1e-10));
  }
  {
    const int n = 5, m = 2;
    Mat Q = random_spd(rng, n);
    Vec q = random_matrix(rng, n, 1);
    ObjectiveSpec f;
    f.eval = [=](const Vec& x) { return 0.5 * x.dot(Q * x) + q.dot(x); };
    f.grad = [=](const Vec& x) { return Vec(Q * x + q); };
    Mat B = random_matrix(rng, m, n);
    Vec x0(n);
    for (int i = 0; i < n; ++i) x0[i] = U(rng);
    AffineConstraint c(B, B * x0);
    AffineParametrization ap = affine_parametrization(c, x0);
    double worst = 0.0;
    int used = 0;
    std::normal_distribution<double> N(0.0, 0.3);
    while (used < 20) {
      Vec z(n - m);
      for (int i = 0; i < n - m; ++i) z[i] = N(rng);
      Vec th = x0 + ap.Z * z;
      if ((th.array() <= 0.05).any()) continue;
      worst = std::max(worst, ngd_equivalence_check(orthant_barrier(n, th), c, f, th));
      ++used;
    }
    out.push_back(check("ngd_equiv", "discrepancy[n=5,m=2]", 1e-9, worst, worst < 1e-9, "20 random feasible points"));
  }
  return out;
}

std::vector<CheckResult> suite_pl_example() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mag(0.5, 2.0), ratio(1.0, 10.0), off(0.1, 2.0);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double a = (coin(rng) ? 1 : -1) * mag(rng), b = (coin(rng) ? 1 : -1) * mag(rng);
    const double beta = mag(rng), alpha = beta * ratio(rng);
    const double K = a * a * alpha + b * b * beta;
    const double t1 = a * alpha / K + (coin(rng) ? 1 : -1) * off(rng);
    const Vec th = (Vec(2) << t1, (1.0 - a * t1) / b).finished();
    ProjectedPl r = projected_pl_example(a, b, alpha, beta, th);
    worst = std::max(worst, std::fabs(r.pgrad_sq / r.gap - 2.0 * r.mu) / (2.0 * r.mu));
  }
  return {check("pl_example", "ratio_deviation", 1e-10, worst, worst < 1e-10, "100 random (a,b,alpha,beta,theta)")};
}

std::vector<CheckResult> suite_wngd() {
  std::vector<CheckResult> out;
  MixtureProblem mp = mixture_problem(32);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 5.0);
  double worst_dir = 0.0, worst_res = 0.0, worst_sym = 0.0, worst_neg = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vec th = (Vec(2) << U(rng), U(rng)).finished();
    WassersteinWorkspace ws(mp.grid, *mp.model, th);
    MixtureLoss ml = mixture_loss(*mp.model, th, mp.grid, mp.rho_star);
    Vec e = ml.residual;
    mean_project(e);
    NaturalDirection nd = natural_direction(ws.lifts, ws.face_gradient(e), mp.grid.cell_area());
    const Vec direct = -ws.G.ldlt().solve(ml.grad_compat);
    worst_dir = std::max(worst_dir, (nd.p - direct).norm() / std::max(direct.norm(), 1e-300));
    worst_res = std::max(worst_res, ws.max_lift_residual);
    worst_sym = std::max(worst_sym, (ws.G - ws.G.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Mat> es(ws.G, Eigen::EigenvaluesOnly);
    worst_neg = std::max(worst_neg, -es.eigenvalues().minCoeff() / ws.G.norm());
  }
  out.push_back(check("wngd", "least_squares_vs_inverse", 1e-8, worst_dir, worst_dir < 1e-8, "20 random theta, N=32"));
  out.push_back(check("wngd", "lift_residual", 1e-8, worst_res, worst_res < 1e-8));
  out.push_back(check("wngd", "G_symmetry", 1e-14, worst_sym, worst_sym <= 1e-14));
  out.push_back(check("wngd", "G_psd", 1e-10, worst_neg, worst_neg <= 1e-10, "max(-lambda_min/|G|)"));
  return out;
}

std::vector<CheckResult> suite_gradients() {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(5);
  auto probe = [&](const std::string& name, const ProblemInstance& p) {
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const Vec x = p.sample_feasible(rng);
      const Vec g = p.objective.grad(x);
      const Vec fd = finite_difference_gradient(p.objective.eval, x);
      worst = std::max(worst, (g - fd).norm() / std::max({g.norm(), fd.norm(), 1e-12}));
    }
    out.push_back(check("gradients", "fd_relative_error[" + name + "]", 1e-6, worst, worst < 1e-6, "50 points"));
  };
  for (double a : {1.0, 100.0, 10000.0}) probe("quad alpha=" + fmt(a), quadratic_problem(a));
  for (double a : {1.0, 100.0, 10000.0}) probe("rosen alpha=" + fmt(a), rosenbrock_problem(a));
  probe("doptimal m=5 n=20", doptimal_problem(generate_doptimal_data(5, 20, 3)));
  probe("doptimal m=10 n=100", doptimal_problem(generate_doptimal_data(10, 100, 42)));
  probe("mixture N=32", mixture_problem(32).problem);
  return out;
}

}  // namespace

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"energy",     "bounds",    "projections", "wngd",
                                                 "pl_example", "ngd_equiv", "gradients"};
  return names;
}

std::vector<CheckResult> verify_suite(const std::string& suite) {
  if (suite == "energy") return suite_energy();
  if (suite == "bounds") return suite_bounds();
  if (suite == "projections") return suite_projections();
  if (suite == "wngd") return suite_wngd();
  if (suite == "pl_example") return suite_pl_example();
  if (suite == "ngd_equiv") return suite_ngd_equiv();
  if (suite == "gradients") return suite_gradients();
  throw Error("unknown verify suite '" + suite + "'");
}

// ---------------------------------------------------------------- output

namespace {
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string trace_csv_header() { return "k,L,r,v_norm,grad_norm,dtheta_norm,eta_eff,t_us"; }

std::string trace_to_csv(const RunTrace& tr) {
  std::string s = trace_csv_header() + "\n";
  for (const auto& r : tr.records) {
    s += std::to_string(r.k) + "," + num(r.L) + "," + num(r.r) + "," + num(r.v_norm) + "," + num(r.grad_norm) + "," +
         num(r.dtheta_norm) + "," + num(r.eta_eff) + "," + num(std::round(r.t_us)) + "\n";
  }
  return s;
}

std::string summary_csv_header() { return "problem,method,alpha_cond,eps,iterations,wall_ms,gap,eta,status"; }

std::string summary_to_csv(const SummaryRow& r) {
  return r.problem + "," + r.method + "," + num(r.alpha_cond) + "," + num(r.eps) + "," + std::to_string(r.iterations) +
         "," + num(r.wall_ms) + "," + num(r.gap) + "," + num(r.eta) + "," + r.status;
}

namespace {
json summary_json(const SummaryRow& r) {
  json j;
  j["problem"] = r.problem;
  j["method"] = r.method;
  j["alpha_cond"] = r.alpha_cond;
  j["eps"] = r.eps;
  j["iterations"] = r.iterations;
  j["wall_ms"] = r.wall_ms;
  j["gap"] = r.gap;
  j["eta"] = r.eta;
  j["status"] = r.status;
  j["theta_final"] = std::vector<double>(r.theta_final.data(), r.theta_final.data() + r.theta_final.size());
  return j;
}
}  // namespace

std::string summary_to_json(const SummaryRow& r) { return summary_json(r).dump(); }

std::string trace_to_json(const RunTrace& tr, const SummaryRow& row) {
  json j;
  j["summary"] = summary_json(row);
  j["status"] = to_string(tr.status);
  json recs = json::array();
  for (const auto& r : tr.records)
    recs.push_back({{"k", r.k},
                    {"L", r.L},
                    {"r", r.r},
                    {"v_norm", r.v_norm},
                    {"grad_norm", r.grad_norm},
                    {"dtheta_norm", r.dtheta_norm},
                    {"eta_eff", r.eta_eff},
                    {"t_us", std::round(r.t_us)}});
  j["records"] = recs;
  return j.dump(1) + "\n";
}

int threads_from_env() {
  const char* s = std::getenv("ENERGIA_THREADS");
  if (s == nullptr || *s == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || v < 1) return 1;
  return static_cast<int>(std::min<long>(v, 256));
}

int exit_code_for(Status s) {
  switch (s) {
    case Status::converged: return 0;
    case Status::budget_exhausted: return 2;
    case Status::infeasible_step:
    case Status::numerical_failure: return 3;
  }
  return 3;
}

}  // namespace energia
