#include "energia/harness.hpp"
#include "energia/preconditioner.hpp"
#include "energia/problems.hpp"
#include "energia/stepper.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace energia;

namespace {

Mat trace_matrix(const RunTrace& tr) {
  Mat out(static_cast<Eigen::Index>(tr.records.size()), 8);
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    const StepRecord& s = tr.records[i];
    out.row(static_cast<Eigen::Index>(i)) << static_cast<double>(s.k), s.L, s.r, s.v_norm, s.grad_norm,
        s.dtheta_norm, s.eta_eff, s.t_us;
  }
  return out;
}

py::dict trace_dict(const RunTrace& tr) {
  py::dict d;
  d["status"] = to_string(tr.status);
  d["message"] = tr.message;
  d["iterations"] = tr.iterations();
  d["theta"] = tr.theta_final;
  d["L"] = tr.L_final;
  d["r"] = tr.r_final;
  d["trace"] = trace_matrix(tr);
  d["columns"] = trace_csv_header();
  return d;
}

py::dict minimize(const std::function<double(const Vec&)>& fun, const std::function<Vec(const Vec&)>& grad,
                  const Vec& x0, double eta, double c, long max_iter, double tol, std::optional<Mat> metric,
                  std::optional<double> optimum_value) {
  ObjectiveSpec f;
  f.eval = fun;
  f.grad = grad;
  f.c = c;
  if (optimum_value) f.optimum = Optimum{Vec(), *optimum_value};
  std::unique_ptr<Preconditioner> pre;
  if (metric)
    pre = std::make_unique<FixedSpdPreconditioner>(*metric);
  else
    pre = std::make_unique<IdentityPreconditioner>(x0.size());
  AepgConfig cfg;
  cfg.eta = eta;
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  cfg.record_timing = false;
  return trace_dict(run_aepg(f, *pre, x0, cfg));
}

py::dict run_config(const std::string& json_text) {
  ExperimentConfig cfg = parse_experiment_config(json_text);
  Experiment ex = build_experiment(cfg);
  RunTrace tr = run_experiment(ex, RunOptions{cfg.eta, cfg.max_iter, false, {}});
  py::dict d = trace_dict(tr);
  d["gap"] = summarize(ex, tr, cfg.eta, 0.0).gap;
  d["c"] = tr.c;
  return d;
}

}  // namespace

PYBIND11_MODULE(_energia, m) {
  m.doc() = "Energy-adaptive preconditioned gradient descent";

  py::register_exception<Error>(m, "EnergiaError", PyExc_RuntimeError);

  m.def(
      "aepg_step",
      [](const Vec& theta, double r, const Vec& v, double eta) {
        StepResult s = aepg_step(EnergyState{theta, r, 0}, v, eta);
        return py::make_tuple(s.state.theta, s.state.r, to_string(s.status));
      },
      py::arg("theta"), py::arg("r"), py::arg("v"), py::arg("eta"),
      "One step from (theta, r) along direction v. Returns (theta, r, status).");

  m.def("minimize", &minimize, py::arg("fun"), py::arg("grad"), py::arg("x0"), py::arg("eta") = 0.1,
        py::arg("c") = 1.0, py::arg("max_iter") = 10000, py::arg("tol") = 1e-8, py::arg("metric") = py::none(),
        py::arg("optimum_value") = py::none(),
        "Unconstrained run with an optional fixed SPD metric. Stops on the objective gap when\n"
        "optimum_value is given, otherwise on the preconditioned gradient norm.");

  m.def("run", &run_config, py::arg("config_json"), "Run one experiment from a versioned JSON config.");

  m.def("simplex_apply", &simplex_apply, py::arg("theta"), py::arg("g"));
  m.def("projection_matrix", &projection_matrix, py::arg("G"), py::arg("B"));
  m.def("fixed_spd_apply", &fixed_spd_apply, py::arg("A"), py::arg("g"));

  m.def(
      "doptimal_data", [](int mm, int n, std::uint64_t seed) { return generate_doptimal_data(mm, n, seed).U; },
      py::arg("m"), py::arg("n"), py::arg("seed") = 42, "Design matrix U (n x m).");
  m.def(
      "doptimal_eval",
      [](const Mat& U, const Vec& theta) {
        DoptimalData d;
        d.U = U;
        d.n = static_cast<int>(U.rows());
        d.m = static_cast<int>(U.cols());
        DoptimalEval e = doptimal_eval(d, theta);
        return py::make_tuple(e.L, e.grad);
      },
      py::arg("U"), py::arg("theta"));

  m.def(
      "verify",
      [](const std::string& suite) {
        py::list out;
        for (const CheckResult& c : verify_suite(suite)) {
          py::dict d;
          d["suite"] = c.suite;
          d["name"] = c.name;
          d["tolerance"] = c.tolerance;
          d["observed"] = c.observed;
          d["pass"] = c.pass;
          d["detail"] = c.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("suite"));
  m.def("verify_suites", &verify_suite_names);
  m.def("trace_header", &trace_csv_header);
}
