#pragma once

#include "energia/problems.hpp"
#include "energia/stepper.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace energia {

inline constexpr int kConfigVersion = 1;

struct ExperimentConfig {
  int version = kConfigVersion;
  std::string problem = "quad";  // quad | rosen | doptimal | mixture
  double alpha = 1.0;            // condition parameter for quad and rosen
  int m = 30;
  int n = 300;
  std::uint64_t seed = 42;
  int grid_n = 64;
  std::string data;              // optional D-optimal CSV path
  std::string method = "aepg";   // aepg | aegd | gd | hrgd | wngd | fw | fw_away
  double eta = 0.1;
  std::vector<double> eta_grid;
  std::optional<double> c;
  std::optional<double> r0;
  long max_iter = 100000;
  double tol = 1e-7;
  double eps_feas = 0.25;
  std::optional<double> eta_star;
  std::string out;
  std::string format = "csv";
  bool timing = true;
};

// Strict JSON reader: unknown keys, a missing or unsupported version, and
// invalid values raise Error.
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_to_json(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

// 10^lo ... 10^hi with `per_decade` points per decade, endpoints included.
std::vector<double> log_grid(double lo_exp, double hi_exp, int per_decade);
std::vector<double> default_eta_grid();  // 1e-3 ... 10, 13 points
std::vector<double> table_eta_grid();    // 1e-5 ... 10, 5 points per decade

// Owns the problem, data, and preconditioner for one configuration.
struct Experiment {
  ExperimentConfig cfg;
  ProblemInstance problem;
  std::shared_ptr<const DoptimalData> data;
  std::shared_ptr<const MixtureProblem> mixture;
  std::shared_ptr<const Preconditioner> precond;
  std::optional<FwReference> reference;
};

Experiment build_experiment(const ExperimentConfig& cfg);

// Shift used by the harness for barrier problems: 1 - L* raised, when needed, so
// that l(theta0) >= 2 (l(theta0) - l*) / lambda1 with lambda1 the smallest
// eigenvalue of the barrier Hessian at theta0.
double harness_shift(const ProblemInstance& p);

struct RunOptions {
  double eta = 0.1;
  long max_iter = 100000;
  bool timing = true;
  std::function<void(long, const Vec&)> on_iterate;  // AEPG runs only
};
RunTrace run_experiment(const Experiment& ex, const RunOptions& opt);

struct SummaryRow {
  std::string problem;
  std::string method;
  double alpha_cond = 0.0;
  double eps = 0.0;
  long iterations = 0;
  double wall_ms = 0.0;
  double gap = 0.0;
  double eta = 0.0;
  std::string status;
  Vec theta_final;
};

SummaryRow summarize(const Experiment& ex, const RunTrace& tr, double eta, double wall_ms);

struct TuneResult {
  SummaryRow best;
  bool found = false;
  std::vector<SummaryRow> tried;
};
// Smallest iteration count over the grid; each later run is capped at the best
// count so far. Ties keep the smaller step.
TuneResult tune_eta(const Experiment& ex, const std::vector<double>& grid, long max_iter, bool timing);

struct BenchOptions {
  std::vector<double> eta_grid;  // empty: table default
  long max_iter = 0;             // 0: table default
  int grid_n = 64;
  int threads = 1;
  bool timing = true;
  int m = 30;
  int n = 300;
  std::uint64_t seed = 42;
};

struct BenchReport {
  std::string table;
  std::vector<SummaryRow> rows;
  std::vector<std::string> notes;
};

BenchReport bench_table(const std::string& table, const BenchOptions& opt);

struct CheckResult {
  std::string suite;
  std::string name;
  double tolerance = 0.0;
  double observed = 0.0;
  bool pass = false;
  std::string detail;
};

// Suites: energy, bounds, projections, wngd, pl_example, ngd_equiv, gradients.
std::vector<CheckResult> verify_suite(const std::string& suite);
const std::vector<std::string>& verify_suite_names();

std::string trace_csv_header();
std::string trace_to_csv(const RunTrace& tr);
std::string trace_to_json(const RunTrace& tr, const SummaryRow& row);
std::string summary_csv_header();
std::string summary_to_csv(const SummaryRow& row);
std::string summary_to_json(const SummaryRow& row);

// Worker count from ENERGIA_THREADS (default 1, clamped to at least 1).
int threads_from_env();

// Exit-code contract: 0 converged, 2 budget exhausted, 3 infeasible or numerical failure.
int exit_code_for(Status s);

}  // namespace energia
