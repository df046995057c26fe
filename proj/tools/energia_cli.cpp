#include "energia/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace energia;

namespace {

struct BadConfig : Error {
  using Error::Error;
};

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw BadConfig("--eta-grid: cannot parse '" + tok + "'");
    }
    if (pos != tok.size()) throw BadConfig("--eta-grid: cannot parse '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw BadConfig("--eta-grid is empty");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadConfig("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BadConfig("cannot write " + path);
  out << text;
}

std::string rows_to_text(const std::vector<SummaryRow>& rows, const std::vector<std::string>& notes,
                         const std::string& format) {
  if (format == "json") {
    std::string s = "{\"rows\":[";
    for (std::size_t i = 0; i < rows.size(); ++i) s += (i ? "," : "") + summary_to_json(rows[i]);
    s += "],\"notes\":[";
    for (std::size_t i = 0; i < notes.size(); ++i) {
      std::string esc;
      for (char ch : notes[i]) {
        if (ch == '"' || ch == '\\') esc += '\\';
        esc += ch;
      }
      s += (i ? ",\"" : "\"") + esc + "\"";
    }
    return s + "]}\n";
  }
  std::string s = summary_csv_header() + "\n";
  for (const auto& r : rows) s += summary_to_csv(r) + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"energia: energy-adaptive preconditioned gradient descent toolkit"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_path, eta_grid_str;
  std::optional<double> c_opt, r0_opt, eta_star_opt;
  bool no_timing = false;

  auto* run = app.add_subcommand("run", "run one method on one problem and write its trace");
  run->add_option("--config", config_path, "JSON config file (flags given on the command line override it)");
  run->add_option("--problem", cfg.problem, "quad | rosen | doptimal | mixture");
  run->add_option("--method", cfg.method, "aepg | aegd | gd | hrgd | wngd | fw | fw_away");
  run->add_option("--eta", cfg.eta, "step size");
  run->add_option("--eta-grid", eta_grid_str, "comma-separated step sizes; the best one is rerun and traced");
  run->add_option("--c", c_opt, "shift in l = sqrt(L + c)");
  run->add_option("--r0", r0_opt, "initial energy (default l(theta0))");
  run->add_option("--max-iter", cfg.max_iter, "iteration budget");
  run->add_option("--tol", cfg.tol, "target objective gap");
  run->add_option("--seed", cfg.seed, "data seed (doptimal)");
  run->add_option("--grid-n", cfg.grid_n, "cells per side (mixture)");
  run->add_option("--alpha", cfg.alpha, "condition parameter (quad, rosen)");
  run->add_option("--m", cfg.m, "design dimension (doptimal)");
  run->add_option("--n", cfg.n, "number of design points (doptimal)");
  run->add_option("--data", cfg.data, "D-optimal data CSV written by gen-data");
  run->add_option("--eps-feas", cfg.eps_feas, "barrier fraction kept by the feasibility line search");
  run->add_option("--eta-star", eta_star_opt, "largest step tried by the feasibility line search");
  run->add_option("--out", cfg.out, "trace output path (default stdout)");
  run->add_option("--format", cfg.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("--no-timing", no_timing, "write t_us = 0 so repeated runs are byte-identical");

  std::string table, bench_out, bench_format = "csv";
  BenchOptions bopt;
  auto* bench = app.add_subcommand("bench", "grid-tune step sizes and print a summary table");
  bench->add_option("--problem", table, "quad | rosen | doptimal | mixture")
      ->required()
      ->check(CLI::IsMember({"quad", "rosen", "doptimal", "mixture"}));
  bench->add_option("--eta-grid", eta_grid_str, "comma-separated step sizes");
  bench->add_option("--max-iter", bopt.max_iter, "iteration budget per run (0: table default)");
  bench->add_option("--grid-n", bopt.grid_n, "cells per side (mixture)");
  bench->add_option("--seed", bopt.seed, "data seed (doptimal)");
  bench->add_option("--m", bopt.m, "design dimension (doptimal)");
  bench->add_option("--n", bopt.n, "number of design points (doptimal)");
  bench->add_option("--out", bench_out, "report path (default stdout)");
  bench->add_option("--format", bench_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  bench->add_flag("--no-timing", no_timing, "report wall_ms = 0");

  std::string suite = "all", verify_out, verify_format = "csv";
  auto* verify = app.add_subcommand("verify", "run invariant checks; nonzero exit iff a check fails");
  verify->add_option("--suite", suite, "suite name or 'all'");
  verify->add_option("--out", verify_out, "report path (default stdout)");
  verify->add_option("--format", verify_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

  int gm = 30, gn = 300;
  std::uint64_t gseed = 42;
  std::string gout;
  auto* gen = app.add_subcommand("gen-data", "write a D-optimal design matrix as CSV");
  gen->add_option("--m", gm, "design dimension");
  gen->add_option("--n", gn, "number of design points");
  gen->add_option("--seed", gseed, "generator seed");
  gen->add_option("--out", gout, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) {
      if (!config_path.empty()) {
        // Command-line flags win over the file: re-parse with the file as the base.
        ExperimentConfig base = parse_experiment_config(read_file(config_path));
        for (auto* opt : run->get_options()) {
          if (opt->count() > 0) continue;
          const std::string name = opt->get_name();
          if (name == "--problem") cfg.problem = base.problem;
          else if (name == "--method") cfg.method = base.method;
          else if (name == "--eta") cfg.eta = base.eta;
          else if (name == "--max-iter") cfg.max_iter = base.max_iter;
          else if (name == "--tol") cfg.tol = base.tol;
          else if (name == "--seed") cfg.seed = base.seed;
          else if (name == "--grid-n") cfg.grid_n = base.grid_n;
          else if (name == "--alpha") cfg.alpha = base.alpha;
          else if (name == "--m") cfg.m = base.m;
          else if (name == "--n") cfg.n = base.n;
          else if (name == "--data") cfg.data = base.data;
          else if (name == "--eps-feas") cfg.eps_feas = base.eps_feas;
          else if (name == "--out") cfg.out = base.out;
          else if (name == "--format") cfg.format = base.format;
          else if (name == "--c") c_opt = base.c;
          else if (name == "--r0") r0_opt = base.r0;
          else if (name == "--eta-star") eta_star_opt = base.eta_star;
          else if (name == "--eta-grid" && !base.eta_grid.empty()) cfg.eta_grid = base.eta_grid;
          else if (name == "--no-timing") no_timing = !base.timing;
        }
      }
      if (!eta_grid_str.empty()) cfg.eta_grid = parse_grid(eta_grid_str);
      cfg.c = c_opt;
      cfg.r0 = r0_opt;
      cfg.eta_star = eta_star_opt;
      cfg.timing = !no_timing;
      try {
        validate_config(cfg);
      } catch (const Error& e) {
        throw BadConfig(e.what());
      }

      Experiment ex = [&] {
        try {
          return build_experiment(cfg);
        } catch (const std::exception& e) {
          throw BadConfig(e.what());
        }
      }();
      double eta = cfg.eta;
      if (!cfg.eta_grid.empty()) {
        TuneResult t = tune_eta(ex, cfg.eta_grid, cfg.max_iter, false);
        eta = t.best.eta;
        std::cerr << "tuned eta = " << eta << (t.found ? "" : " (no grid value converged)") << "\n";
      }
      const auto t0 = std::chrono::steady_clock::now();
      RunTrace tr = run_experiment(ex, RunOptions{eta, cfg.max_iter, cfg.timing, {}});
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      SummaryRow row = summarize(ex, tr, eta, cfg.timing ? ms : 0.0);
      emit(cfg.out, cfg.format == "json" ? trace_to_json(tr, row) : trace_to_csv(tr));
      std::cerr << summary_csv_header() << "\n" << summary_to_csv(row) << "\n";
      if (!tr.message.empty()) std::cerr << tr.message << "\n";
      return exit_code_for(tr.status);
    }

    if (*bench) {
      if (!eta_grid_str.empty()) bopt.eta_grid = parse_grid(eta_grid_str);
      for (double e : bopt.eta_grid)
        if (!(e > 0.0)) throw BadConfig("eta grid values must be positive");
      bopt.threads = threads_from_env();
      bopt.timing = !no_timing;
      BenchReport rep = bench_table(table, bopt);
      emit(bench_out, rows_to_text(rep.rows, rep.notes, bench_format));
      for (const auto& n : rep.notes) std::cerr << n << "\n";
      return 0;
    }

    if (*verify) {
      std::vector<std::string> suites;
      if (suite == "all") {
        suites = verify_suite_names();
      } else {
        const auto& names = verify_suite_names();
        if (std::find(names.begin(), names.end(), suite) == names.end()) throw BadConfig("unknown suite " + suite);
        suites = {suite};
      }
      bool ok = true;
      std::string text = verify_format == "json" ? "[" : "suite,check,tolerance,observed,result,detail\n";
      bool first = true;
      for (const auto& s : suites) {
        for (const auto& c : verify_suite(s)) {
          ok = ok && c.pass;
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.6e", c.observed);
          char tol[32];
          std::snprintf(tol, sizeof tol, "%.1e", c.tolerance);
          if (verify_format == "json") {
            text += std::string(first ? "" : ",") + "\n {\"suite\":\"" + c.suite + "\",\"check\":\"" + c.name +
                    "\",\"tolerance\":" + tol + ",\"observed\":" + buf + ",\"pass\":" + (c.pass ? "true" : "false") +
                    ",\"detail\":\"" + c.detail + "\"}";
          } else {
            text += c.suite + ",\"" + c.name + "\"," + tol + "," + buf + "," + (c.pass ? "PASS" : "FAIL") + ",\"" +
                    c.detail + "\"\n";
          }
          first = false;
        }
      }
      if (verify_format == "json") text += "\n]\n";
      emit(verify_out, text);
      return ok ? 0 : 3;
    }

    if (*gen) {
      if (gm < 1 || gn <= gm) throw BadConfig("gen-data needs 1 <= m < n");
      DoptimalData d = generate_doptimal_data(gm, gn, gseed);
      save_doptimal_csv(gout, d);
      if (d.seed != gseed) std::cerr << "seed " << gseed << " gave singular data; used seed " << d.seed << "\n";
      return 0;
    }
  } catch (const BadConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
