// popdyn: simulate, solve, converge, check, fit for the population-model
// toolkit.  Exit codes: 0 ok, 1 usage error, 2 runtime failure,
// 3 property/check violation (CI gating).
#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "popdyn/harness.hpp"
#include "popdyn/model_checks.hpp"
#include "popdyn/moments.hpp"

using namespace popdyn;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::string model;
  int64_t n = 0;
  int64_t replicates = 0;
  double t = 0.0;
  double tol = 0.0;
  int64_t seed = -1;
  int threads = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "plan file (TOML-style key/value)");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--model", model, "kretzschmar|arrigoni|finite");
    cmd->add_option("--N", n, "system size N");
    cmd->add_option("--replicates", replicates, "replicate count");
    cmd->add_option("--T", t, "time horizon");
    cmd->add_option("--tol", tol, "solver tolerance (rtol; atol = rtol*1e-3)");
    cmd->add_option("--seed", seed, "base seed");
    cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
  }

  ExperimentPlan plan() const {
    ExperimentPlan p;
    if (!config.empty()) p = plan_from_config(Config::parse_file(config));
    if (!model.empty()) {
      p.model_id = model;
      if (config.empty()) p.initial = default_initial(model);
    }
    if (n > 0) p.n_grid = {n};
    if (replicates > 0) p.replicates = static_cast<size_t>(replicates);
    if (t > 0) p.t_end = t;
    if (tol > 0) {
      p.rtol = tol;
      p.atol = tol * 1e-3;
    }
    if (seed >= 0) p.seed = static_cast<uint64_t>(seed);
    if (threads >= 0) {
      p.threads = threads;
    } else if (const char* env = std::getenv("POPDYN_THREADS")) {
      p.threads = std::atoi(env);
    }
    if (!out.empty()) p.out_dir = out;
    return p;
  }
};

std::vector<double> linspace(double t1, int n) {
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(t1 * static_cast<double>(i) / n);
  return g;
}

int cmd_simulate(const CommonFlags& flags) {
  ExperimentPlan plan = flags.plan();
  auto model = build_model(plan);
  int64_t n = plan.n_grid.front();
  SparseState x0 = floor_initial(plan.initial, n);
  std::filesystem::create_directories(plan.out_dir);
  SimConfig cfg;
  cfg.n_scale = n;
  cfg.t_end = plan.t_end;
  cfg.seed = plan.seed;
  cfg.record_grid = linspace(plan.t_end, plan.record_points - 1);
  for (size_t rep = 0; rep < plan.replicates; ++rep) {
    SimConfig c = cfg;
    c.stream = rep;
    SimResult res = simulate(*model, x0, c);
    std::string stem = plan.out_dir + "/trajectory_" + std::to_string(rep);
    write_trajectory_csv(res, n, stem + ".csv");
    write_trajectory_jsonl(res, n, stem + ".jsonl");
    std::cout << "replicate " << rep << ": events=" << res.trajectory.event_count << "\n";
  }
  if (plan.replicates > 1) {
    EnsembleSummary summary =
        ensemble(*model, x0, cfg, plan.replicates, plan.threads);
    write_summary_jsonl(summary, plan.out_dir + "/summary.jsonl");
  }
  std::cout << "wrote " << plan.replicates << " trajectories to " << plan.out_dir << "\n";
  return 0;
}

int cmd_solve(const CommonFlags& flags) {
  ExperimentPlan plan = flags.plan();
  auto model = build_model(plan);
  OdeOptions opt;
  opt.rtol = plan.rtol;
  opt.atol = plan.atol;
  opt.eps_tail = plan.eps_tail;
  OdeSolution sol = ode_solve(*model, plan.initial.vec(), plan.t_end, opt);
  std::filesystem::create_directories(plan.out_dir);
  std::vector<double> grid = linspace(plan.t_end, plan.record_points - 1);
  write_solution_csv(sol, grid, plan.out_dir + "/solution.csv");
  std::cout << "solved to T=" << plan.t_end << " with K=" << sol.k_final
            << ", Xi_T=" << sol.xi_sup << ", steps=" << sol.n_steps << "\n";
  std::cout << "wrote " << plan.out_dir << "/solution.csv\n";
  return 0;
}

int cmd_converge(const CommonFlags& flags, bool gate, double slope_min, double slope_max) {
  ExperimentPlan plan = flags.plan();
  auto model = build_model(plan);
  ConvergenceTable table = run_convergence(plan, *model);
  for (const std::string& w : table.warnings) std::cerr << "warning: " << w << "\n";
  RateFit fit = fit_rate(table, RateCorrection::sqrt_log, plan.seed, 1000);
  double prefactor = std::exp(fit.intercept);
  std::vector<double> mults = {0.5 * prefactor, prefactor, 2.0 * prefactor, 4.0 * prefactor};
  auto exc = exceedance_probe(table, mults);
  write_report(plan, table, &fit, exc, plan.out_dir);
  for (const ConvergenceRow& r : table.rows)
    std::cout << "N=" << r.n << " mean_sup_err=" << r.mean_sup_err << " sd=" << r.sd << "\n";
  std::cout << "slope(sqrt-log corrected)=" << fit.slope << " CI=[" << fit.ci_lo << ","
            << fit.ci_hi << "] prefactor=" << prefactor << "\n";
  std::cout << "report written to " << plan.out_dir << "\n";
  if (gate) {
    bool decreasing = true;
    for (size_t i = 1; i < table.rows.size(); ++i)
      if (table.rows[i].mean_sup_err >= table.rows[i - 1].mean_sup_err) decreasing = false;
    if (!decreasing || fit.slope < slope_min || fit.slope > slope_max) {
      std::cerr << "gate failed: decreasing=" << decreasing << " slope=" << fit.slope << "\n";
      return 3;
    }
  }
  return 0;
}

int cmd_check(const CommonFlags& flags, int64_t n_states) {
  ExperimentPlan plan = flags.plan();
  auto model = build_model(plan);
  int64_t n = plan.n_grid.size() == 1 ? plan.n_grid.front() : 1000;
  auto states = sample_states(*model, n, static_cast<size_t>(n_states), plan.seed);
  CheckReport rep = check_model_assumptions(*model, states, n, {0, 1, 2});

  // interior drift-split residual over the same states
  double worst = 0.0;
  for (const SparseState& X : states) {
    SparseVec x = scaled(X, 1.0 / static_cast<double>(n));
    int64_t K = std::max<int64_t>(x.max_index() + model->jstar(), 8) + 40;
    worst = std::max(worst, drift_split_residual(*model, x, K));
  }
  rep.rows.push_back({"drift_split_interior", worst < 1e-10, 1e-10 - worst,
                      "max residual " + std::to_string(worst)});

  std::cout << "model=" << model->name() << " N=" << n << " states=" << n_states << "\n"
            << rep.to_string();
  if (!rep.all_pass()) {
    std::cerr << "assumption checks failed\n";
    return 3;
  }
  return 0;
}

int cmd_fit(const CommonFlags& flags, const std::string& correction) {
  ExperimentPlan plan = flags.plan();
  ConvergenceTable table = load_table(plan.out_dir);
  RateCorrection corr =
      correction == "none" ? RateCorrection::none : RateCorrection::sqrt_log;
  RateFit fit = fit_rate(table, corr, plan.seed, 1000);
  write_report(plan, table, &fit, {}, plan.out_dir);
  std::cout << "slope=" << fit.slope << " CI=[" << fit.ci_lo << "," << fit.ci_hi
            << "] intercept=" << fit.intercept << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"population-process simulator and numerical-limit toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool gate = false;
  double slope_min = -0.60, slope_max = -0.40;
  int64_t n_states = 100;
  std::string correction = "sqrt_log";

  CLI::App* sim = app.add_subcommand("simulate", "exact trajectories to CSV/JSONL");
  flags.attach(sim);
  CLI::App* solve = app.add_subcommand("solve", "deterministic solution to CSV");
  flags.attach(solve);
  CLI::App* conv = app.add_subcommand("converge", "convergence study + rate fit");
  flags.attach(conv);
  conv->add_flag("--gate", gate, "exit 3 unless errors decrease and the slope is in range");
  conv->add_option("--slope-min", slope_min, "gate: smallest acceptable slope");
  conv->add_option("--slope-max", slope_max, "gate: largest acceptable slope");
  CLI::App* check = app.add_subcommand("check", "assumption report on sampled states");
  flags.attach(check);
  check->add_option("--states", n_states, "number of sampled states");
  CLI::App* fit = app.add_subcommand("fit", "refit the rate from a saved table");
  flags.attach(fit);
  fit->add_option("--correction", correction, "none|sqrt_log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(flags);
    if (solve->parsed()) return cmd_solve(flags);
    if (conv->parsed()) return cmd_converge(flags, gate, slope_min, slope_max);
    if (check->parsed()) return cmd_check(flags, n_states);
    if (fit->parsed()) return cmd_fit(flags, correction);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
