#ifndef POPDYN_HARNESS_HPP
#define POPDYN_HARNESS_HPP

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popdyn/config.hpp"
#include "popdyn/ensemble.hpp"
#include "popdyn/models/arrigoni.hpp"
#include "popdyn/models/kretzschmar.hpp"
#include "popdyn/ode.hpp"

namespace popdyn {

struct InitialProfile {
  std::vector<std::pair<int64_t, double>> mass;  // scaled density x(0)
  SparseVec vec() const;
};

struct ExperimentPlan {
  std::string model_id = "kretzschmar";
  KretzschmarParams kretzschmar;
  ArrigoniParams arrigoni;
  std::vector<int64_t> n_grid = {100, 316, 1000, 3162, 10000};
  size_t replicates = 200;
  double t_end = 2.0;
  InitialProfile initial;   // empty: model default profile
  uint64_t seed = 20260809;
  int threads = 0;          // 0: hardware concurrency
  std::string out_dir = "out";
  double rtol = 1e-9;
  double atol = 1e-12;
  double eps_tail = 1e-10;
  int refine_points = 512;  // sup-statistic refinement grid
  int record_points = 41;
};

ExperimentPlan plan_from_config(const Config& cfg);
std::unique_ptr<Model> build_model(const ExperimentPlan& plan);
InitialProfile default_initial(const std::string& model_id);

// X^j(0) = floor(N x^j(0)).
SparseState floor_initial(const InitialProfile& profile, int64_t n_scale);

struct ConvergenceRow {
  int64_t n = 0;
  size_t replicates = 0;
  double mean_sup_err = 0.0;
  double sd = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::vector<std::vector<double>> errors;  // per row, per replicate sup error
  std::vector<double> initial_err;          // ||x_N(0) - x(0)||_mu per row
  double xi = 0.0;                          // sup_t ||x(t)||_mu
  double kstar = 0.0;                       // e^{wT} K(mu, F; 2 xi)
  double gate = 0.0;                        // xi/2 e^{-(w+kstar)T} initial-condition gate
  std::vector<std::string> warnings;
};

// For each N: X_N(0) by floor rounding, `replicates` exact simulations,
// sup over jump times and a refinement grid of ||x_N(t) - x(t)||_mu
// against one shared deterministic solution, aggregated per N.
ConvergenceTable run_convergence(const ExperimentPlan& plan, const Model& model,
                                 const OdeSolution* presolved = nullptr);

enum class RateCorrection { none, sqrt_log };

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;  // log prefactor
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  RateCorrection correction = RateCorrection::none;
  size_t bootstrap = 1000;
};

// OLS of log(mean error) on log N, optionally dividing the errors by
// sqrt(log N) first; bootstrap CI over replicates.
RateFit fit_rate(const ConvergenceTable& table, RateCorrection corr, uint64_t seed = 7,
                 size_t bootstrap = 1000);

struct ExceedancePoint {
  int64_t n = 0;
  double multiplier = 0.0;
  double fraction = 0.0;  // fraction of replicates with err > mult*sqrt(log N / N)
};

std::vector<ExceedancePoint> exceedance_probe(const ConvergenceTable& table,
                                              std::span<const double> multipliers);

// convergence.csv + errors.csv + exceedance.csv + ratefit.json +
// report.txt + config_resolved.toml under dir.
void write_report(const ExperimentPlan& plan, const ConvergenceTable& table, const RateFit* fit,
                  std::span<const ExceedancePoint> exceedance, const std::string& dir);

// Round-trip loader for convergence.csv/errors.csv.
ConvergenceTable load_table(const std::string& dir);

// trajectory/solution serialization (time,key,value rows)
void write_trajectory_csv(const SimResult& res, int64_t n_scale, const std::string& path);
void write_trajectory_jsonl(const SimResult& res, int64_t n_scale, const std::string& path);
void write_solution_csv(const OdeSolution& sol, std::span<const double> times,
                        const std::string& path);
void write_summary_jsonl(const EnsembleSummary& summary, const std::string& path);

}  // namespace popdyn

#endif
