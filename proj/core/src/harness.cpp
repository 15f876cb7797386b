#include "popdyn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "popdyn/errors.hpp"
#include "popdyn/models/finite.hpp"
#include "popdyn/moments.hpp"

namespace popdyn {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double h = q * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

// sup_t ||X(t)/N - x(t)||_mu accumulated over every observed time
class SupErrorObserver final : public Observer {
 public:
  SupErrorObserver(const OdeSolution& sol, const WeightSystem& ws, double inv_n)
      : cursor_(sol), inv_n_(inv_n), ws_(&ws) {
    buf_.resize(sol.k_final + 1);
    mu_.resize(buf_.size());
    for (size_t i = 0; i < mu_.size(); ++i) mu_[i] = ws.mu(static_cast<int64_t>(i));
  }

  void on_state(double t, const SparseState& X) override {
    cursor_.eval(t, buf_);
    const auto& es = X.entries();
    size_t p = 0;
    double s = 0.0;
    for (size_t i = 0; i < buf_.size(); ++i) {
      double xv = 0.0;
      if (p < es.size() && es[p].first == static_cast<int64_t>(i)) {
        xv = static_cast<double>(es[p].second) * inv_n_;
        ++p;
      }
      s += mu_[i] * std::abs(xv - buf_[i]);
    }
    for (; p < es.size(); ++p)
      s += ws_->mu(es[p].first) * static_cast<double>(es[p].second) * inv_n_;
    sup_ = std::max(sup_, s);
  }

  double sup() const { return sup_; }

 private:
  SolutionCursor cursor_;
  double inv_n_;
  const WeightSystem* ws_;
  std::vector<double> buf_, mu_;
  double sup_ = 0.0;
};

}  // namespace

SparseVec InitialProfile::vec() const {
  SparseVec x;
  for (const auto& [j, v] : mass) x.set(j, v);
  return x;
}

InitialProfile default_initial(const std::string& model_id) {
  if (model_id == "arrigoni") return {{{0, 0.5}, {1, 0.5}}};
  if (model_id == "kretzschmar") return {{{0, 0.6}, {1, 0.3}, {2, 0.1}}};
  return {{{0, 1.0}}};
}

ExperimentPlan plan_from_config(const Config& cfg) {
  ExperimentPlan plan;
  plan.model_id = cfg.get_string("model", plan.model_id);
  plan.t_end = cfg.get_double("T", plan.t_end);
  plan.replicates = static_cast<size_t>(cfg.get_int("replicates", static_cast<int64_t>(plan.replicates)));
  if (cfg.has("n_grid")) plan.n_grid = cfg.get_int_list("n_grid");
  plan.seed = static_cast<uint64_t>(cfg.get_int("seed", static_cast<int64_t>(plan.seed)));
  plan.threads = static_cast<int>(cfg.get_int("threads", plan.threads));
  plan.out_dir = cfg.get_string("out_dir", plan.out_dir);
  plan.rtol = cfg.get_double("rtol", plan.rtol);
  plan.atol = cfg.get_double("atol", plan.atol);
  plan.eps_tail = cfg.get_double("eps_tail", plan.eps_tail);
  plan.refine_points = static_cast<int>(cfg.get_int("refine_points", plan.refine_points));
  plan.record_points = static_cast<int>(cfg.get_int("record_points", plan.record_points));
  if (cfg.has("initial")) {
    plan.initial.mass = cfg.get_pair_list("initial");
  } else {
    plan.initial = default_initial(plan.model_id);
  }

  KretzschmarParams& kp = plan.kretzschmar;
  kp.mu_d = cfg.get_double("kretzschmar.mu_d", kp.mu_d);
  kp.kappa = cfg.get_double("kretzschmar.kappa", kp.kappa);
  kp.alpha = cfg.get_double("kretzschmar.alpha", kp.alpha);
  kp.beta = cfg.get_double("kretzschmar.beta", kp.beta);
  kp.theta = cfg.get_double("kretzschmar.theta", kp.theta);
  kp.lambda = cfg.get_double("kretzschmar.lambda", kp.lambda);
  kp.c = cfg.get_double("kretzschmar.c", kp.c);

  ArrigoniParams& ap = plan.arrigoni;
  double d_const = cfg.get_double("arrigoni.d", 0.5);
  double b0 = cfg.get_double("arrigoni.b0", 1.0);
  double b_slope = cfg.get_double("arrigoni.b_slope", 0.1);
  ap.d = [d_const](int64_t) { return d_const; };
  ap.b = [b0, b_slope](int64_t i) { return b0 / (1.0 + b_slope * static_cast<double>(i)); };
  ap.gamma = cfg.get_double("arrigoni.gamma", ap.gamma);
  ap.rho = cfg.get_double("arrigoni.rho", ap.rho);
  ap.kappa = cfg.get_double("arrigoni.kappa", ap.kappa);
  ap.sup_d = d_const;
  ap.sup_d_over_i = d_const;
  ap.sup_b = b_slope >= 0 ? b0 / (1.0 + b_slope) : b0;
  return plan;
}

std::unique_ptr<Model> build_model(const ExperimentPlan& plan) {
  if (plan.model_id == "kretzschmar") return make_kretzschmar(plan.kretzschmar);
  if (plan.model_id == "arrigoni") return make_arrigoni(plan.arrigoni);
  if (plan.model_id == "finite") return make_birth_death(1.0, 1.0, 30);
  throw InvalidParam("unknown model id: " + plan.model_id);
}

SparseState floor_initial(const InitialProfile& profile, int64_t n_scale) {
  SparseState X;
  for (const auto& [j, v] : profile.mass) {
    // slack restores the intended integer when N*x is integral up to rounding
    int64_t c = static_cast<int64_t>(std::floor(v * static_cast<double>(n_scale) + 1e-9));
    if (c > 0) X.add(j, c);
  }
  return X;
}

ConvergenceTable run_convergence(const ExperimentPlan& plan, const Model& model,
                                 const OdeSolution* presolved) {
  for (size_t i = 1; i < plan.n_grid.size(); ++i)
    if (plan.n_grid[i] <= plan.n_grid[i - 1])
      throw InvalidParam("run_convergence: N grid must be strictly increasing");

  ConvergenceTable table;
  if (plan.replicates < 30)
    table.warnings.push_back("fewer than 30 replicates; rate fits will be unstable");

  OdeSolution local;
  const OdeSolution* sol = presolved;
  if (!sol) {
    OdeOptions opt;
    opt.rtol = plan.rtol;
    opt.atol = plan.atol;
    opt.eps_tail = plan.eps_tail;
    local = ode_solve(model, plan.initial.vec(), plan.t_end, opt);
    sol = &local;
  }

  const WeightSystem& ws = model.weights();
  table.xi = sol->xi_sup;
  table.kstar = std::exp(ws.w * plan.t_end) * model.lipschitz_bound(2.0 * table.xi);
  table.gate = 0.5 * table.xi * std::exp(-(ws.w + table.kstar) * plan.t_end);

  std::vector<double> refine;
  for (int i = 0; i <= plan.refine_points; ++i)
    refine.push_back(plan.t_end * static_cast<double>(i) / plan.refine_points);

  const SparseVec x0 = plan.initial.vec();
  for (size_t row = 0; row < plan.n_grid.size(); ++row) {
    int64_t n = plan.n_grid[row];
    SparseState X0 = floor_initial(plan.initial, n);

    double ie = 0.0;
    {
      SparseVec xs = scaled(X0, 1.0 / static_cast<double>(n));
      std::vector<int64_t> idx;
      for (const auto& [j, v] : x0.entries()) idx.push_back(j);
      for (const auto& [j, v] : xs.entries()) idx.push_back(j);
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      for (int64_t j : idx) ie += ws.mu(j) * std::abs(xs.value(j) - x0.value(j));
    }
    table.initial_err.push_back(ie);
    if (ie > table.gate)
      table.warnings.push_back("N=" + std::to_string(n) +
                               ": ||x_N(0)-x(0)||_mu = " + fmt17(ie) +
                               " exceeds the initial-condition gate " + fmt17(table.gate) +
                               "; proceeding");

    SimConfig cfg;
    cfg.n_scale = n;
    cfg.t_end = plan.t_end;
    cfg.seed = plan.seed;
    cfg.stream = static_cast<uint64_t>(row) * 1000003ull;
    cfg.observe_grid = refine;
    cfg.record_grid = {};
    cfg.tracked_r = {0};
    cfg.tracked_components = {};

    double inv_n = 1.0 / static_cast<double>(n);
    auto factory = [&](size_t) -> std::unique_ptr<Observer> {
      return std::make_unique<SupErrorObserver>(*sol, ws, inv_n);
    };
    auto stats = [](size_t, const SimResult&, Observer* obs) -> std::vector<double> {
      return {static_cast<SupErrorObserver*>(obs)->sup()};
    };
    EnsembleSummary summary =
        ensemble(model, X0, cfg, plan.replicates, plan.threads, factory, stats);
    for (const std::string& f : summary.failures) table.warnings.push_back(f);

    std::vector<double> errs;
    for (const auto& st : summary.replicate_stats)
      if (!st.empty()) errs.push_back(st[0]);

    ConvergenceRow r;
    r.n = n;
    r.replicates = errs.size();
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= errs.empty() ? 1.0 : static_cast<double>(errs.size());
    double ss = 0.0;
    for (double e : errs) ss += (e - mean) * (e - mean);
    r.mean_sup_err = mean;
    r.sd = errs.size() > 1 ? std::sqrt(ss / static_cast<double>(errs.size() - 1)) : 0.0;
    r.q10 = quantile(errs, 0.10);
    r.q90 = quantile(errs, 0.90);
    table.rows.push_back(r);
    table.errors.push_back(std::move(errs));
  }
  return table;
}

namespace {

struct Ols {
  double slope, intercept;
};

Ols ols(std::span<const double> xs, std::span<const double> ys) {
  double mx = 0, my = 0;
  size_t n = xs.size();
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return {sxy / sxx, my - (sxy / sxx) * mx};
}

}  // namespace

RateFit fit_rate(const ConvergenceTable& table, RateCorrection corr, uint64_t seed,
                 size_t bootstrap) {
  const size_t n = table.rows.size();
  if (n < 4) throw InvalidParam("fit_rate: need at least 4 rows");
  std::vector<double> xs(n), ys(n);
  for (size_t i = 0; i < n; ++i) {
    double e = table.rows[i].mean_sup_err;
    if (e <= 0) throw DegenerateFit("fit_rate: zero mean error at N=" + std::to_string(table.rows[i].n));
    double logn = std::log(static_cast<double>(table.rows[i].n));
    xs[i] = logn;
    ys[i] = std::log(corr == RateCorrection::sqrt_log ? e / std::sqrt(logn) : e);
  }
  Ols fit0 = ols(xs, ys);

  RateFit fit;
  fit.slope = fit0.slope;
  fit.intercept = fit0.intercept;
  fit.correction = corr;
  fit.bootstrap = bootstrap;

  std::vector<double> slopes;
  slopes.reserve(bootstrap);
  CounterRng rng(seed, 0xB007ull);
  std::vector<double> yb(n);
  for (size_t b = 0; b < bootstrap; ++b) {
    bool degenerate = false;
    for (size_t i = 0; i < n; ++i) {
      const auto& errs = table.errors[i];
      if (errs.empty()) {
        degenerate = true;
        break;
      }
      double m = 0.0;
      for (size_t k = 0; k < errs.size(); ++k)
        m += errs[static_cast<size_t>(rng.next_unit() * static_cast<double>(errs.size()))];
      m /= static_cast<double>(errs.size());
      if (m <= 0) {
        degenerate = true;
        break;
      }
      yb[i] = std::log(corr == RateCorrection::sqrt_log ? m / std::sqrt(xs[i]) : m);
    }
    if (!degenerate) slopes.push_back(ols(xs, yb).slope);
  }
  if (!slopes.empty()) {
    fit.ci_lo = quantile(slopes, 0.025);
    fit.ci_hi = quantile(slopes, 0.975);
    fit.ci_lo = std::min(fit.ci_lo, fit.slope);
    fit.ci_hi = std::max(fit.ci_hi, fit.slope);
  } else {
    fit.ci_lo = fit.ci_hi = fit.slope;
  }
  return fit;
}

std::vector<ExceedancePoint> exceedance_probe(const ConvergenceTable& table,
                                              std::span<const double> multipliers) {
  std::vector<ExceedancePoint> out;
  for (double m : multipliers) {
    for (size_t i = 0; i < table.rows.size(); ++i) {
      double n = static_cast<double>(table.rows[i].n);
      double threshold = m * std::sqrt(std::log(n) / n);
      size_t count = 0;
      for (double e : table.errors[i])
        if (e > threshold) ++count;
      double frac = table.errors[i].empty()
                        ? 0.0
                        : static_cast<double>(count) / static_cast<double>(table.errors[i].size());
      out.push_back({table.rows[i].n, m, frac});
    }
  }
  return out;
}

void write_report(const ExperimentPlan& plan, const ConvergenceTable& table, const RateFit* fit,
                  std::span<const ExceedancePoint> exceedance, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);

  {
    std::ofstream f(dir + "/convergence.csv");
    if (!f) throw IoError("cannot write " + dir + "/convergence.csv");
    f << "N,replicates,mean_sup_err,sd,q10,q90\n";
    for (const ConvergenceRow& r : table.rows)
      f << r.n << "," << r.replicates << "," << fmt17(r.mean_sup_err) << "," << fmt17(r.sd) << ","
        << fmt17(r.q10) << "," << fmt17(r.q90) << "\n";
  }
  {
    std::ofstream f(dir + "/errors.csv");
    f << "N,replicate,sup_err\n";
    for (size_t i = 0; i < table.rows.size(); ++i)
      for (size_t k = 0; k < table.errors[i].size(); ++k)
        f << table.rows[i].n << "," << k << "," << fmt17(table.errors[i][k]) << "\n";
  }
  if (!exceedance.empty()) {
    std::ofstream f(dir + "/exceedance.csv");
    f << "N,multiplier,fraction\n";
    for (const ExceedancePoint& p : exceedance)
      f << p.n << "," << fmt17(p.multiplier) << "," << fmt17(p.fraction) << "\n";
  }
  if (fit) {
    nlohmann::json j;
    j["slope"] = fit->slope;
    j["intercept"] = fit->intercept;
    j["ci_lo"] = fit->ci_lo;
    j["ci_hi"] = fit->ci_hi;
    j["correction"] = fit->correction == RateCorrection::sqrt_log ? "sqrt_log" : "none";
    j["bootstrap"] = fit->bootstrap;
    j["prefactor"] = std::exp(fit->intercept);
    std::ofstream f(dir + "/ratefit.json");
    f << j.dump(2) << "\n";
  }
  {
    std::ofstream f(dir + "/config_resolved.toml");
    f << "model = \"" << plan.model_id << "\"\n";
    f << "T = " << fmt17(plan.t_end) << "\n";
    f << "replicates = " << plan.replicates << "\n";
    f << "seed = " << plan.seed << "\n";
    f << "threads = " << plan.threads << "\n";
    f << "rtol = " << fmt17(plan.rtol) << "\n";
    f << "atol = " << fmt17(plan.atol) << "\n";
    f << "eps_tail = " << fmt17(plan.eps_tail) << "\n";
    f << "refine_points = " << plan.refine_points << "\n";
    f << "record_points = " << plan.record_points << "\n";
    f << "n_grid = [";
    for (size_t i = 0; i < plan.n_grid.size(); ++i)
      f << (i ? ", " : "") << plan.n_grid[i];
    f << "]\n";
    f << "initial = [";
    for (size_t i = 0; i < plan.initial.mass.size(); ++i)
      f << (i ? ", " : "") << "[" << plan.initial.mass[i].first << ", "
        << fmt17(plan.initial.mass[i].second) << "]";
    f << "]\n";
  }
  {
    std::ofstream f(dir + "/report.txt");
    f << "convergence study: model=" << plan.model_id << " T=" << plan.t_end
      << " replicates=" << plan.replicates << "\n";
    f << "Xi_T=" << fmt17(table.xi) << " kstar=" << fmt17(table.kstar)
      << " initial-condition gate=" << fmt17(table.gate) << "\n";
    for (size_t i = 0; i < table.rows.size(); ++i) {
      const ConvergenceRow& r = table.rows[i];
      f << "N=" << r.n << " mean_sup_err=" << fmt17(r.mean_sup_err) << " sd=" << fmt17(r.sd)
        << " q10=" << fmt17(r.q10) << " q90=" << fmt17(r.q90);
      if (i < table.initial_err.size()) f << " initial_err=" << fmt17(table.initial_err[i]);
      f << "\n";
    }
    if (fit)
      f << "rate fit: slope=" << fmt17(fit->slope) << " CI=[" << fmt17(fit->ci_lo) << ","
        << fmt17(fit->ci_hi) << "] intercept=" << fmt17(fit->intercept) << "\n";
    for (const std::string& wmsg : table.warnings) f << "warning: " << wmsg << "\n";
  }
}

ConvergenceTable load_table(const std::string& dir) {
  ConvergenceTable table;
  std::ifstream f(dir + "/convergence.csv");
  if (!f) throw IoError("cannot read " + dir + "/convergence.csv");
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    ConvergenceRow r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    is >> r.n >> r.replicates >> r.mean_sup_err >> r.sd >> r.q10 >> r.q90;
    if (is.fail()) throw IoError("bad row in convergence.csv: " + line);
    table.rows.push_back(r);
    table.errors.emplace_back();
  }
  std::ifstream g(dir + "/errors.csv");
  if (g) {
    std::getline(g, line);
    while (std::getline(g, line)) {
      if (line.empty()) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream is(line);
      int64_t n;
      size_t rep;
      double err;
      is >> n >> rep >> err;
      if (is.fail()) throw IoError("bad row in errors.csv: " + line);
      for (size_t i = 0; i < table.rows.size(); ++i)
        if (table.rows[i].n == n) table.errors[i].push_back(err);
    }
  }
  return table;
}

void write_trajectory_csv(const SimResult& res, int64_t n_scale, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "time,key,value\n";
  const Trajectory& tr = res.trajectory;
  const double inv_n = 1.0 / static_cast<double>(n_scale);
  for (size_t gi = 0; gi < tr.grid.size(); ++gi) {
    double t = tr.grid[gi];
    for (size_t ri = 0; ri < res.martingales.orders.size(); ++ri)
      f << fmt17(t) << ",S" << res.martingales.orders[ri] << "," << fmt17(tr.s_r[ri][gi]) << "\n";
    for (const auto& [j, c] : tr.states[gi].entries())
      f << fmt17(t) << ",x_" << j << "," << fmt17(static_cast<double>(c) * inv_n) << "\n";
    for (size_t ki = 0; ki < res.martingales.components.size(); ++ki)
      f << fmt17(t) << ",mN_" << res.martingales.components[ki] << ","
        << fmt17(res.martingales.m[ki][gi]) << "\n";
  }
}

void write_trajectory_jsonl(const SimResult& res, int64_t n_scale, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  const Trajectory& tr = res.trajectory;
  const double inv_n = 1.0 / static_cast<double>(n_scale);
  for (size_t gi = 0; gi < tr.grid.size(); ++gi) {
    nlohmann::json row;
    row["time"] = tr.grid[gi];
    for (size_t ri = 0; ri < res.martingales.orders.size(); ++ri)
      row["S" + std::to_string(res.martingales.orders[ri])] = tr.s_r[ri][gi];
    nlohmann::json xs = nlohmann::json::object();
    for (const auto& [j, c] : tr.states[gi].entries())
      xs["x_" + std::to_string(j)] = static_cast<double>(c) * inv_n;
    row["state"] = xs;
    for (size_t ki = 0; ki < res.martingales.components.size(); ++ki)
      row["mN_" + std::to_string(res.martingales.components[ki])] = res.martingales.m[ki][gi];
    f << row.dump() << "\n";
  }
}

void write_solution_csv(const OdeSolution& sol, std::span<const double> times,
                        const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "time,key,value\n";
  for (double t : times) {
    std::vector<double> x = eval_solution(sol, t);
    for (size_t j = 0; j < x.size(); ++j)
      if (x[j] != 0.0) f << fmt17(t) << ",x_" << j << "," << fmt17(x[j]) << "\n";
  }
}

void write_summary_jsonl(const EnsembleSummary& summary, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  for (size_t gi = 0; gi < summary.grid.size(); ++gi) {
    nlohmann::json row;
    row["time"] = summary.grid[gi];
    for (size_t k = 0; k < summary.keys.size(); ++k) {
      row[summary.keys[k]] = {{"mean", summary.mean[k][gi]}, {"var", summary.var[k][gi]}};
    }
    f << row.dump() << "\n";
  }
}

}  // namespace popdyn
