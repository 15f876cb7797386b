#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "popdyn/harness.hpp"
#include "popdyn/models/finite.hpp"
#include "popdyn/moments.hpp"

using namespace popdyn;

namespace {

ConvergenceTable synthetic_table(const std::vector<int64_t>& ns,
                                 const std::function<double(double)>& err_of_n) {
  ConvergenceTable t;
  for (int64_t n : ns) {
    ConvergenceRow r;
    r.n = n;
    r.replicates = 50;
    r.mean_sup_err = err_of_n(static_cast<double>(n));
    r.sd = 0.0;
    r.q10 = r.q90 = r.mean_sup_err;
    t.rows.push_back(r);
    t.errors.push_back(std::vector<double>(50, r.mean_sup_err));
  }
  return t;
}

}  // namespace

TEST_CASE("rate fit recovers an exact power law") {
  std::vector<int64_t> ns = {100, 316, 1000, 3162, 10000};
  auto t = synthetic_table(ns, [](double n) { return 3.0 / std::sqrt(n); });
  RateFit f = fit_rate(t, RateCorrection::none, 1, 200);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  CHECK(f.ci_lo <= f.slope);
  CHECK(f.ci_hi >= f.slope);
}

TEST_CASE("sqrt-log correction recovers the corrected power law") {
  std::vector<int64_t> ns = {100, 316, 1000, 3162, 10000};
  auto t = synthetic_table(
      ns, [](double n) { return 2.0 * std::sqrt(std::log(n) / n); });
  RateFit f = fit_rate(t, RateCorrection::sqrt_log, 1, 200);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("rate fit is invariant under rescaling the errors") {
  std::vector<int64_t> ns = {100, 316, 1000, 3162};
  auto t1 = synthetic_table(ns, [](double n) { return std::pow(n, -0.43); });
  auto t2 = synthetic_table(ns, [](double n) { return 7.0 * std::pow(n, -0.43); });
  RateFit f1 = fit_rate(t1, RateCorrection::none, 1, 10);
  RateFit f2 = fit_rate(t2, RateCorrection::none, 1, 10);
  CHECK(f1.slope == doctest::Approx(f2.slope).epsilon(1e-12));
  CHECK(f2.intercept - f1.intercept == doctest::Approx(std::log(7.0)).epsilon(1e-10));
}

TEST_CASE("degenerate and undersized fits are rejected") {
  std::vector<int64_t> ns = {100, 316, 1000, 3162};
  auto t = synthetic_table(ns, [](double) { return 0.0; });
  CHECK_THROWS_AS(fit_rate(t, RateCorrection::none, 1, 10), DegenerateFit);
  auto small = synthetic_table({100, 200, 400}, [](double n) { return 1 / n; });
  CHECK_THROWS_AS(fit_rate(small, RateCorrection::none, 1, 10), InvalidParam);
}

TEST_CASE("exceedance probe edge multipliers") {
  std::vector<int64_t> ns = {100, 1000};
  auto t = synthetic_table(ns, [](double n) { return 1.0 / std::sqrt(n); });
  std::vector<double> mults = {0.0, 1e9};
  auto pts = exceedance_probe(t, mults);
  REQUIRE(pts.size() == 4);
  CHECK(pts[0].fraction == 1.0);  // every positive error exceeds 0
  CHECK(pts[1].fraction == 1.0);
  CHECK(pts[2].fraction == 0.0);
  CHECK(pts[3].fraction == 0.0);
}

TEST_CASE("floor rounding of the initial profile converges in mu-norm") {
  InitialProfile prof = default_initial("kretzschmar");
  WeightSystem ws = power_weights(0.0);
  SparseVec x0 = prof.vec();
  for (int64_t n : {100, 316, 1000, 3162, 10000, 31623}) {
    SparseState X = floor_initial(prof, n);
    SparseVec xn = scaled(X, 1.0 / static_cast<double>(n));
    double err = 0.0;
    for (const auto& [j, v] : x0.entries()) err += ws.mu(j) * std::abs(xn.value(j) - v);
    // each coordinate rounds down by less than 1/N, so the mu-weighted
    // error is below (1+2+3)/N
    CHECK(err <= 6.0 / static_cast<double>(n));
  }

  // exact halves floor to exact counts at even N
  SparseState X = floor_initial(default_initial("arrigoni"), 1000);
  CHECK(X.total() == 1000);
}

TEST_CASE("report files round-trip the table exactly") {
  std::vector<int64_t> ns = {100, 316, 1000, 3162};
  ConvergenceTable t;
  CounterRng rng(55, 0);
  for (int64_t n : ns) {
    std::vector<double> errs;
    for (int i = 0; i < 20; ++i) errs.push_back(rng.next_unit() / std::sqrt(static_cast<double>(n)));
    ConvergenceRow r;
    r.n = n;
    r.replicates = errs.size();
    double m = 0;
    for (double e : errs) m += e;
    r.mean_sup_err = m / errs.size();
    r.sd = 0.1;
    r.q10 = 0.01;
    r.q90 = 0.02;
    t.rows.push_back(r);
    t.errors.push_back(errs);
    t.initial_err.push_back(0.0);
  }
  ExperimentPlan plan;
  plan.out_dir = "roundtrip_out";
  RateFit f = fit_rate(t, RateCorrection::sqrt_log, 3, 50);
  std::vector<double> mults = {1.0, 2.0};
  auto exc = exceedance_probe(t, mults);
  std::string dir = (std::filesystem::temp_directory_path() / "popdyn_roundtrip").string();
  write_report(plan, t, &f, exc, dir);
  ConvergenceTable back = load_table(dir);
  REQUIRE(back.rows.size() == t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].n == t.rows[i].n);
    CHECK(back.rows[i].replicates == t.rows[i].replicates);
    CHECK(back.rows[i].mean_sup_err == t.rows[i].mean_sup_err);  // exact via %.17g
    CHECK(back.rows[i].sd == t.rows[i].sd);
    CHECK(back.rows[i].q10 == t.rows[i].q10);
    CHECK(back.rows[i].q90 == t.rows[i].q90);
    REQUIRE(back.errors[i].size() == t.errors[i].size());
    for (size_t k = 0; k < t.errors[i].size(); ++k) CHECK(back.errors[i][k] == t.errors[i][k]);
  }
  RateFit f2 = fit_rate(back, RateCorrection::sqrt_log, 3, 50);
  CHECK(f2.slope == f.slope);
}

TEST_CASE("config parsing covers sections, arrays and pairs") {
  Config cfg = Config::parse(R"(
# comment
model = "arrigoni"
T = 1.5
replicates = 64
n_grid = [100, 200, 400]   # inline comment
initial = [[0, 0.5], [1, 0.5]]
flag = true
[arrigoni]
gamma = 2.0
)");
  CHECK(cfg.get_string("model") == "arrigoni");
  CHECK(cfg.get_double("T", 0) == 1.5);
  CHECK(cfg.get_int("replicates", 0) == 64);
  CHECK(cfg.get_int_list("n_grid") == std::vector<int64_t>{100, 200, 400});
  auto pairs = cfg.get_pair_list("initial");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].first == 1);
  CHECK(pairs[1].second == 0.5);
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_double("arrigoni.gamma", 0) == 2.0);
  CHECK(cfg.get_double("missing", 9.0) == 9.0);

  ExperimentPlan plan = plan_from_config(cfg);
  CHECK(plan.model_id == "arrigoni");
  CHECK(plan.arrigoni.gamma == 2.0);
  CHECK(plan.t_end == 1.5);
}

TEST_CASE("single-N single-replicate convergence table") {
  ExperimentPlan plan;
  plan.model_id = "kretzschmar";
  plan.n_grid = {200};
  plan.replicates = 1;
  plan.t_end = 0.4;
  plan.refine_points = 64;
  plan.rtol = 1e-8;
  plan.atol = 1e-11;
  plan.threads = 1;
  plan.initial = default_initial("kretzschmar");
  auto model = build_model(plan);
  ConvergenceTable t = run_convergence(plan, *model);
  REQUIRE(t.rows.size() == 1);
  REQUIRE(t.errors[0].size() == 1);
  CHECK(t.rows[0].mean_sup_err == t.errors[0][0]);
  CHECK(t.rows[0].mean_sup_err > 0.0);
  CHECK(t.rows[0].mean_sup_err < 1.0);
}

TEST_CASE("martingale z-scores are zero for a rate-free ensemble") {
  FiniteModelParams p;
  p.n_types = 1;
  auto model = make_finite_model(p);
  SimConfig cfg;
  cfg.n_scale = 10;
  cfg.t_end = 1.0;
  cfg.record_grid = {0.0, 0.5, 1.0};
  cfg.tracked_components = {0};
  cfg.tracked_r = {0};
  EnsembleSummary s = ensemble(*model, SparseState{{0, 10}}, cfg, 8, 2);
  for (double z : martingale_mean_test(s, 0)) CHECK(z == 0.0);
}

TEST_CASE("rate-free convergence run yields exactly zero errors") {
  FiniteModelParams fp;
  fp.n_types = 1;
  auto model = make_finite_model(fp);
  ExperimentPlan plan;
  plan.model_id = "finite";
  plan.initial = {{{0, 1.0}}};
  plan.n_grid = {10, 20, 40, 80};
  plan.replicates = 3;
  plan.t_end = 1.0;
  plan.refine_points = 16;
  plan.threads = 1;
  ConvergenceTable t = run_convergence(plan, *model);
  for (const ConvergenceRow& r : t.rows) CHECK(r.mean_sup_err == 0.0);
  CHECK_THROWS_AS(fit_rate(t, RateCorrection::none, 1, 10), DegenerateFit);
}
