#include <benchmark/benchmark.h>

#include "popdyn/harness.hpp"
#include "popdyn/models/arrigoni.hpp"
#include "popdyn/models/kretzschmar.hpp"
#include "popdyn/ode.hpp"
#include "popdyn/semigroup.hpp"
#include "popdyn/ssa.hpp"

using namespace popdyn;

namespace {

void BM_SsaKretzschmar(benchmark::State& state) {
  auto model = make_kretzschmar({});
  const int64_t n = state.range(0);
  SparseState x0 = floor_initial(default_initial("kretzschmar"), n);
  uint64_t events = 0;
  uint64_t stream = 0;
  for (auto _ : state) {
    SimConfig cfg;
    cfg.n_scale = n;
    cfg.t_end = 0.1;
    cfg.seed = 1;
    cfg.stream = stream++;
    SimResult res = simulate(*model, x0, cfg);
    events += res.trajectory.event_count;
    benchmark::DoNotOptimize(res.trajectory.event_count);
  }
  state.counters["events/s"] =
      benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SsaKretzschmar)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_SsaArrigoni(benchmark::State& state) {
  auto model = make_arrigoni({});
  const int64_t n = state.range(0);
  SparseState x0 = floor_initial(default_initial("arrigoni"), n);
  uint64_t events = 0;
  uint64_t stream = 0;
  for (auto _ : state) {
    SimConfig cfg;
    cfg.n_scale = n;
    cfg.t_end = 0.1;
    cfg.seed = 1;
    cfg.stream = stream++;
    SimResult res = simulate(*model, x0, cfg);
    events += res.trajectory.event_count;
  }
  state.counters["events/s"] =
      benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SsaArrigoni)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SemigroupApply(benchmark::State& state) {
  auto model = make_kretzschmar({});
  TruncatedQ q = build_q(*model, state.range(0));
  std::vector<double> x(q.K + 1, 0.0);
  x[0] = 0.6;
  x[1] = 0.3;
  x[2] = 0.1;
  for (auto _ : state) {
    std::vector<double> y = r_apply(q, 0.01, x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_SemigroupApply)->Arg(80)->Arg(160);

void BM_OdeSolve(benchmark::State& state) {
  auto model = make_kretzschmar({});
  SparseVec x0{{0, 0.6}, {1, 0.3}, {2, 0.1}};
  OdeOptions opt;
  opt.rtol = 1e-8;
  opt.atol = 1e-11;
  for (auto _ : state) {
    OdeSolution sol = ode_solve(*model, x0, 1.0, opt);
    benchmark::DoNotOptimize(sol.xi_sup);
  }
}
BENCHMARK(BM_OdeSolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
