#include "popdyn/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "popdyn/errors.hpp"
#include "popdyn/moments.hpp"

namespace popdyn {

namespace {

// Pairwise sum over values.size() entries selected by fn, in index order.
double pairwise(size_t lo, size_t hi, const std::function<double(size_t)>& fn) {
  if (hi - lo <= 4) {
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += fn(i);
    return s;
  }
  size_t mid = lo + (hi - lo) / 2;
  return pairwise(lo, mid, fn) + pairwise(mid, hi, fn);
}

}  // namespace

EnsembleSummary ensemble(const Model& model, const SparseState& x0, const SimConfig& base,
                         size_t replicates, int threads, const ObserverFactory& make_observer,
                         const ReplicateStatFn& stat_fn) {
  if (replicates < 1) throw InvalidParam("ensemble: replicates must be >= 1");
  if (threads < 1) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  threads = static_cast<int>(std::min<size_t>(threads, replicates));

  const size_t nr = base.tracked_r.size();
  const size_t nk = base.tracked_components.size();
  const size_t nkeys = nr + nk;
  const size_t g = base.record_grid.size();

  // [replicate][key][grid]
  std::vector<std::vector<std::vector<double>>> obs(replicates);
  std::vector<std::vector<double>> stats(replicates);
  std::vector<std::string> failures(replicates);

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t rep = next.fetch_add(1);
      if (rep >= replicates) return;
      SimConfig cfg = base;
      cfg.stream = base.stream + rep;
      std::unique_ptr<Observer> observer = make_observer ? make_observer(rep) : nullptr;
      try {
        SimResult res = simulate(model, x0, cfg, observer.get());
        auto& rows = obs[rep];
        rows.resize(nkeys);
        for (size_t ri = 0; ri < nr; ++ri) rows[ri] = res.trajectory.s_r[ri];
        for (size_t ki = 0; ki < nk; ++ki) rows[nr + ki] = res.martingales.m[ki];
        if (stat_fn) stats[rep] = stat_fn(rep, res, observer.get());
      } catch (const std::exception& e) {
        failures[rep] = e.what();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  EnsembleSummary sum;
  sum.grid = base.record_grid;
  sum.n_scale = base.n_scale;
  sum.tracked_r = base.tracked_r;
  sum.tracked_components = base.tracked_components;
  for (int r : base.tracked_r) sum.keys.push_back("S" + std::to_string(r));
  for (int64_t k : base.tracked_components) sum.keys.push_back("mN_" + std::to_string(k));
  for (int r : base.tracked_r) sum.s_r0.push_back(moment_s(x0, model.weights(), r));

  std::vector<size_t> ok;
  for (size_t rep = 0; rep < replicates; ++rep) {
    if (failures[rep].empty()) {
      ok.push_back(rep);
    } else {
      sum.failures.push_back("replicate " + std::to_string(rep) + ": " + failures[rep]);
    }
  }
  sum.replicates = ok.size();
  if (ok.empty()) throw Error("ensemble: every replicate failed");

  sum.mean.assign(nkeys, std::vector<double>(g, 0.0));
  sum.var.assign(nkeys, std::vector<double>(g, 0.0));
  const double nrep = static_cast<double>(ok.size());
  for (size_t key = 0; key < nkeys; ++key) {
    for (size_t gi = 0; gi < g; ++gi) {
      double m = pairwise(0, ok.size(), [&](size_t i) { return obs[ok[i]][key][gi]; }) / nrep;
      sum.mean[key][gi] = m;
      if (ok.size() > 1) {
        double ss = pairwise(0, ok.size(), [&](size_t i) {
          double d = obs[ok[i]][key][gi] - m;
          return d * d;
        });
        sum.var[key][gi] = ss / (nrep - 1.0);
      }
    }
  }
  sum.replicate_stats = std::move(stats);
  return sum;
}

namespace {

size_t key_index(const EnsembleSummary& s, const std::string& key) {
  for (size_t i = 0; i < s.keys.size(); ++i)
    if (s.keys[i] == key) return i;
  throw InvalidParam("summary: key not tracked: " + key);
}

}  // namespace

std::vector<double> martingale_mean_test(const EnsembleSummary& s, int64_t component) {
  size_t idx = key_index(s, "mN_" + std::to_string(component));
  std::vector<double> z(s.grid.size(), 0.0);
  for (size_t gi = 0; gi < s.grid.size(); ++gi) {
    double se = std::sqrt(s.var[idx][gi] / static_cast<double>(s.replicates));
    z[gi] = se > 0 ? s.mean[idx][gi] / se : 0.0;
  }
  return z;
}

std::vector<double> moment_bound_check(const EnsembleSummary& s, const Model& model, int r) {
  size_t idx = key_index(s, "S" + std::to_string(r));
  size_t ri = 0;
  while (s.tracked_r[ri] != r) ++ri;
  const auto& k = model.moments().at(r);
  const double n = static_cast<double>(s.n_scale);
  const double T = s.grid.empty() ? 0.0 : s.grid.back();
  double exponent = k[0];
  if (r >= 2 && k[1] > 0) {
    // region constant from the S0 confinement bound
    const auto& k0 = model.moments().at(0);
    double c0 = -1.0;
    for (size_t i = 0; i < s.tracked_r.size(); ++i)
      if (s.tracked_r[i] == 0) c0 = s.s_r0[i] / n;
    if (c0 < 0) throw InvalidParam("moment_bound_check: order 0 must be tracked for r >= 2");
    double big_c = 2.0 * (c0 + k0[3] * T) * std::exp(k0[0] * T);
    exponent += big_c * k[1];
  }
  std::vector<double> margin(s.grid.size(), 0.0);
  for (size_t gi = 0; gi < s.grid.size(); ++gi) {
    double t = s.grid[gi];
    double bound = (s.s_r0[ri] + n * k[3] * t) * std::exp(exponent * t);
    double se = std::sqrt(s.var[idx][gi] / static_cast<double>(s.replicates));
    margin[gi] = bound - s.mean[idx][gi] - 2.0 * se;
  }
  return margin;
}

}  // namespace popdyn
