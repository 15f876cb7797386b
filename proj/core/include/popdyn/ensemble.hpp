#ifndef POPDYN_ENSEMBLE_HPP
#define POPDYN_ENSEMBLE_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "popdyn/ssa.hpp"

namespace popdyn {

struct EnsembleSummary {
  std::vector<double> grid;
  int64_t n_scale = 1;
  size_t replicates = 0;
  std::vector<int> tracked_r;
  std::vector<int64_t> tracked_components;
  // key order: S_{r} for each tracked r, then mN_{k} for each tracked k
  std::vector<std::string> keys;
  std::vector<std::vector<double>> mean;  // [key][grid]
  std::vector<std::vector<double>> var;   // [key][grid], unbiased
  std::vector<double> s_r0;               // S_r(X(0)) per tracked order
  std::vector<std::vector<double>> replicate_stats;  // [replicate] -> user stats
  std::vector<std::string> failures;                 // per-replicate error notes
};

using ObserverFactory = std::function<std::unique_ptr<Observer>(size_t replicate)>;
using ReplicateStatFn =
    std::function<std::vector<double>(size_t replicate, const SimResult&, Observer*)>;

// Independent replicates on streams base.stream + i, reduced in replicate
// order with pairwise summation, so the summary is bitwise independent of
// the thread count.  Failed replicates are recorded and excluded.
EnsembleSummary ensemble(const Model& model, const SparseState& x0, const SimConfig& base,
                         size_t replicates, int threads,
                         const ObserverFactory& make_observer = nullptr,
                         const ReplicateStatFn& stat_fn = nullptr);

// Per-grid-time z-scores mean(m_N^k)/SE; zero where the spread is zero.
std::vector<double> martingale_mean_test(const EnsembleSummary& summary, int64_t component);

// Per-grid-time margin bound(t) - mean(S_r(t)) - 2 SE(t) against the
// expectation bound (S_r(0) + N k_{r4} t) e^{(k_{r1} + C k_{r2}) t}.
std::vector<double> moment_bound_check(const EnsembleSummary& summary, const Model& model, int r);

}  // namespace popdyn

#endif
