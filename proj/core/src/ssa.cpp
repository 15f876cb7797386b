#include "popdyn/ssa.hpp"

#include <algorithm>
#include <cmath>

#include "popdyn/errors.hpp"
#include "popdyn/moments.hpp"

namespace popdyn {

namespace {

struct Kahan {
  double sum = 0.0, c = 0.0;
  void add(double v) {
    double y = v - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

// Fenwick tree over channel rates; rebuilt per event, selection by bit
// descent.  Used once the active channel count passes the linear-scan
// crossover.
class FenwickSampler {
 public:
  void build(const std::vector<double>& rates) {
    n_ = rates.size();
    tree_.assign(n_ + 1, 0.0);
    for (size_t i = 0; i < n_; ++i) tree_[i + 1] = rates[i];
    for (size_t i = 1; i <= n_; ++i) {
      size_t parent = i + (i & (~i + 1));
      if (parent <= n_) tree_[parent] += tree_[i];
    }
    log2_ = 0;
    while ((size_t{2} << log2_) <= n_) ++log2_;
  }

  size_t select(double u) const {
    size_t pos = 0;
    for (size_t step = size_t{1} << log2_; step > 0; step >>= 1) {
      size_t next = pos + step;
      if (next <= n_ && tree_[next] < u) {
        u -= tree_[next];
        pos = next;
      }
    }
    return std::min(pos, n_ - 1);  // pos is the count of bins strictly below u
  }

 private:
  std::vector<double> tree_;
  size_t n_ = 0;
  size_t log2_ = 0;
};

struct GridPoint {
  double t;
  bool record;
};

}  // namespace

SimResult simulate(const Model& model, const SparseState& x0, const SimConfig& cfg,
                   Observer* observer) {
  if (cfg.n_scale < 1) throw InvalidParam("simulate: n_scale must be >= 1");
  if (cfg.t_end <= 0) throw InvalidParam("simulate: t_end must be > 0");
  const double n = static_cast<double>(cfg.n_scale);
  const double inv_n = 1.0 / n;
  const WeightSystem& ws = model.weights();
  WeightTable wt(ws);

  // merged record/observe schedule
  std::vector<GridPoint> sched;
  sched.reserve(cfg.record_grid.size() + cfg.observe_grid.size());
  for (double g : cfg.record_grid) sched.push_back({g, true});
  for (double g : cfg.observe_grid) sched.push_back({g, false});
  std::stable_sort(sched.begin(), sched.end(),
                   [](const GridPoint& a, const GridPoint& b) { return a.t < b.t; });
  for (const GridPoint& g : sched)
    if (g.t < 0 || g.t > cfg.t_end) throw InvalidParam("simulate: grid time outside [0, T]");

  SimResult res;
  res.stopping.c_threshold = cfg.stop_s0_c;
  res.stopping.a_threshold = cfg.stop_zeta_a;
  Trajectory& traj = res.trajectory;
  MartingaleRecord& mart = res.martingales;
  mart.components = cfg.tracked_components;
  mart.orders = cfg.tracked_r;
  mart.m.resize(cfg.tracked_components.size());
  mart.m_r.resize(cfg.tracked_r.size());
  traj.s_r.resize(cfg.tracked_r.size());

  SparseState X = x0;
  SparseVec x = scaled(X, inv_n);

  const size_t nk = cfg.tracked_components.size();
  const size_t nr = cfg.tracked_r.size();
  std::vector<Kahan> m_comp(nk);     // m_N^k(t) at the last jump
  std::vector<Kahan> m_ord(nr);      // M_r(t) at the last jump
  std::vector<double> s_now(nr);     // S_r(X(t)), X level
  for (size_t ri = 0; ri < nr; ++ri) s_now[ri] = moment_s(X, ws, cfg.tracked_r[ri]);

  std::vector<Channel> chans;
  std::vector<double> rates;
  FenwickSampler fenwick;
  std::vector<double> f0_k(nk), u_r(nr);
  const bool want_zeta = std::isfinite(cfg.stop_zeta_a);

  CounterRng rng(cfg.seed, cfg.stream);
  double t = 0.0;
  size_t gi = 0;

  auto emit = [&](const GridPoint& g, double f_total_time) {
    // value at grid time g.t given the state has been constant since
    // f_total_time with the current drift terms
    if (observer) observer->on_state(g.t, X);
    if (!g.record) return;
    traj.grid.push_back(g.t);
    traj.states.push_back(X);
    for (size_t ri = 0; ri < nr; ++ri) traj.s_r[ri].push_back(s_now[ri]);
    double dt = g.t - f_total_time;
    for (size_t ki = 0; ki < nk; ++ki) mart.m[ki].push_back(m_comp[ki].sum - dt * f0_k[ki]);
    for (size_t ri = 0; ri < nr; ++ri) mart.m_r[ri].push_back(m_ord[ri].sum - dt * n * u_r[ri]);
  };

  if (observer) observer->on_state(0.0, X);

  while (true) {
    chans.clear();
    model.active_channels(x, chans);
    double total = 0.0;
    std::fill(f0_k.begin(), f0_k.end(), 0.0);
    std::fill(u_r.begin(), u_r.end(), 0.0);
    double zeta_sum = 0.0;
    for (const Channel& c : chans) {
      total += c.rate;
      for (const auto& [j, d] : c.jump.coords()) {
        for (size_t ki = 0; ki < nk; ++ki)
          if (cfg.tracked_components[ki] == j) f0_k[ki] += c.rate * d;
        for (size_t ri = 0; ri < nr; ++ri)
          u_r[ri] += c.rate * static_cast<double>(d) * wt.nu_pow(j, cfg.tracked_r[ri]);
        if (want_zeta) zeta_sum += c.rate * std::abs(static_cast<double>(d)) * wt.zeta(j);
      }
    }
    if (!std::isfinite(total)) throw RateOverflow("simulate: non-finite total rate");

    if (!std::isfinite(res.stopping.tau0) && static_cast<double>(X.total()) >= n * cfg.stop_s0_c)
      res.stopping.tau0 = t;
    if (want_zeta && !std::isfinite(res.stopping.tau_az) && zeta_sum >= cfg.stop_zeta_a)
      res.stopping.tau_az = t;

    if (total <= 0.0) {
      while (gi < sched.size()) emit(sched[gi++], t);
      break;
    }

    double dt = rng.next_exponential(n * total);
    double t_next = t + dt;

    while (gi < sched.size() && sched[gi].t < t_next && sched[gi].t <= cfg.t_end)
      emit(sched[gi++], t);
    if (t_next > cfg.t_end) break;

    if (traj.event_count >= cfg.max_events)
      throw ExplosionGuard("simulate: event budget exhausted (suspected explosion)");

    // channel choice by inverse CDF over the materialized rates
    size_t pick;
    double u = rng.next_unit() * total;
    if (chans.size() <= 64) {
      pick = 0;
      double acc = 0.0;
      for (; pick + 1 < chans.size(); ++pick) {
        acc += chans[pick].rate;
        if (u < acc) break;
      }
    } else {
      rates.clear();
      for (const Channel& c : chans) rates.push_back(c.rate);
      fenwick.build(rates);
      pick = fenwick.select(u);
    }
    const JumpVector& jump = chans[pick].jump;

    if (observer) observer->on_state(t_next, X);  // pre-jump

    bool feasible = true;
    for (const auto& [j, d] : jump.coords()) {
      if (d < 0 && X.count(j) + d < 0) {
        feasible = false;
        break;
      }
    }
    if (!feasible && model.min_jump_entry() >= -1)
      throw Error("simulate: boundary rule violated by an enumerated channel");

    if (feasible) {
      for (const auto& [j, d] : jump.coords()) {
        X.add(j, d);
        x.set(j, static_cast<double>(X.count(j)) * inv_n);
      }
      for (size_t ki = 0; ki < nk; ++ki) {
        double dk = jump.delta(cfg.tracked_components[ki]);
        m_comp[ki].add(dk * inv_n - dt * f0_k[ki]);
      }
      for (size_t ri = 0; ri < nr; ++ri) {
        double ds = jump_increment(jump, ws, cfg.tracked_r[ri]);
        s_now[ri] += ds;
        m_ord[ri].add(ds - dt * n * u_r[ri]);
      }
    } else {
      ++traj.self_loops;
      for (size_t ki = 0; ki < nk; ++ki) m_comp[ki].add(-dt * f0_k[ki]);
      for (size_t ri = 0; ri < nr; ++ri) m_ord[ri].add(-dt * n * u_r[ri]);
    }
    ++traj.event_count;
    t = t_next;

    while (gi < sched.size() && sched[gi].t <= t) emit(sched[gi++], t);
    if (observer) observer->on_state(t, X);  // post-jump

    if (cfg.record_events) {
      traj.jump_times.push_back(t);
      traj.events.push_back(feasible ? jump : JumpVector{});
    }
  }

  while (gi < sched.size()) emit(sched[gi++], t);
  return res;
}

}  // namespace popdyn
