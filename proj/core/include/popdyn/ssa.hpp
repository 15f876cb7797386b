#ifndef POPDYN_SSA_HPP
#define POPDYN_SSA_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "popdyn/model.hpp"
#include "popdyn/rng.hpp"
#include "popdyn/sparse_state.hpp"

namespace popdyn {

struct SimConfig {
  int64_t n_scale = 1;      // N
  double t_end = 1.0;       // T
  uint64_t seed = 0;
  uint64_t stream = 0;      // replicate stream id
  std::vector<double> record_grid;   // sorted times in [0, t_end]
  std::vector<double> observe_grid;  // observer-only times (not recorded)
  std::vector<int> tracked_r = {0, 1};
  std::vector<int64_t> tracked_components = {0, 1, 2};
  double stop_s0_c = std::numeric_limits<double>::infinity();    // tau_0 threshold C
  double stop_zeta_a = std::numeric_limits<double>::infinity();  // tau(a, zeta) threshold
  uint64_t max_events = 1'000'000'000;  // explosion guard
  bool record_events = false;           // retain the per-event log (tests)
};

struct Trajectory {
  std::vector<double> grid;
  std::vector<SparseState> states;          // state at grid times (cadlag)
  std::vector<std::vector<double>> s_r;     // [tracked_r][grid], X-level moments
  uint64_t event_count = 0;
  uint64_t self_loops = 0;                  // infeasible pair-jump selections (lawful no-ops)
  std::vector<double> jump_times;           // record_events only
  std::vector<JumpVector> events;           // record_events only
};

struct MartingaleRecord {
  std::vector<int64_t> components;
  std::vector<std::vector<double>> m;    // [component][grid], m_N^k(t), x-level
  std::vector<int> orders;
  std::vector<std::vector<double>> m_r;  // [order][grid], M_r(t), X-level
};

struct StoppingReport {
  double tau0 = std::numeric_limits<double>::infinity();
  double tau_az = std::numeric_limits<double>::infinity();
  double c_threshold = std::numeric_limits<double>::infinity();
  double a_threshold = std::numeric_limits<double>::infinity();
};

struct SimResult {
  Trajectory trajectory;
  MartingaleRecord martingales;
  StoppingReport stopping;
};

// Online hook: called with the current state at t = 0, at every grid or
// observe time, and at each jump time both before and after the jump.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_state(double t, const SparseState& x) = 0;
};

// Exact event-driven simulation of X -> X + J at rate N alpha_J(X/N):
// exponential waiting times at the total rate, channel choice by inverse
// CDF, and exact piecewise-constant accumulation of the compensator
// integrals for the tracked martingales.
SimResult simulate(const Model& model, const SparseState& x0, const SimConfig& cfg,
                   Observer* observer = nullptr);

}  // namespace popdyn

#endif
