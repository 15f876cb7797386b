#ifndef POPDYN_ODE_HPP
#define POPDYN_ODE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "popdyn/model.hpp"
#include "popdyn/sparse_state.hpp"

namespace popdyn {

struct OdeOptions {
  double rtol = 1e-6;
  double atol = 1e-9;
  double eps_tail = 1e-8;   // mu-weighted boundary-band mass triggering growth
  int64_t k_init = 0;       // 0: from the support of x0
  int64_t k_max = 1 << 16;
  double ceiling = 1e6;     // mu-norm blow-up guard
  double h_init = 0.0;
  uint64_t max_steps = 50'000'000;
};

// One accepted step with its quartic dense-output polynomial.
struct OdeStep {
  double t = 0.0;
  double h = 0.0;
  int64_t K = 0;
  // u(theta) = c1 + theta (c2 + (1-theta)(c3 + theta (c4 + (1-theta) c5)))
  std::vector<double> c1, c2, c3, c4, c5;
};

struct OdeSolution {
  double t_end = 0.0;
  std::vector<double> step_t;   // start time of each step, plus t_end
  std::vector<OdeStep> steps;
  int64_t k_final = 0;
  double xi_sup = 0.0;          // max ||x(t)||_mu on a 4x refinement of the step grid
  std::vector<std::pair<double, int64_t>> k_history;  // (time, K) growth events
  double max_band_tail = 0.0;   // largest accepted boundary-band mass
  uint64_t n_steps = 0;
  uint64_t n_rejected = 0;
  uint64_t n_neg_clamped = 0;   // components projected to zero from below -atol
};

// Adaptive Dormand-Prince 5(4) integration of dx/dt = Ax + F(x) with the
// step error controlled in the mu-weighted l1 norm and the truncation
// grown geometrically whenever mass reaches the boundary band.
OdeSolution ode_solve(const Model& model, const SparseVec& x0, double T,
                      const OdeOptions& opt = {});

// Dense-output evaluation; throws OutOfRange outside [0, t_end].
std::vector<double> eval_solution(const OdeSolution& sol, double t);

// Cursor for repeated evaluation at nondecreasing times.
class SolutionCursor {
 public:
  explicit SolutionCursor(const OdeSolution& sol) : sol_(&sol) {}
  // Writes x(t) into out (zero-padded / truncated to out.size()).
  void eval(double t, std::span<double> out);

 private:
  const OdeSolution* sol_;
  size_t idx_ = 0;
};

double xi_sup(const OdeSolution& sol);

}  // namespace popdyn

#endif
