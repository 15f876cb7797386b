#ifndef POPDYN_MODEL_CHECKS_HPP
#define POPDYN_MODEL_CHECKS_HPP

#include <string>
#include <vector>

#include "popdyn/model.hpp"
#include "popdyn/rng.hpp"
#include "popdyn/sparse_state.hpp"

namespace popdyn {

struct CheckRow {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // worst slack observed; >= 0 means the condition held
  std::string detail;
};

struct CheckReport {
  std::vector<CheckRow> rows;
  bool all_pass() const {
    for (const CheckRow& r : rows)
      if (!r.pass) return false;
    return true;
  }
  std::string to_string() const;
};

// Numerical falsifier for the model's declared growth and boundary
// conditions, evaluated on the sampled states (no proof attempted):
// drift-moment bounds U_r, V_r for each r in r_list, the jump influence
// bound, the declared jump entry lower bound, the boundary rule, the
// zeta-weighted rate growth bound, summability of the tilting series,
// and the column drift condition A^T mu <= w mu on a probe section.
CheckReport check_model_assumptions(const Model& model, const std::vector<SparseState>& states,
                                    int64_t n_scale, const std::vector<int>& r_list);

// Random profile state: `units` individuals placed independently into
// geometric(q) type classes; S0 of the result is exactly `units`.
SparseState random_profile_state(int64_t units, double q, CounterRng& rng);

// Model-appropriate random states at scale N (Arrigoni states keep
// S0 = N, others vary the total around N).
std::vector<SparseState> sample_states(const Model& model, int64_t n_scale, size_t count,
                                       uint64_t seed);

}  // namespace popdyn

#endif
