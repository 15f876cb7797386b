#ifndef POPDYN_MODELS_FINITE_HPP
#define POPDYN_MODELS_FINITE_HPP

#include <memory>
#include <vector>

#include "popdyn/model.hpp"

namespace popdyn {

// Oracle model over a handful of types with affine channel rates
// rate(x) = constant + sum_l coeff_l x^l.  With a count cap the capped
// process is a finite CTMC whose generator can be written down exactly,
// which is what the simulator oracle tests need.
//
// A channel with a negative jump entry at l must have rate m * x^l
// (constant 0, single coefficient on l) so the rate vanishes on the
// boundary.  The cap is interpreted on raw counts and is meant for
// N = 1 oracle runs; rates are gated so no count leaves [0, cap].
struct FiniteChannel {
  JumpVector jump;
  double constant = 0.0;
  std::vector<std::pair<int64_t, double>> coeffs;
};

struct FiniteModelParams {
  int n_types = 1;
  std::vector<FiniteChannel> channels;
  int64_t cap = -1;  // -1: uncapped
  bool allow_deep_exits = false;  // permit jump entries < -1 (checker test models)
};

std::unique_ptr<Model> make_finite_model(const FiniteModelParams& params);

// Convenience: 1-type birth-death with per-count birth and death rates,
// optionally capped.
std::unique_ptr<Model> make_birth_death(double birth, double death, int64_t cap = -1);

}  // namespace popdyn

#endif
