#ifndef POPDYN_MODELS_ARRIGONI_HPP
#define POPDYN_MODELS_ARRIGONI_HPP

#include <functional>
#include <memory>

#include "popdyn/model.hpp"

namespace popdyn {

// Metapopulation model.  Type index i = number of animals in a patch;
// the patch count S0(X) = N is conserved by every transition.  Per unit
// density: departure/death i*x^i*(d_i + gamma(1-rho)) (plus kappa when
// i=1), in-patch birth i*b_i*x^i, catastrophe kappa*x^i emptying a patch,
// and migration of one animal from an i-patch to a k-patch at rate
// i*rho*gamma*x^i*x^k, which changes two patch classes at once.
//
// The migration pair with k = i has net jump -2 on coordinate i; the
// model declares min_jump_entry = -2 for it.  sup_b, sup_d and
// sup_d_over_i must be declared by the caller (they are spot-checked on
// a probe grid, not derivable from the function handles).
struct ArrigoniParams {
  std::function<double(int64_t)> d = [](int64_t) { return 0.5; };
  std::function<double(int64_t)> b = [](int64_t i) { return 1.0 / (1.0 + 0.1 * static_cast<double>(i)); };
  double gamma = 1.0;
  double rho = 0.3;
  double kappa = 0.1;
  double sup_b = 1.0 / 1.1;
  double sup_d = 0.5;
  double sup_d_over_i = 0.5;
};

std::unique_ptr<Model> make_arrigoni(const ArrigoniParams& params = {});

}  // namespace popdyn

#endif
