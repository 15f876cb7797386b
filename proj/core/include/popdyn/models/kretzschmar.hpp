#ifndef POPDYN_MODELS_KRETZSCHMAR_HPP
#define POPDYN_MODELS_KRETZSCHMAR_HPP

#include <memory>

#include "popdyn/model.hpp"

namespace popdyn {

// Host-parasite model.  Type index i = parasite burden of a host.
// Transitions per unit density: parasite death i*mu_d*x^i (i -> i-1),
// host death (kappa + i*alpha)*x^i, host birth beta * sum_i theta^i x^i
// into burden 0, and infection lambda * x^i * phi(x) (i -> i+1) with
// phi(x) = ||x||_11 / (c + ||x||_1).
struct KretzschmarParams {
  double mu_d = 1.0;    // per-parasite death rate
  double kappa = 0.2;   // host death rate
  double alpha = 0.1;   // extra host death per parasite
  double beta = 1.5;    // host birth rate factor
  double theta = 0.5;   // fertility discount per parasite carried
  double lambda = 2.0;  // infection pressure
  double c = 1.0;       // infection saturation constant
};

std::unique_ptr<Model> make_kretzschmar(const KretzschmarParams& params = {});

}  // namespace popdyn

#endif
