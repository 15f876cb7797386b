#include "popdyn/weights.hpp"

#include <cmath>

namespace popdyn {

double WeightSystem::nu_pow(int64_t j, int r) const {
  double b = nu(j);
  double p = 1.0;
  for (int i = 0; i < r; ++i) p *= b;
  return p;
}

WeightSystem power_weights(double w) {
  WeightSystem ws;
  ws.nu = [](int64_t j) { return static_cast<double>(j + 1); };
  ws.mu = ws.nu;
  ws.zeta = [](int64_t j) {
    double b = static_cast<double>(j + 1);
    double b2 = b * b;
    return b2 * b2 * b2 * b;  // (j+1)^7
  };
  ws.w = w;
  return ws;
}

void validate_weights(const WeightSystem& ws) {
  if (!ws.nu || !ws.mu || !ws.zeta) throw InvalidParam("weight system: missing function");
  if (ws.w < 0) throw InvalidParam("weight system: w must be nonnegative");
  double prev = 0.0;
  for (int64_t j = 1; j <= (1 << 20); j *= 2) {
    for (int64_t probe : {j - 1, j}) {
      double n = ws.nu(probe), m = ws.mu(probe), z = ws.zeta(probe);
      if (!(n >= 1.0)) throw InvalidParam("weight system: nu < 1 at j=" + std::to_string(probe));
      if (!(m >= 1.0)) throw InvalidParam("weight system: mu < 1 at j=" + std::to_string(probe));
      if (!(z >= 1.0)) throw InvalidParam("weight system: zeta < 1 at j=" + std::to_string(probe));
    }
    double n = ws.nu(j);
    if (n + 1e-12 < prev)
      throw InvalidParam("weight system: nu not nondecreasing at j=" + std::to_string(j));
    prev = n;
  }
  if (!(ws.nu(1 << 20) >= 100.0 * ws.nu(0)))
    throw InvalidParam("weight system: nu does not grow on the probe grid");
}

}  // namespace popdyn
