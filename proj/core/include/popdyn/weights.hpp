#ifndef POPDYN_WEIGHTS_HPP
#define POPDYN_WEIGHTS_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "popdyn/errors.hpp"

namespace popdyn {

// Weight functions on type indices.  nu grades the "size" of a type and
// generates the empirical moments; mu defines the weighted l1 norm the
// limit theorem is stated in; zeta controls the jump-weight sums.  All
// three are total closed-form functions so unbounded indices need no
// storage.  w is the norm growth rate of the linear part (A^T mu <= w mu).
struct WeightSystem {
  std::function<double(int64_t)> nu;
  std::function<double(int64_t)> mu;
  std::function<double(int64_t)> zeta;
  double w = 0.0;

  double nu_pow(int64_t j, int r) const;  // nu(j)^r
};

// Power-law system mu(j) = nu(j) = j+1, zeta(j) = (j+1)^7; the built-in
// models use it with their own w.
WeightSystem power_weights(double w);

// Probe-grid validation: nu, mu >= 1 everywhere sampled, nu nondecreasing
// and unbounded along a geometric grid up to 2^20.  Throws InvalidParam.
void validate_weights(const WeightSystem& ws);

// Memoized per-index weight values.  Not synchronized: each worker keeps
// its own table.
class WeightTable {
 public:
  explicit WeightTable(const WeightSystem& ws) : ws_(&ws) {}

  double nu(int64_t j) { return fetch(nu_, j, 0); }
  double mu(int64_t j) { return fetch(mu_, j, 1); }
  double zeta(int64_t j) { return fetch(zeta_, j, 2); }
  double nu_pow(int64_t j, int r) {
    double b = nu(j);
    double p = 1.0;
    for (int i = 0; i < r; ++i) p *= b;
    return p;
  }
  const WeightSystem& system() const { return *ws_; }

 private:
  double fetch(std::vector<double>& tab, int64_t j, int which) {
    if (j < 0) throw InvalidParam("WeightTable: negative index");
    if (static_cast<size_t>(j) >= tab.size()) {
      size_t to = static_cast<size_t>(j) + 1;
      tab.reserve(to);
      for (size_t k = tab.size(); k < to; ++k) {
        int64_t idx = static_cast<int64_t>(k);
        tab.push_back(which == 0 ? ws_->nu(idx) : which == 1 ? ws_->mu(idx) : ws_->zeta(idx));
      }
    }
    return tab[static_cast<size_t>(j)];
  }

  const WeightSystem* ws_;
  std::vector<double> nu_, mu_, zeta_;
};

// Growth constants of a model: the k_{rl} tables bounding the drift
// moments U_r and their quadratic variations V_r, the variance moment
// order p(r), and the jump-weight bound data (r_zeta, beta_zeta, k1, k2).
struct MomentConstants {
  // k[r] = {k_{r1}, k_{r2}, k_{r3}, k_{r4}, k_{r5}}
  std::vector<std::array<double, 5>> k;
  std::function<int(int)> p;
  int64_t r_max1 = 0;
  int64_t r_max2 = 0;
  int r_zeta = 0;
  double beta_zeta = 1.0;
  double k1_zeta = 0.0;
  double k2_zeta = 0.0;
  int rho = 0;
  int r_mu = 0;

  const std::array<double, 5>& at(int r) const {
    if (r < 0 || static_cast<size_t>(r) >= k.size())
      throw ConstantMissing("moment constants not tabulated for r=" + std::to_string(r));
    return k[static_cast<size_t>(r)];
  }
  bool has(int r) const { return r >= 0 && static_cast<size_t>(r) < k.size(); }
};

}  // namespace popdyn

#endif
