#ifndef POPDYN_MOMENTS_HPP
#define POPDYN_MOMENTS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "popdyn/model.hpp"
#include "popdyn/sparse_state.hpp"
#include "popdyn/weights.hpp"

namespace popdyn {

// ||xi||_mu = sum_m mu(m) |xi^m|, an exact finite sum.
double mu_norm(const SparseVec& x, const WeightSystem& ws);
double mu_norm(const SparseState& x, const WeightSystem& ws);
double mu_norm(std::span<const double> x, const WeightSystem& ws);

// Empirical moment S_r = sum_j nu(j)^r X^j.
double moment_s(const SparseState& x, const WeightSystem& ws, int r);
double moment_s(const SparseVec& x, const WeightSystem& ws, int r);

// Jump weight d(J, zeta) = sum_j |J^j| zeta(j).
double zeta_weight(const JumpVector& j, const WeightSystem& ws);

// nu_r-increment of a jump, J^T nu_r = sum_j J^j nu(j)^r.
double jump_increment(const JumpVector& j, const WeightSystem& ws, int r);

// Drift moment U_r = sum_J alpha_J(x) J^T nu_r and its quadratic
// variation V_r = sum_J alpha_J(x) (J^T nu_r)^2.  Throws NonFiniteRate
// if an enumerated rate is not finite.
double moment_u(const SparseVec& x, const Model& model, int r);
double moment_v(const SparseVec& x, const Model& model, int r);

}  // namespace popdyn

#endif
