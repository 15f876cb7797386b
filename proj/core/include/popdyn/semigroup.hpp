#ifndef POPDYN_SEMIGROUP_HPP
#define POPDYN_SEMIGROUP_HPP

#include <span>
#include <vector>

#include "popdyn/model.hpp"
#include "popdyn/model_checks.hpp"

namespace popdyn {

// Finite section of the tilted generator Q_ij = A^T_ij mu(j)/mu(i) - w d_ij
// over 0..K, augmented with an absorbing coffin state so every row sums
// to zero.  P(t) = exp(Qt) is evaluated by uniformization, and the tilted
// semigroup acts as (R(t)x)_i = e^{wt} sum_j mu(j) P_ji(t) x_j / mu(i).
struct TruncatedQ {
  int64_t K = 0;           // live indices 0..K
  double w = 0.0;
  double lambda = 0.0;     // uniformization rate max_i |Q_ii|
  std::vector<double> mu;  // mu(0..K)
  CsrMatrix q;             // live block, row-major
  CsrMatrix qt;            // its transpose
  std::vector<double> coffin;  // Q_{i,coffin} = -sum_j Q_ij >= 0
};

// Throws DriftConditionViolated when A^T mu <= w mu fails on a column of
// the section, or when an off-diagonal tilted entry comes out negative.
TruncatedQ build_q(const Model& model, int64_t K);

// Dense (K+2)x(K+2) transition matrix at time t, coffin last, row-major.
// Entrywise series truncation error <= tol.
std::vector<double> p_matrix(const TruncatedQ& q, double t, double tol = 1e-12);

// R(t) x on the live section, matrix-free; the series tail is below
// tol * ||x||_mu in the mu-norm of the result.
std::vector<double> r_apply(const TruncatedQ& q, double t, std::span<const double> x,
                            double tol = 1e-13);

// (R(t) - I) x evaluated without cancellation (series minus identity);
// used by the derivative probe.
std::vector<double> r_apply_minus_identity(const TruncatedQ& q, double t,
                                           std::span<const double> x, double tol = 1e-15);

// Numerical probes of the semigroup properties on the truncation:
// (i) mu-weighted column bound, (ii) the semigroup law R(t/2)^2 = R(t),
// (iii) the derivative (R(h)-I)/h x -> Ax, all on interior columns.
CheckReport check_semigroup_props(const TruncatedQ& q, const Model& model,
                                  std::span<const double> t_list, double tol,
                                  int64_t interior_margin = 20);

struct MildOptions {
  double tol = 1e-8;          // target quadrature accuracy (drives the grid step)
  double step = 0.0;          // explicit grid step; 0 = derived from tol
  double picard_tol = 0.0;    // fixed-point residual per window; 0 = derived
  int max_iterations = 200;
  double ceiling = 1e6;       // mu-norm blow-up guard
  double contraction_target = 0.3;
  size_t record_points = 257;
};

struct MildSolution {
  std::vector<double> grid;                // recorded times (includes 0 and T)
  std::vector<std::vector<double>> values; // x(t) on 0..K per recorded time
  int iterations = 0;                      // worst Picard iteration count
  double residual = 0.0;                   // worst per-window fixed-point residual
  double xi_sup = 0.0;                     // max ||x(t)||_mu over the full step grid
  double step = 0.0;
  int64_t K = 0;
};

// Solution of x(t) = R(t)x(0) + int_0^t R(t-s) F(x(s)) ds on the section
// 0..x0.size()-1: uniform grid, trapezoid convolution, Picard iteration
// run over consecutive windows short enough to contract.
MildSolution mild_solve(const Model& model, std::span<const double> x0, double T,
                        const MildOptions& opt = {});

}  // namespace popdyn

#endif
