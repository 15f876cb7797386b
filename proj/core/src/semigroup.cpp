#include "popdyn/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "popdyn/errors.hpp"
#include "popdyn/moments.hpp"

namespace popdyn {

namespace {

CsrMatrix transpose(const CsrMatrix& m) {
  CsrMatrix t;
  t.rows = m.cols;
  t.cols = m.rows;
  t.rowptr.assign(t.rows + 1, 0);
  for (int32_t c : m.col) ++t.rowptr[c + 1];
  for (int64_t i = 0; i < t.rows; ++i) t.rowptr[i + 1] += t.rowptr[i];
  t.col.resize(m.col.size());
  t.val.resize(m.val.size());
  std::vector<int64_t> cursor(t.rowptr.begin(), t.rowptr.end() - 1);
  for (int64_t r = 0; r < m.rows; ++r) {
    for (int64_t p = m.rowptr[r]; p < m.rowptr[r + 1]; ++p) {
      int64_t pos = cursor[m.col[p]]++;
      t.col[pos] = static_cast<int32_t>(r);
      t.val[pos] = m.val[p];
    }
  }
  return t;
}

// y += (Q^T x) / lambda, i.e. one uniformized substep of B^T - I.
void qt_scaled_multiply(const TruncatedQ& q, std::span<const double> x, std::span<double> y,
                        double inv_lambda) {
  for (int64_t i = 0; i <= q.K; ++i) {
    double acc = 0.0;
    for (int64_t p = q.qt.rowptr[i]; p < q.qt.rowptr[i + 1]; ++p)
      acc += q.qt.val[p] * x[q.qt.col[p]];
    y[i] = acc * inv_lambda;
  }
}

}  // namespace

TruncatedQ build_q(const Model& model, int64_t K) {
  if (K < 1) throw InvalidParam("build_q: K must be >= 1");
  const WeightSystem& ws = model.weights();
  TruncatedQ q;
  q.K = K;
  q.w = ws.w;
  q.mu.resize(K + 1);
  for (int64_t i = 0; i <= K; ++i) q.mu[i] = ws.mu(i);

  CsrMatrix a = truncated_a(model, K);

  // column condition on the section: sum_j A_ji mu(j) <= w mu(i)
  std::vector<double> colsum(K + 1, 0.0);
  for (int64_t r = 0; r <= K; ++r)
    for (int64_t p = a.rowptr[r]; p < a.rowptr[r + 1]; ++p)
      colsum[a.col[p]] += a.val[p] * q.mu[r];
  for (int64_t i = 0; i <= K; ++i) {
    double bound = q.w * q.mu[i];
    if (colsum[i] > bound + 1e-9 * (1.0 + std::abs(bound)))
      throw DriftConditionViolated("A^T mu <= w mu fails at column " + std::to_string(i) +
                                   " (" + std::to_string(colsum[i]) + " > " + std::to_string(bound) + ")");
  }

  // Q row i collects column i of A: Q_ij = A_ji mu(j)/mu(i) - w d_ij
  CsrMatrix at = transpose(a);
  q.q.rows = q.q.cols = K + 1;
  q.q.rowptr.assign(K + 2, 0);
  q.coffin.assign(K + 1, 0.0);
  for (int64_t i = 0; i <= K; ++i) {
    double rowsum = 0.0;
    bool saw_diag = false;
    for (int64_t p = at.rowptr[i]; p < at.rowptr[i + 1]; ++p) {
      int64_t j = at.col[p];
      double v = at.val[p] * q.mu[j] / q.mu[i];
      if (j == i) {
        v -= q.w;
        saw_diag = true;
      } else if (v < 0) {
        throw DriftConditionViolated("negative off-diagonal tilted entry at (" +
                                     std::to_string(i) + "," + std::to_string(j) + ")");
      }
      q.q.col.push_back(static_cast<int32_t>(j));
      q.q.val.push_back(v);
      rowsum += v;
    }
    if (!saw_diag && q.w != 0.0) {
      q.q.col.push_back(static_cast<int32_t>(i));
      q.q.val.push_back(-q.w);
      rowsum += -q.w;
    }
    q.q.rowptr[i + 1] = static_cast<int64_t>(q.q.col.size());
    q.coffin[i] = std::max(0.0, -rowsum);
  }
  q.qt = transpose(q.q);

  double lam = 0.0;
  for (int64_t i = 0; i <= K; ++i) {
    for (int64_t p = q.q.rowptr[i]; p < q.q.rowptr[i + 1]; ++p)
      if (q.q.col[p] == i) lam = std::max(lam, -q.q.val[p]);
  }
  q.lambda = lam;
  return q;
}

std::vector<double> p_matrix(const TruncatedQ& q, double t, double tol) {
  if (t < 0) throw InvalidParam("p_matrix: t must be >= 0");
  const int64_t D = q.K + 2;  // live + coffin
  std::vector<double> out(D * D, 0.0);
  if (t == 0.0 || q.lambda == 0.0) {
    for (int64_t i = 0; i < D; ++i) out[i * D + i] = 1.0;
    return out;
  }
  double lt = q.lambda * t;
  if (lt > 600.0) {
    // split to keep the Poisson weights in range
    std::vector<double> half = p_matrix(q, t / 2, tol / 3);
    for (int64_t i = 0; i < D; ++i)
      for (int64_t j = 0; j < D; ++j) {
        double acc = 0.0;
        for (int64_t m = 0; m < D; ++m) acc += half[i * D + m] * half[m * D + j];
        out[i * D + j] = acc;
      }
    return out;
  }

  // stochastic kernel B = I + Q/lambda on live+coffin
  std::vector<double> b(D * D, 0.0);
  for (int64_t i = 0; i <= q.K; ++i) {
    b[i * D + i] = 1.0;
    for (int64_t p = q.q.rowptr[i]; p < q.q.rowptr[i + 1]; ++p)
      b[i * D + q.q.col[p]] += q.q.val[p] / q.lambda;
    b[i * D + (D - 1)] += q.coffin[i] / q.lambda;
  }
  b[(D - 1) * D + (D - 1)] = 1.0;  // coffin absorbs

  std::vector<double> term(D * D, 0.0), next(D * D, 0.0);
  for (int64_t i = 0; i < D; ++i) term[i * D + i] = 1.0;
  double poi = std::exp(-lt), cum = poi;
  for (int64_t i = 0; i < D * D; ++i) out[i] = poi * term[i];
  for (int n = 1; cum < 1.0 - tol; ++n) {
    for (int64_t i = 0; i < D; ++i) {
      for (int64_t j = 0; j < D; ++j) {
        double acc = 0.0;
        for (int64_t m = 0; m < D; ++m) acc += term[i * D + m] * b[m * D + j];
        next[i * D + j] = acc;
      }
    }
    term.swap(next);
    poi *= lt / n;
    cum += poi;
    for (int64_t i = 0; i < D * D; ++i) out[i] += poi * term[i];
    if (n > 100000) throw NoConvergence("p_matrix: series did not converge");
  }
  return out;
}

std::vector<double> r_apply(const TruncatedQ& q, double t, std::span<const double> x, double tol) {
  if (t < 0) throw InvalidParam("r_apply: t must be >= 0");
  const int64_t n = q.K + 1;
  if (static_cast<int64_t>(x.size()) != n) throw InvalidParam("r_apply: size mismatch");
  if (t == 0.0) return std::vector<double>(x.begin(), x.end());
  double lt = q.lambda * t;
  if (lt > 600.0) {
    std::vector<double> half = r_apply(q, t / 2, x, tol / 3);
    return r_apply(q, t / 2, half, tol / 3);
  }

  // v = D_mu x; y = sum_n poi_n (B^T)^n v; result = e^{wt} D_mu^{-1} y
  std::vector<double> v(n), y(n), scratch(n);
  for (int64_t i = 0; i < n; ++i) v[i] = q.mu[i] * x[i];
  double poi = std::exp(-lt), cum = poi;
  for (int64_t i = 0; i < n; ++i) y[i] = poi * v[i];
  double tol_eff = std::max(tol * std::exp(-q.w * t), 1e-300);
  for (int step = 1; cum < 1.0 - tol_eff && q.lambda > 0; ++step) {
    qt_scaled_multiply(q, v, scratch, 1.0 / q.lambda);
    for (int64_t i = 0; i < n; ++i) v[i] += scratch[i];  // v <- B^T v
    poi *= lt / step;
    cum += poi;
    for (int64_t i = 0; i < n; ++i) y[i] += poi * v[i];
    if (step > 1000000) throw NoConvergence("r_apply: series did not converge");
  }
  double ew = std::exp(q.w * t);
  for (int64_t i = 0; i < n; ++i) y[i] = ew * y[i] / q.mu[i];
  return y;
}

std::vector<double> r_apply_minus_identity(const TruncatedQ& q, double t,
                                           std::span<const double> x, double tol) {
  const int64_t n = q.K + 1;
  if (static_cast<int64_t>(x.size()) != n) throw InvalidParam("r_apply_minus_identity: size mismatch");
  std::vector<double> out(n, 0.0);
  if (t == 0.0) return out;
  double lt = q.lambda * t;
  if (lt > 1.0) {
    // not the intended regime; fall back to the plain difference
    std::vector<double> y = r_apply(q, t, x, tol);
    for (int64_t i = 0; i < n; ++i) out[i] = y[i] - x[i];
    return out;
  }

  std::vector<double> v(n), g(n), d(n, 0.0), acc(n, 0.0), scratch(n);
  for (int64_t i = 0; i < n; ++i) v[i] = q.mu[i] * x[i];
  if (q.lambda > 0) {
    qt_scaled_multiply(q, v, g, 1.0 / q.lambda);  // g = B^T v - v, exact
    double poi = std::exp(-lt), cum = poi;
    for (int step = 1; cum < 1.0 - tol; ++step) {
      // d_n = B^T d_{n-1} + g  ==  (B^T)^n v - v
      qt_scaled_multiply(q, d, scratch, 1.0 / q.lambda);
      for (int64_t i = 0; i < n; ++i) d[i] += scratch[i] + g[i];
      poi *= lt / step;
      cum += poi;
      for (int64_t i = 0; i < n; ++i) acc[i] += poi * d[i];
      if (step > 100000) throw NoConvergence("r_apply_minus_identity: series did not converge");
    }
  }
  double ew = std::exp(q.w * t), em1 = std::expm1(q.w * t);
  for (int64_t i = 0; i < n; ++i) out[i] = ew * acc[i] / q.mu[i] + em1 * x[i];
  return out;
}

CheckReport check_semigroup_props(const TruncatedQ& q, const Model& model,
                                  std::span<const double> t_list, double tol,
                                  int64_t interior_margin) {
  CheckReport rep;
  const int64_t K = q.K;
  const int64_t D = K + 2;
  const int64_t interior = std::max<int64_t>(0, K - interior_margin);
  const double ptol = std::min(tol * 1e-2, 1e-12);

  double col_margin = std::numeric_limits<double>::infinity();
  double law_margin = std::numeric_limits<double>::infinity();
  for (double t : t_list) {
    std::vector<double> pt = p_matrix(q, t, ptol);
    std::vector<double> ph = p_matrix(q, t / 2, ptol);
    for (int64_t j = 0; j <= interior; ++j) {
      // sum_i mu(i) R_ij(t) = e^{wt} mu(j) * (live row sum of P at j)
      double rowsum = 0.0;
      for (int64_t i = 0; i <= K; ++i) rowsum += pt[j * D + i];
      col_margin = std::min(col_margin, (1.0 + tol) - rowsum);

      double diff = 0.0;
      for (int64_t i = 0; i <= K; ++i) {
        double acc = 0.0;
        for (int64_t m = 0; m <= K; ++m) acc += ph[j * D + m] * ph[m * D + i];
        diff += std::abs(acc - pt[j * D + i]);
      }
      law_margin = std::min(law_margin, tol - std::exp(q.w * t) * diff);
    }
  }
  rep.rows.push_back({"column_bound", col_margin >= 0, col_margin,
                      "sum_i mu(i) R_ij(t) <= mu(j) e^{wt} (1+tol)"});
  rep.rows.push_back({"semigroup_law", law_margin >= 0, law_margin,
                      "||R(t/2)^2 - R(t)||_mu on interior columns"});

  // derivative probe on basis and random interior vectors
  {
    CsrMatrix a = truncated_a(model, K);
    double der_margin = std::numeric_limits<double>::infinity();
    CounterRng rng(2024, 99);
    std::vector<std::vector<double>> probes;
    for (int64_t j : {int64_t{0}, interior / 2, interior}) {
      std::vector<double> e(K + 1, 0.0);
      e[j] = 1.0;
      probes.push_back(std::move(e));
    }
    for (int rep_i = 0; rep_i < 2; ++rep_i) {
      std::vector<double> v(K + 1, 0.0);
      for (int64_t j = 0; j <= interior; ++j) v[j] = rng.next_unit();
      probes.push_back(std::move(v));
    }
    const double h = 1e-7;
    for (const auto& x : probes) {
      std::vector<double> ax(K + 1, 0.0);
      a.multiply(x, ax);
      std::vector<double> d1 = r_apply_minus_identity(q, h, x);
      std::vector<double> d2 = r_apply_minus_identity(q, 2 * h, x);
      double err = 0.0, scale = 0.0;
      for (int64_t i = 0; i <= interior; ++i) {
        double fd = (2.0 * d1[i] / h - d2[i] / (2 * h));  // Richardson, kills the h term
        err += q.mu[i] * std::abs(fd - ax[i]);
        scale += q.mu[i] * std::abs(ax[i]);
      }
      der_margin = std::min(der_margin, tol - err / std::max(1.0, scale));
    }
    rep.rows.push_back({"derivative", der_margin >= 0, der_margin,
                        "(R(h)-I)/h x -> Ax on interior coordinates"});
  }
  return rep;
}

MildSolution mild_solve(const Model& model, std::span<const double> x0, double T,
                        const MildOptions& opt) {
  if (x0.size() < 2) throw InvalidParam("mild_solve: x0 too short");
  if (T <= 0) throw InvalidParam("mild_solve: T must be > 0");
  const int64_t K = static_cast<int64_t>(x0.size()) - 1;
  const int64_t n = K + 1;
  TruncatedQ q = build_q(model, K);
  const WeightSystem& ws = model.weights();

  double h = opt.step > 0 ? opt.step : std::sqrt(opt.tol) / 5.0;
  uint64_t total_steps = static_cast<uint64_t>(std::ceil(T / h));
  total_steps = std::max<uint64_t>(total_steps, 16);
  h = T / static_cast<double>(total_steps);

  MildSolution sol;
  sol.K = K;
  sol.step = h;
  size_t stride = std::max<size_t>(1, total_steps / std::max<size_t>(2, opt.record_points - 1));

  std::vector<double> x(x0.begin(), x0.end());
  double xi = mu_norm(std::span<const double>(x), ws);
  double xi_run = xi;
  sol.grid.push_back(0.0);
  sol.values.push_back(x);

  const double apply_tol = 1e-15;
  std::vector<std::vector<double>> u, g, xw, xw_new;
  std::vector<double> conv(n), f(n), tmp(n);

  uint64_t step_idx = 0;
  while (step_idx < total_steps) {
    // window short enough that the fixed-point map contracts
    double lip = std::max(model.lipschitz_bound(2.0 * std::max(xi_run, 1e-6)), 1e-9);
    double delta = opt.contraction_target / (lip * std::exp(ws.w * 0.1));
    delta = std::min(delta, T);
    uint64_t m = std::max<uint64_t>(1, static_cast<uint64_t>(delta / h));
    m = std::min(m, total_steps - step_idx);

    for (bool window_done = false; !window_done;) {
      // homogeneous propagation u_j = R(jh) x(t0), reused across sweeps
      u.assign(m + 1, std::vector<double>());
      u[0] = x;
      for (uint64_t j = 1; j <= m; ++j) u[j] = r_apply(q, h, u[j - 1], apply_tol);

      xw.assign(m + 1, x);
      for (uint64_t j = 1; j <= m; ++j) xw[j] = u[j];  // Picard start: F ignored
      g.assign(m + 1, std::vector<double>(n, 0.0));
      xw_new = xw;

      double window_tol = opt.picard_tol > 0
                              ? opt.picard_tol
                              : std::max(opt.tol * (static_cast<double>(m) * h / T) * 0.5, 1e-14);
      double resid = std::numeric_limits<double>::infinity();
      double prev_resid = resid;
      int it = 0;
      bool shrink = false;
      for (; it < opt.max_iterations; ++it) {
        for (uint64_t j = 0; j <= m; ++j) model.f_eval(xw[j], std::span<double>(g[j]));
        std::fill(conv.begin(), conv.end(), 0.0);
        xw_new[0] = x;
        for (uint64_t j = 1; j <= m; ++j) {
          // conv <- R(h)(conv + h/2 g_{j-1}) + h/2 g_j  (trapezoid)
          for (int64_t i = 0; i < n; ++i) tmp[i] = conv[i] + 0.5 * h * g[j - 1][i];
          conv = r_apply(q, h, tmp, apply_tol);
          for (int64_t i = 0; i < n; ++i) conv[i] += 0.5 * h * g[j][i];
          for (int64_t i = 0; i < n; ++i) xw_new[j][i] = u[j][i] + conv[i];
        }
        resid = 0.0;
        for (uint64_t j = 1; j <= m; ++j) {
          double d = 0.0;
          for (int64_t i = 0; i < n; ++i) d += q.mu[i] * std::abs(xw_new[j][i] - xw[j][i]);
          resid = std::max(resid, d);
        }
        xw.swap(xw_new);
        if (resid <= window_tol) break;
        if (it > 4 && resid > prev_resid) {
          shrink = true;  // not contracting; halve the window
          break;
        }
        prev_resid = resid;
      }
      if (shrink && m > 1) {
        m = m / 2;
        continue;
      }
      if (resid > window_tol)
        throw NoConvergence("mild_solve: Picard iteration did not reach tolerance");
      sol.iterations = std::max(sol.iterations, it + 1);
      sol.residual = std::max(sol.residual, resid);

      for (uint64_t j = 1; j <= m; ++j) {
        double nrm = 0.0;
        for (int64_t i = 0; i < n; ++i) nrm += q.mu[i] * std::abs(xw[j][i]);
        if (nrm > opt.ceiling) throw Blowup("mild_solve: mu-norm ceiling exceeded");
        xi_run = std::max(xi_run, nrm);
        uint64_t global = step_idx + j;
        if (global % stride == 0 || global == total_steps) {
          sol.grid.push_back(static_cast<double>(global) * h);
          sol.values.push_back(xw[j]);
        }
      }
      x = xw[m];
      step_idx += m;
      window_done = true;
    }
  }
  sol.xi_sup = xi_run;
  return sol;
}

}  // namespace popdyn
