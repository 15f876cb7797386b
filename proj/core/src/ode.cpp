#include "popdyn/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "popdyn/errors.hpp"
#include "popdyn/moments.hpp"

namespace popdyn {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct Workspace {
  int64_t K = -1;
  CsrMatrix a;
  std::vector<double> mu;
  std::vector<double> y, ynew, f;
  std::vector<double> k1, k2, k3, k4, k5, k6, k7;

  void resize(const Model& model, int64_t newK) {
    K = newK;
    a = truncated_a(model, newK);
    mu.resize(newK + 1);
    for (int64_t i = 0; i <= newK; ++i) mu[i] = model.weights().mu(i);
    for (auto* v : {&y, &ynew, &f, &k1, &k2, &k3, &k4, &k5, &k6, &k7}) v->resize(newK + 1, 0.0);
  }

  void rhs(const std::vector<double>& x, std::vector<double>& out, const Model& model) {
    a.multiply(x, out);
    f.assign(x.size(), 0.0);
    model.f_eval(x, std::span<double>(f));
    for (size_t i = 0; i < out.size(); ++i) out[i] += f[i];
  }

  double mu_l1(const std::vector<double>& v) const {
    double s = 0.0;
    for (size_t i = 0; i < v.size(); ++i) s += mu[i] * std::abs(v[i]);
    return s;
  }
};

}  // namespace

OdeSolution ode_solve(const Model& model, const SparseVec& x0, double T, const OdeOptions& opt) {
  if (T <= 0) throw InvalidParam("ode_solve: T must be > 0");
  const int jstar = std::max(1, model.jstar());
  int64_t K = opt.k_init > 0 ? opt.k_init
                             : std::max<int64_t>(x0.max_index() + 6 * jstar + 16, 32);
  K = std::min(K, opt.k_max);

  Workspace w;
  w.resize(model, K);
  for (const auto& [j, v] : x0.entries()) {
    if (j > K) throw InvalidParam("ode_solve: x0 support exceeds the initial truncation");
    w.y[static_cast<size_t>(j)] = v;
  }

  OdeSolution sol;
  sol.k_history.push_back({0.0, K});

  std::vector<double> tmp(K + 1);
  auto stage = [&](std::vector<double>& out, std::initializer_list<std::pair<const std::vector<double>*, double>> terms,
                   double h) {
    out.assign(w.y.size(), 0.0);
    for (size_t i = 0; i < w.y.size(); ++i) {
      double acc = w.y[i];
      for (const auto& [vec, coef] : terms) acc += h * coef * (*vec)[i];
      out[i] = acc;
    }
  };

  double t = 0.0;
  w.rhs(w.y, w.k1, model);
  double h = opt.h_init;
  if (h <= 0) {
    double d0 = w.mu_l1(w.y), df = w.mu_l1(w.k1);
    h = df > 0 ? 0.01 * std::max(d0, opt.atol) / df : T / 100.0;
    h = std::min(h, T / 10.0);
  }

  int consecutive_rejects = 0;
  while (t < T) {
    if (sol.n_steps + sol.n_rejected > opt.max_steps)
      throw NoConvergence("ode_solve: step budget exhausted");
    if (h < 1e-14 * std::max(1.0, T))
      throw StepUnderflow("ode_solve: step size underflow at t=" + std::to_string(t));
    if (t + h > T) h = T - t;

    stage(tmp, {{&w.k1, a21}}, h);
    w.rhs(tmp, w.k2, model);
    stage(tmp, {{&w.k1, a31}, {&w.k2, a32}}, h);
    w.rhs(tmp, w.k3, model);
    stage(tmp, {{&w.k1, a41}, {&w.k2, a42}, {&w.k3, a43}}, h);
    w.rhs(tmp, w.k4, model);
    stage(tmp, {{&w.k1, a51}, {&w.k2, a52}, {&w.k3, a53}, {&w.k4, a54}}, h);
    w.rhs(tmp, w.k5, model);
    stage(tmp, {{&w.k1, a61}, {&w.k2, a62}, {&w.k3, a63}, {&w.k4, a64}, {&w.k5, a65}}, h);
    w.rhs(tmp, w.k6, model);
    stage(w.ynew, {{&w.k1, b1}, {&w.k3, b3}, {&w.k4, b4}, {&w.k5, b5}, {&w.k6, b6}}, h);
    w.rhs(w.ynew, w.k7, model);

    double err_norm = 0.0;
    for (size_t i = 0; i < w.y.size(); ++i) {
      double e = h * (e1 * w.k1[i] + e3 * w.k3[i] + e4 * w.k4[i] + e5 * w.k5[i] + e6 * w.k6[i] +
                      e7 * w.k7[i]);
      err_norm += w.mu[i] * std::abs(e);
    }
    double scale = opt.atol + opt.rtol * std::max(w.mu_l1(w.y), w.mu_l1(w.ynew));
    double ratio = err_norm / scale;

    if (ratio > 1.0) {
      ++sol.n_rejected;
      ++consecutive_rejects;
      double fac = std::max(0.2, 0.9 * std::pow(ratio, -0.2));
      h *= consecutive_rejects > 3 ? 0.2 : fac;
      continue;
    }
    consecutive_rejects = 0;

    // record the dense-output polynomial for this step
    OdeStep st;
    st.t = t;
    st.h = h;
    st.K = w.K;
    st.c1 = w.y;
    st.c2.resize(w.y.size());
    st.c3.resize(w.y.size());
    st.c4.resize(w.y.size());
    st.c5.resize(w.y.size());
    for (size_t i = 0; i < w.y.size(); ++i) {
      double delta = w.ynew[i] - w.y[i];
      st.c2[i] = delta;
      st.c3[i] = h * w.k1[i] - delta;
      st.c4[i] = delta - h * w.k7[i] - st.c3[i];
      st.c5[i] = h * (d1 * w.k1[i] + d3 * w.k3[i] + d4 * w.k4[i] + d5 * w.k5[i] + d6 * w.k6[i] +
                      d7 * w.k7[i]);
    }
    sol.step_t.push_back(t);
    sol.steps.push_back(std::move(st));
    ++sol.n_steps;

    t += h;
    w.y.swap(w.ynew);

    // nonnegativity: the flow keeps the cone invariant; clamp noise
    for (size_t i = 0; i < w.y.size(); ++i) {
      if (w.y[i] < -opt.atol) {
        w.y[i] = 0.0;
        ++sol.n_neg_clamped;
      }
    }

    double nrm = w.mu_l1(w.y);
    if (nrm > opt.ceiling) throw CeilingExceeded("ode_solve: mu-norm ceiling exceeded");

    // boundary-band tail monitor
    double band = 0.0;
    for (int64_t i = std::max<int64_t>(0, w.K - 2 * jstar + 1); i <= w.K; ++i)
      band += w.mu[i] * std::abs(w.y[i]);
    sol.max_band_tail = std::max(sol.max_band_tail, band);
    if (band > opt.eps_tail) {
      int64_t newK = std::min<int64_t>(std::max<int64_t>(w.K + 2 * jstar, (w.K * 3) / 2), opt.k_max);
      if (newK == w.K) throw CeilingExceeded("ode_solve: truncation limit k_max reached");
      std::vector<double> yold = w.y;
      w.resize(model, newK);
      std::fill(w.y.begin(), w.y.end(), 0.0);
      std::copy(yold.begin(), yold.end(), w.y.begin());
      tmp.resize(newK + 1);
      sol.k_history.push_back({t, newK});
    }

    w.rhs(w.y, w.k1, model);  // FSAL does not survive clamping/growth; recompute
    double fac = std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(ratio, 1e-10), -0.2)));
    h *= fac;
  }

  sol.t_end = T;
  sol.step_t.push_back(T);
  sol.k_final = w.K;

  // xi on a 4x refinement of the accepted grid
  double xi = 0.0;
  for (const OdeStep& st : sol.steps) {
    for (double theta : {0.0, 0.25, 0.5, 0.75}) {
      double s = 0.0;
      for (size_t i = 0; i < st.c1.size(); ++i) {
        double u = st.c1[i] + theta * (st.c2[i] + (1 - theta) * (st.c3[i] + theta * (st.c4[i] + (1 - theta) * st.c5[i])));
        s += model.weights().mu(static_cast<int64_t>(i)) * std::abs(u);
      }
      xi = std::max(xi, s);
    }
  }
  xi = std::max(xi, w.mu_l1(w.y));
  sol.xi_sup = xi;
  return sol;
}

namespace {

void eval_step(const OdeStep& st, double theta, std::span<double> out) {
  size_t n = std::min(out.size(), st.c1.size());
  for (size_t i = 0; i < n; ++i) {
    out[i] = st.c1[i] +
             theta * (st.c2[i] + (1 - theta) * (st.c3[i] + theta * (st.c4[i] + (1 - theta) * st.c5[i])));
  }
  for (size_t i = n; i < out.size(); ++i) out[i] = 0.0;
}

}  // namespace

std::vector<double> eval_solution(const OdeSolution& sol, double t) {
  if (t < 0 || t > sol.t_end * (1 + 1e-12) + 1e-300)
    throw OutOfRange("eval_solution: t outside [0, T]");
  t = std::min(t, sol.t_end);
  auto it = std::upper_bound(sol.step_t.begin(), sol.step_t.end() - 1, t);
  size_t idx = static_cast<size_t>(std::max<int64_t>(0, (it - sol.step_t.begin()) - 1));
  idx = std::min(idx, sol.steps.size() - 1);
  const OdeStep& st = sol.steps[idx];
  std::vector<double> out(st.c1.size());
  eval_step(st, (t - st.t) / st.h, out);
  return out;
}

void SolutionCursor::eval(double t, std::span<double> out) {
  if (t < 0 || t > sol_->t_end * (1 + 1e-12) + 1e-300)
    throw OutOfRange("SolutionCursor: t outside [0, T]");
  t = std::min(t, sol_->t_end);
  while (idx_ + 1 < sol_->steps.size() && sol_->step_t[idx_ + 1] <= t) ++idx_;
  while (idx_ > 0 && sol_->step_t[idx_] > t) --idx_;
  const OdeStep& st = sol_->steps[idx_];
  eval_step(st, (t - st.t) / st.h, out);
}

double xi_sup(const OdeSolution& sol) { return sol.xi_sup; }

}  // namespace popdyn
