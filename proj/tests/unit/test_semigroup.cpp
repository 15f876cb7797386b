#include <doctest.h>

#include <cmath>
#include <vector>

#include "popdyn/models/finite.hpp"
#include "popdyn/models/kretzschmar.hpp"
#include "popdyn/moments.hpp"
#include "popdyn/semigroup.hpp"

using namespace popdyn;

namespace {

// One type decaying into another, A = [[-1, 0], [1, 0]], with flat
// weights mu = nu = 1 so the tilt is trivial: Q = [[-1, 1], [0, 0]].
class FlatDecayModel final : public Model {
 public:
  FlatDecayModel() {
    name_ = "flat-decay";
    jstar_ = 2;
    ws_.nu = [](int64_t) { return 1.0; };
    ws_.mu = ws_.nu;
    ws_.zeta = ws_.nu;
    ws_.w = 0.0;
    mc_.k.resize(3, {1.0, 0.0, 1.0, 0.0, 0.0});
    mc_.p = [](int r) { return std::max(1, r); };
    mc_.r_max1 = mc_.r_max2 = 8;
    mc_.r_zeta = 1;
    mc_.k1_zeta = 2.0;
    mc_.rho = 1;
    mc_.r_mu = 1;
  }
  void active_channels(const SparseVec& x, std::vector<Channel>& out) const override {
    if (x.value(0) > 0) out.push_back({JumpVector{{0, -1}, {1, +1}}, x.value(0)});
  }
  double a_entry(int64_t i, int64_t j) const override {
    if (i == 0 && j == 0) return -1.0;
    if (i == 1 && j == 0) return 1.0;
    return 0.0;
  }
  void f_eval(std::span<const double>, std::span<double> out) const override {
    for (double& v : out) v = 0.0;
  }
  double lipschitz_bound(double) const override { return 0.0; }
};

}  // namespace

TEST_CASE("tilted generator of the two-state decay chain") {
  FlatDecayModel model;
  TruncatedQ q = build_q(model, 1);
  CHECK(q.w == 0.0);
  auto entry = [&](int64_t i, int64_t j) {
    for (int64_t p = q.q.rowptr[i]; p < q.q.rowptr[i + 1]; ++p)
      if (q.q.col[p] == j) return q.q.val[p];
    return 0.0;
  };
  CHECK(entry(0, 0) == -1.0);
  CHECK(entry(0, 1) == 1.0);
  CHECK(entry(1, 0) == 0.0);
  CHECK(entry(1, 1) == 0.0);
  CHECK(q.coffin[0] == 0.0);
  CHECK(q.coffin[1] == 0.0);
  CHECK(q.lambda == doctest::Approx(1.0));
}

TEST_CASE("transition matrix of the scalar decay at t = ln 2") {
  FlatDecayModel model;
  TruncatedQ q = build_q(model, 1);
  std::vector<double> p0 = p_matrix(q, 0.0, 1e-12);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 3; ++j) CHECK(p0[i * 3 + j] == (i == j ? 1.0 : 0.0));

  std::vector<double> p = p_matrix(q, std::log(2.0), 1e-13);
  CHECK(p[0 * 3 + 0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(p[0 * 3 + 1] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(p[1 * 3 + 1] == doctest::Approx(1.0));
  // rows sum to one including the coffin
  for (int64_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < 3; ++j) s += p[i * 3 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-11));
  }
}

TEST_CASE("transition rows remain stochastic for a host-parasite section") {
  auto model = make_kretzschmar({});
  TruncatedQ q = build_q(*model, 60);
  for (int64_t i = 0; i <= 60; ++i) {
    double rowsum = q.coffin[i];
    for (int64_t p = q.q.rowptr[i]; p < q.q.rowptr[i + 1]; ++p) rowsum += q.q.val[p];
    CHECK(std::abs(rowsum) < 1e-12);
  }
  std::vector<double> p = p_matrix(q, 0.5, 1e-12);
  for (int64_t i = 0; i <= 61; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j <= 61; ++j) {
      s += p[i * 62 + j];
      CHECK(p[i * 62 + j] >= -1e-15);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-11));
  }
}

TEST_CASE("semigroup action: identity at t=0, consistency with the dense matrix") {
  auto model = make_kretzschmar({});
  TruncatedQ q = build_q(*model, 40);
  std::vector<double> x(41, 0.0);
  x[0] = 0.7;
  x[3] = 0.2;
  x[10] = 0.05;
  CHECK(r_apply(q, 0.0, x) == x);

  double t = 0.35;
  std::vector<double> y = r_apply(q, t, x, 1e-14);
  std::vector<double> p = p_matrix(q, t, 1e-14);
  const int64_t D = q.K + 2;
  for (int64_t i = 0; i <= q.K; ++i) {
    double acc = 0.0;
    for (int64_t j = 0; j <= q.K; ++j) acc += q.mu[j] * p[j * D + i] * x[j];
    acc = std::exp(q.w * t) * acc / q.mu[i];
    CHECK(y[i] == doctest::Approx(acc).epsilon(1e-9));
  }
}

TEST_CASE("semigroup action is a mu-norm contraction up to e^{wt}") {
  auto model = make_kretzschmar({});
  TruncatedQ q = build_q(*model, 50);
  const WeightSystem& ws = model->weights();
  CounterRng rng(21, 4);
  for (int it = 0; it < 20; ++it) {
    std::vector<double> x(51, 0.0);
    for (int64_t j = 0; j < 51; ++j) x[j] = rng.next_unit() < 0.3 ? rng.next_unit() : 0.0;
    double t = 0.1 + rng.next_unit();
    std::vector<double> y = r_apply(q, t, x);
    CHECK(mu_norm(std::span<const double>(y), ws) <=
          std::exp(q.w * t) * mu_norm(std::span<const double>(x), ws) * (1 + 1e-10));
  }
}

TEST_CASE("semigroup law is exact for the two-state chain") {
  FlatDecayModel model;
  TruncatedQ q = build_q(model, 1);
  std::vector<double> ph = p_matrix(q, 0.5, 1e-14);
  std::vector<double> pf = p_matrix(q, 1.0, 1e-14);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int64_t m = 0; m < 3; ++m) acc += ph[i * 3 + m] * ph[m * 3 + j];
      CHECK(acc == doctest::Approx(pf[i * 3 + j]).epsilon(1e-12));
    }
}

TEST_CASE("semigroup property report for the host-parasite section") {
  auto model = make_kretzschmar({});
  TruncatedQ q = build_q(*model, 60);
  std::vector<double> ts = {0.1, 1.0};
  CheckReport rep = check_semigroup_props(q, *model, ts, 1e-6, 20);
  for (const CheckRow& r : rep.rows) {
    INFO(r.name, " margin=", r.margin);
    CHECK(r.pass);
  }
}

TEST_CASE("mild solution with F = 0 is the semigroup orbit") {
  FlatDecayModel model;  // F identically zero
  std::vector<double> x0 = {1.0, 0.0};
  MildOptions opt;
  opt.tol = 1e-9;
  MildSolution sol = mild_solve(model, x0, 1.0, opt);
  TruncatedQ q = build_q(model, 1);
  for (size_t gi = 0; gi < sol.grid.size(); ++gi) {
    std::vector<double> ref = r_apply(q, sol.grid[gi], x0, 1e-14);
    CHECK(sol.values[gi][0] == doctest::Approx(ref[0]).epsilon(1e-8));
    CHECK(sol.values[gi][1] == doctest::Approx(ref[1]).epsilon(1e-8));
  }
}

TEST_CASE("mild solution reproduces variation of constants for immigration-death") {
  // dx/dt = -x + lambda with lambda = 0.6: x(t) = e^{-t} x0 + lambda(1 - e^{-t})
  FiniteModelParams p;
  p.n_types = 1;
  p.channels.push_back({JumpVector{{0, +1}}, 0.6, {}});
  p.channels.push_back({JumpVector{{0, -1}}, 0.0, {{0, 1.0}}});
  auto model = make_finite_model(p);
  std::vector<double> x0 = {1.0, 0.0};  // padded section
  MildOptions opt;
  opt.tol = 1e-9;
  MildSolution sol = mild_solve(*model, x0, 1.0, opt);
  for (size_t gi = 0; gi < sol.grid.size(); ++gi) {
    double t = sol.grid[gi];
    double ref = std::exp(-t) * 1.0 + 0.6 * (1.0 - std::exp(-t));
    CHECK(sol.values[gi][0] == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("mild solution is grid stable") {
  KretzschmarParams kp;
  auto model = make_kretzschmar(kp);
  std::vector<double> x0(41, 0.0);
  x0[0] = 0.6;
  x0[1] = 0.3;
  x0[2] = 0.1;
  MildOptions a;
  a.tol = 1e-7;
  MildSolution s1 = mild_solve(*model, x0, 0.5, a);
  MildOptions b = a;
  b.step = s1.step / 2;
  b.record_points = 2;
  MildSolution s2 = mild_solve(*model, x0, 0.5, b);
  // compare at the final time
  const WeightSystem& ws = model->weights();
  std::vector<double> diff(41);
  for (int i = 0; i <= 40; ++i) diff[i] = s1.values.back()[i] - s2.values.back()[i];
  CHECK(mu_norm(std::span<const double>(diff), ws) < 4.0 * a.tol);
}

namespace {

// declares w = 0 although the column sums are positive
class BadDriftModel final : public Model {
 public:
  BadDriftModel() {
    name_ = "bad-drift";
    jstar_ = 1;
    ws_ = power_weights(0.0);
    mc_.p = [](int r) { return std::max(1, r); };
  }
  void active_channels(const SparseVec&, std::vector<Channel>&) const override {}
  double a_entry(int64_t i, int64_t j) const override { return i == j ? 1.0 : 0.0; }
  void f_eval(std::span<const double>, std::span<double> out) const override {
    for (double& v : out) v = 0.0;
  }
  double lipschitz_bound(double) const override { return 0.0; }
};

}  // namespace

TEST_CASE("growth beyond the declared rate is rejected") {
  BadDriftModel model;
  CHECK_THROWS_AS(build_q(model, 4), DriftConditionViolated);
}

TEST_CASE("mild solver flags blow-up against the ceiling") {
  auto model = make_birth_death(3.0, 0.0);
  std::vector<double> x0 = {1.0, 0.0};
  MildOptions opt;
  opt.tol = 1e-4;
  opt.ceiling = 5.0;
  CHECK_THROWS_AS(mild_solve(*model, x0, 5.0, opt), Blowup);
}

TEST_CASE("zero generator gives the identity semigroup") {
  FiniteModelParams p;
  p.n_types = 2;
  auto model = make_finite_model(p);  // no channels: A = 0, w = 0
  TruncatedQ q = build_q(*model, 1);
  CHECK(q.lambda == 0.0);
  std::vector<double> x = {0.3, 0.7};
  CHECK(r_apply(q, 2.5, x) == x);
}
