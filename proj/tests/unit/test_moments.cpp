#include <doctest.h>

#include <cmath>
#include <vector>

#include "popdyn/models/finite.hpp"
#include "popdyn/models/kretzschmar.hpp"
#include "popdyn/moments.hpp"
#include "popdyn/rng.hpp"

using namespace popdyn;

namespace {

SparseVec random_vec(CounterRng& rng, int64_t max_idx, bool signed_entries) {
  SparseVec v;
  int n = 1 + static_cast<int>(rng.next_unit() * 6);
  for (int i = 0; i < n; ++i) {
    int64_t j = static_cast<int64_t>(rng.next_unit() * static_cast<double>(max_idx));
    double val = rng.next_unit() * 3.0;
    if (signed_entries && rng.next_unit() < 0.5) val = -val;
    if (val != 0) v.set(j, val);
  }
  return v;
}

}  // namespace

TEST_CASE("mu-norm on the defining examples") {
  WeightSystem ws = power_weights(0.0);
  CHECK(mu_norm(SparseVec{}, ws) == 0.0);
  CHECK(mu_norm(SparseVec{{0, 1.0}}, ws) == 1.0);
  CHECK(mu_norm(SparseVec{{0, 0.5}, {3, 0.25}}, ws) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("mu-norm is a norm: triangle inequality and homogeneity") {
  WeightSystem ws = power_weights(0.0);
  CounterRng rng(11, 0);
  for (int it = 0; it < 200; ++it) {
    SparseVec a = random_vec(rng, 40, true);
    SparseVec b = random_vec(rng, 40, true);
    SparseVec sum = a;
    for (const auto& [j, v] : b.entries()) sum.set(j, sum.value(j) + v);
    CHECK(mu_norm(sum, ws) <= mu_norm(a, ws) + mu_norm(b, ws) + 1e-12);
    double c = -2.5;
    SparseVec ca;
    for (const auto& [j, v] : a.entries()) ca.set(j, c * v);
    CHECK(mu_norm(ca, ws) == doctest::Approx(std::abs(c) * mu_norm(a, ws)).epsilon(1e-13));
  }
}

TEST_CASE("empirical moments on the defining examples") {
  WeightSystem ws = power_weights(0.0);
  SparseState x{{0, 2}, {3, 1}};
  CHECK(moment_s(x, ws, 0) == 3.0);  // S0 is the total count
  CHECK(moment_s(SparseState{}, ws, 5) == 0.0);
  CHECK(moment_s(x, ws, 2) == doctest::Approx(2.0 + 16.0));
}

TEST_CASE("moment ordering: S_r >= S_0 and the Jensen product inequality") {
  WeightSystem ws = power_weights(0.0);
  CounterRng rng(12, 0);
  for (int it = 0; it < 200; ++it) {
    SparseState x;
    int n = 1 + static_cast<int>(rng.next_unit() * 6);
    for (int i = 0; i < n; ++i)
      x.add(static_cast<int64_t>(rng.next_unit() * 30),
            1 + static_cast<int64_t>(rng.next_unit() * 5));
    for (int r = 1; r <= 4; ++r) {
      double s0 = moment_s(x, ws, 0), sr = moment_s(x, ws, r);
      CHECK(sr >= s0 - 1e-12);
      double s1 = moment_s(x, ws, 1), srm1 = moment_s(x, ws, r - 1);
      CHECK(s1 * srm1 <= s0 * sr * (1 + 1e-12));
    }
  }
}

TEST_CASE("zeta weight of a jump") {
  WeightSystem ws = power_weights(0.0);
  CHECK(zeta_weight(JumpVector{}, ws) == 0.0);
  CHECK(zeta_weight(JumpVector{{1, +1}, {0, -1}}, ws) == doctest::Approx(129.0));  // 2^7 + 1
  CHECK(zeta_weight(JumpVector{{0, +1}}, ws) == 1.0);
}

TEST_CASE("zeta weight dominates the l1 size when zeta >= 1") {
  WeightSystem ws = power_weights(0.0);
  CounterRng rng(13, 0);
  for (int it = 0; it < 100; ++it) {
    JumpVector j;
    int n = 1 + static_cast<int>(rng.next_unit() * 3);
    for (int i = 0; i < n; ++i)
      j.add(static_cast<int64_t>(rng.next_unit() * 20), rng.next_unit() < 0.5 ? -1 : +1);
    CHECK(zeta_weight(j, ws) >= static_cast<double>(j.l1()) - 1e-12);
  }
}

TEST_CASE("drift moments on a single death channel") {
  // one type, death at rate d x^0 with d = 2, state x = {0: 0.5}
  auto model = make_birth_death(0.0, 2.0);
  SparseVec x{{0, 0.5}};
  CHECK(moment_u(x, *model, 1) == doctest::Approx(-1.0));
  CHECK(moment_v(x, *model, 1) == doctest::Approx(1.0));
  CHECK(moment_u(SparseVec{}, *model, 1) == 0.0);
  CHECK(moment_v(SparseVec{}, *model, 1) == 0.0);
}

TEST_CASE("host-parasite drift moment at a bare-host state") {
  KretzschmarParams p;
  auto model = make_kretzschmar(p);
  SparseVec x{{0, 1.0}};
  // only the host birth (+beta) and the host death (-kappa) move S0
  CHECK(moment_u(x, *model, 0) == doctest::Approx(p.beta - p.kappa));
}

TEST_CASE("channel-sum moments match a naive dense-jump oracle") {
  auto model = make_kretzschmar({});
  CounterRng rng(14, 0);
  const WeightSystem& ws = model->weights();
  for (int it = 0; it < 50; ++it) {
    SparseVec x;
    int n = 1 + static_cast<int>(rng.next_unit() * 5);
    for (int i = 0; i < n; ++i) x.set(static_cast<int64_t>(rng.next_unit() * 20), rng.next_unit());
    for (int r = 0; r <= 2; ++r) {
      std::vector<Channel> chans;
      model->active_channels(x, chans);
      // oracle: materialize each jump densely, dot against nu_r
      double u = 0.0, v = 0.0;
      for (const Channel& c : chans) {
        std::vector<double> dense(64, 0.0);
        for (const auto& [j, d] : c.jump.coords()) dense[static_cast<size_t>(j)] += d;
        double inc = 0.0;
        for (size_t j = 0; j < dense.size(); ++j)
          inc += dense[j] * ws.nu_pow(static_cast<int64_t>(j), r);
        u += c.rate * inc;
        v += c.rate * inc * inc;
      }
      CHECK(moment_u(x, *model, r) == doctest::Approx(u).epsilon(1e-12));
      CHECK(moment_v(x, *model, r) == doctest::Approx(v).epsilon(1e-12));
    }
  }
}

TEST_CASE("v_r is nonnegative and zero only with no active channels") {
  auto model = make_kretzschmar({});
  SparseVec x{{0, 0.4}, {2, 0.1}};
  CHECK(moment_v(x, *model, 1) > 0.0);
  CHECK(moment_v(SparseVec{}, *model, 1) == 0.0);
}

TEST_CASE("constants beyond the tabulated orders are reported missing") {
  auto model = make_kretzschmar({});
  CHECK_THROWS_AS(model->moments().at(30), ConstantMissing);
  CHECK(model->moments().has(8));
}

TEST_CASE("weight probe rejects a bounded nu") {
  WeightSystem ws = power_weights(0.0);
  ws.nu = [](int64_t) { return 1.0; };
  CHECK_THROWS_AS(validate_weights(ws), InvalidParam);
}

TEST_CASE("nu and mu may differ: moments use nu, the norm uses mu") {
  WeightSystem ws = power_weights(0.0);
  ws.mu = [](int64_t j) {
    double b = static_cast<double>(j + 1);
    return b * b;
  };
  validate_weights(ws);
  SparseState x{{1, 1}, {3, 2}};
  CHECK(moment_s(x, ws, 1) == doctest::Approx(2.0 + 2 * 4.0));      // nu = j+1
  CHECK(mu_norm(x, ws) == doctest::Approx(4.0 + 2 * 16.0));         // mu = (j+1)^2
}
