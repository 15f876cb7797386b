#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "popdyn/model_checks.hpp"
#include "popdyn/models/arrigoni.hpp"
#include "popdyn/models/finite.hpp"
#include "popdyn/models/kretzschmar.hpp"
#include "popdyn/moments.hpp"

using namespace popdyn;

TEST_CASE("host-parasite channels at simple states") {
  KretzschmarParams p;
  p.mu_d = 1.0;
  auto model = make_kretzschmar(p);

  std::vector<Channel> chans;
  model->active_channels(SparseVec{{1, 0.5}}, chans);
  // burden-1 hosts: parasite death at rate 1*mu_d*x^1 = 0.5 must be present
  bool found = false;
  for (const Channel& c : chans)
    if (c.jump == JumpVector{{0, +1}, {1, -1}}) {
      found = true;
      CHECK(c.rate == doctest::Approx(0.5));
    }
  CHECK(found);

  chans.clear();
  model->active_channels(SparseVec{}, chans);
  CHECK(chans.empty());  // empty state: the aggregated birth rate is zero too
}

TEST_CASE("host-parasite growth rate w = (beta - kappa)+") {
  KretzschmarParams p;
  p.beta = 2.0;
  p.kappa = 3.0;
  CHECK(make_kretzschmar(p)->weights().w == 0.0);
  p.beta = 1.5;
  p.kappa = 0.2;
  CHECK(make_kretzschmar(p)->weights().w == doctest::Approx(1.3));
}

TEST_CASE("metapopulation jumps conserve the patch count") {
  auto model = make_arrigoni({});
  CounterRng rng(3, 0);
  std::vector<Channel> chans;
  for (int it = 0; it < 50; ++it) {
    SparseState X = random_profile_state(40, 0.5, rng);
    SparseVec x = scaled(X, 1.0 / 40.0);
    chans.clear();
    model->active_channels(x, chans);
    for (const Channel& c : chans) {
      CHECK(c.jump.coordinate_sum() == 0);
      CHECK(c.jump.l1() <= model->jstar());
      CHECK(!c.jump.null());
      CHECK(c.rate > 0.0);
    }
  }
}

TEST_CASE("metapopulation with every patch empty has no active channels") {
  auto model = make_arrigoni({});
  std::vector<Channel> chans;
  model->active_channels(SparseVec{{0, 1.0}}, chans);
  CHECK(chans.empty());
}

TEST_CASE("metapopulation Lipschitz constant") {
  ArrigoniParams p;
  auto model = make_arrigoni(p);
  CHECK(model->lipschitz_bound(2.0) == doctest::Approx(6.0 * p.rho * p.gamma));
}

TEST_CASE("drift total on simple states") {
  auto death = make_birth_death(0.0, 2.0);
  auto d = drift_total(*death, SparseVec{{0, 0.5}}, 4);
  CHECK(d[0] == doctest::Approx(-1.0));

  KretzschmarParams kp;
  auto km = make_kretzschmar(kp);
  auto d2 = drift_total(*km, SparseVec{{0, 1.0}}, 8);
  CHECK(d2[0] == doctest::Approx(kp.beta - kp.kappa));

  auto d3 = drift_total(*km, SparseVec{}, 4);
  for (double v : d3) CHECK(v == 0.0);
}

TEST_CASE("drift split consistency on random states") {
  CounterRng rng(5, 1);
  SUBCASE("host-parasite") {
    auto model = make_kretzschmar({});
    for (int it = 0; it < 100; ++it) {
      SparseState X = random_profile_state(50 + static_cast<int64_t>(rng.next_unit() * 100),
                                           0.2 + 0.5 * rng.next_unit(), rng);
      SparseVec x = scaled(X, 1.0 / 100.0);
      int64_t K = std::max<int64_t>(x.max_index() + model->jstar(), 8) + 40;
      CHECK(drift_split_residual(*model, x, K) < 1e-10);
    }
  }
  SUBCASE("metapopulation, states on the unit-total shell") {
    auto model = make_arrigoni({});
    const int64_t n = 100;
    for (int it = 0; it < 100; ++it) {
      SparseState X = random_profile_state(n, 0.2 + 0.5 * rng.next_unit(), rng);
      SparseVec x = scaled(X, 1.0 / static_cast<double>(n));
      int64_t K = std::max<int64_t>(x.max_index() + model->jstar(), 8) + 40;
      CHECK(drift_split_residual(*model, x, K) < 1e-10);
    }
  }
  SUBCASE("metapopulation empty-patches state balances the catastrophe constant") {
    auto model = make_arrigoni({});
    CHECK(drift_split_residual(*model, SparseVec{{0, 1.0}}, 30) < 1e-14);
  }
}

TEST_CASE("finite model: pure death, migration, and the capped generator") {
  auto death = make_birth_death(0.0, 1.5);
  std::vector<Channel> chans;
  death->active_channels(SparseVec{{0, 2.0}}, chans);
  REQUIRE(chans.size() == 1);
  CHECK(chans[0].rate == doctest::Approx(3.0));

  // two-type migration conserves the total
  FiniteModelParams mp;
  mp.n_types = 2;
  mp.channels.push_back({JumpVector{{0, -1}, {1, +1}}, 0.0, {{0, 1.0}}});
  auto mig = make_finite_model(mp);
  chans.clear();
  mig->active_channels(SparseVec{{0, 3.0}}, chans);
  REQUIRE(chans.size() == 1);
  CHECK(chans[0].jump.coordinate_sum() == 0);

  // capped birth-death on {0..3}: generator entries match channel rates
  auto bd = make_birth_death(2.0, 1.0, 3);
  for (int64_t n = 0; n <= 3; ++n) {
    chans.clear();
    SparseVec x;
    if (n > 0) x.set(0, static_cast<double>(n));
    bd->active_channels(x, chans);
    double up = 0.0, down = 0.0;
    for (const Channel& c : chans)
      (c.jump.delta(0) > 0 ? up : down) += c.rate;
    CHECK(up == doctest::Approx(n < 3 ? 2.0 * n : 0.0));
    CHECK(down == doctest::Approx(1.0 * n));
  }
}

TEST_CASE("finite model rejects a non-vanishing exit rate") {
  FiniteModelParams mp;
  mp.n_types = 1;
  mp.channels.push_back({JumpVector{{0, -1}}, 1.0, {}});
  CHECK_THROWS_AS(make_finite_model(mp), InvalidParam);
}

TEST_CASE("boundary rule and jump invariants under channel fuzz") {
  CounterRng rng(6, 2);
  std::vector<std::unique_ptr<Model>> models;
  models.push_back(make_kretzschmar({}));
  models.push_back(make_arrigoni({}));
  std::vector<Channel> chans;
  for (auto& model : models) {
    for (int it = 0; it < 60; ++it) {
      SparseState X = random_profile_state(60, 0.2 + 0.6 * rng.next_unit(), rng);
      SparseVec x = scaled(X, 1.0 / 60.0);
      chans.clear();
      model->active_channels(x, chans);
      for (const Channel& c : chans) {
        CHECK(c.rate > 0.0);
        CHECK(c.jump.l1() <= model->jstar());
        CHECK(c.jump.min_delta() >= model->min_jump_entry());
        for (const auto& [j, d] : c.jump.coords())
          if (d < 0) CHECK(x.value(j) > 0.0);
      }
    }
  }
}

TEST_CASE("column drift condition holds on a probe section") {
  for (auto& model : {make_kretzschmar({}), make_arrigoni({})}) {
    const WeightSystem& ws = model->weights();
    for (int64_t i = 0; i <= 200; ++i) {
      double colsum = 0.0;
      for (int64_t r = 0; r <= 210; ++r) colsum += model->a_entry(r, i) * ws.mu(r);
      CHECK(colsum <= ws.w * ws.mu(i) + 1e-9);
    }
  }
}

TEST_CASE("assumption checks pass for the built-ins and catch a deep exit") {
  SUBCASE("host-parasite") {
    auto model = make_kretzschmar({});
    auto states = sample_states(*model, 200, 100, 91);
    CheckReport rep = check_model_assumptions(*model, states, 200, {0, 1, 2});
    for (const CheckRow& r : rep.rows) {
      INFO(r.name, " margin=", r.margin, " ", r.detail);
      CHECK(r.pass);
    }
  }
  SUBCASE("metapopulation with conserved totals") {
    auto model = make_arrigoni({});
    auto states = sample_states(*model, 200, 100, 92);
    for (const auto& s : states) CHECK(s.total() == 200);
    CheckReport rep = check_model_assumptions(*model, states, 200, {0, 1, 2});
    for (const CheckRow& r : rep.rows) {
      INFO(r.name, " margin=", r.margin, " ", r.detail);
      CHECK(r.pass);
    }
  }
  SUBCASE("a -2 jump entry fails the declared lower bound") {
    FiniteModelParams mp;
    mp.n_types = 1;
    mp.allow_deep_exits = true;
    mp.channels.push_back({JumpVector{{0, -2}}, 0.0, {{0, 1.0}}});
    auto model = make_finite_model(mp);
    std::vector<SparseState> states = {SparseState{{0, 5}}};
    CheckReport rep = check_model_assumptions(*model, states, 1, {0});
    bool lower_bound_failed = false;
    for (const CheckRow& r : rep.rows)
      if (r.name == "jump_lower_bound" && !r.pass) lower_bound_failed = true;
    CHECK(lower_bound_failed);
  }
}

TEST_CASE("empty state has zero drift-split residual") {
  auto model = make_kretzschmar({});
  CHECK(drift_split_residual(*model, SparseVec{}, 20) == 0.0);
}

TEST_CASE("growth constants match the closed forms") {
  KretzschmarParams kp;
  auto km = make_kretzschmar(kp);
  const MomentConstants& kmc = km->moments();
  CHECK(kmc.at(0)[0] == kp.beta);
  CHECK(kmc.at(0)[2] == kp.kappa + kp.beta + kp.alpha);
  CHECK(kmc.at(1)[0] == kp.beta + kp.lambda);
  CHECK(kmc.at(2)[0] == kp.beta + 2.0 * 2.0 * kp.lambda);
  CHECK(kmc.at(1)[3] == 0.0);
  CHECK(kmc.p(2) == 5);
  CHECK(kmc.r_zeta == 8);
  CHECK(kmc.rho == 17);

  ArrigoniParams ap;
  auto am = make_arrigoni(ap);
  const MomentConstants& amc = am->moments();
  CHECK(amc.at(0)[0] == 0.0);
  CHECK(amc.at(0)[2] == 0.0);
  CHECK(amc.at(1)[0] == doctest::Approx(ap.sup_b + ap.rho * ap.gamma));
  CHECK(amc.at(2)[0] == doctest::Approx(2.0 * 2.0 * (ap.sup_b + ap.rho * ap.gamma)));
  CHECK(amc.p(2) == 4);
  CHECK(amc.r_zeta == 8);
  CHECK(amc.rho == 16);
  CHECK(am->jstar() == 4);
  CHECK(km->jstar() == 2);
}
