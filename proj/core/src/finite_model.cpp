#include "popdyn/models/finite.hpp"

#include <cmath>
#include <limits>

#include "popdyn/errors.hpp"

namespace popdyn {

namespace {

class FiniteModel final : public Model {
 public:
  explicit FiniteModel(const FiniteModelParams& p) : p_(p) {
    if (p.n_types < 1 || p.n_types > 6) throw InvalidParam("finite model: n_types must be in 1..6");
    int64_t jmax = 0;
    for (const FiniteChannel& ch : p.channels) {
      if (ch.jump.null()) throw InvalidParam("finite model: null jump");
      if (ch.constant < 0) throw InvalidParam("finite model: negative rate constant");
      jmax = std::max(jmax, ch.jump.l1());
      bool has_exit = false;
      int64_t exit_idx = -1;
      for (const auto& [j, d] : ch.jump.coords()) {
        if (j >= p.n_types) throw InvalidParam("finite model: jump index out of range");
        if (d < 0) {
          if (has_exit) throw InvalidParam("finite model: at most one exit coordinate per channel");
          if (d < -1 && !p.allow_deep_exits) throw InvalidParam("finite model: jump entry below -1");
          has_exit = true;
          exit_idx = j;
        }
      }
      for (const auto& [j, m] : ch.coeffs) {
        if (j >= p.n_types || j < 0) throw InvalidParam("finite model: coefficient index out of range");
        if (m < 0) throw InvalidParam("finite model: negative rate coefficient");
        if (has_exit && j != exit_idx)
          throw InvalidParam("finite model: exit channel rate must be proportional to the exit count");
      }
      if (has_exit && ch.constant != 0)
        throw InvalidParam("finite model: exit channel rate must vanish on the boundary");
    }

    name_ = "finite";
    jstar_ = static_cast<int>(jmax);
    min_jump_entry_ = -1;
    double w = 0.0;
    // column condition: w >= (A^T mu)_i / mu(i) over the finite index set
    WeightSystem base = power_weights(0.0);
    for (int64_t i = 0; i < p.n_types; ++i) {
      double colsum = 0.0;
      for (int64_t r = 0; r < p.n_types; ++r) colsum += a_value(r, i) * base.mu(r);
      w = std::max(w, colsum / base.mu(i));
    }
    ws_ = power_weights(w);
    mc_ = build_constants();
  }

  void active_channels(const SparseVec& x, std::vector<Channel>& out) const override {
    for (const FiniteChannel& ch : p_.channels) {
      double rate = ch.constant;
      for (const auto& [j, m] : ch.coeffs) rate += m * x.value(j);
      if (rate <= 0) continue;
      if (p_.cap >= 0 && !fits_cap(x, ch.jump)) continue;
      out.push_back({ch.jump, rate});
    }
  }

  double a_entry(int64_t i, int64_t j) const override { return a_value(i, j); }

  void f_eval(std::span<const double> x, std::span<double> out) const override {
    (void)x;
    for (size_t i = 0; i < out.size(); ++i) out[i] = 0.0;
    for (const FiniteChannel& ch : p_.channels) {
      if (ch.constant == 0) continue;
      for (const auto& [j, d] : ch.jump.coords())
        if (static_cast<size_t>(j) < out.size()) out[static_cast<size_t>(j)] += ch.constant * d;
    }
  }

  double lipschitz_bound(double) const override { return 0.0; }

 private:
  double a_value(int64_t i, int64_t j) const {
    double a = 0.0;
    for (const FiniteChannel& ch : p_.channels) {
      int32_t di = ch.jump.delta(i);
      if (di == 0) continue;
      for (const auto& [l, m] : ch.coeffs)
        if (l == j) a += static_cast<double>(di) * m;
    }
    return a;
  }

  bool fits_cap(const SparseVec& x, const JumpVector& jump) const {
    for (const auto& [j, d] : jump.coords()) {
      double next = x.value(j) + d;
      if (next < 0 || next > static_cast<double>(p_.cap)) return false;
    }
    return true;
  }

  MomentConstants build_constants() const {
    // Affine rates over finitely many types: every drift moment is
    // bounded linearly; conservative constants assembled by probing.
    MomentConstants mc;
    mc.k.resize(9);
    double cmax = 0.0, mmax = 0.0;
    for (const FiniteChannel& ch : p_.channels) {
      cmax += ch.constant;
      for (const auto& [j, m] : ch.coeffs) {
        (void)j;
        mmax += m;
      }
    }
    double numax = ws_.nu(p_.n_types - 1 + JumpVector::kCapacity);
    for (int r = 0; r < 9; ++r) {
      double scale = std::pow(numax, r) * static_cast<double>(std::max(jstar_, 1));
      mc.k[r] = {mmax * scale, 0.0, mmax * scale * scale, cmax * scale, cmax * scale * scale};
    }
    mc.p = [](int r) { return std::max(1, r); };
    mc.r_max1 = mc.r_max2 = std::numeric_limits<int32_t>::max();
    mc.r_zeta = 1;
    mc.beta_zeta = 1.0;
    double zmax = ws_.zeta(p_.n_types - 1 + JumpVector::kCapacity);
    mc.k1_zeta = mmax * zmax * static_cast<double>(std::max(jstar_, 1));
    mc.k2_zeta = cmax * zmax * static_cast<double>(std::max(jstar_, 1));
    mc.rho = 2;
    mc.r_mu = 1;
    return mc;
  }

  FiniteModelParams p_;
};

}  // namespace

std::unique_ptr<Model> make_finite_model(const FiniteModelParams& params) {
  return std::make_unique<FiniteModel>(params);
}

std::unique_ptr<Model> make_birth_death(double birth, double death, int64_t cap) {
  FiniteModelParams p;
  p.n_types = 1;
  p.cap = cap;
  if (birth > 0) p.channels.push_back({JumpVector{{0, +1}}, 0.0, {{0, birth}}});
  if (death > 0) p.channels.push_back({JumpVector{{0, -1}}, 0.0, {{0, death}}});
  return make_finite_model(p);
}

}  // namespace popdyn
