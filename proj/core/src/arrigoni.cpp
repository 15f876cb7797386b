#include "popdyn/models/arrigoni.hpp"

#include <cmath>
#include <limits>

#include "popdyn/errors.hpp"

namespace popdyn {

namespace {

class ArrigoniModel final : public Model {
 public:
  explicit ArrigoniModel(const ArrigoniParams& p) : p_(p) {
    if (!p.d || !p.b) throw InvalidParam("arrigoni: d and b must be set");
    if (p.rho < 0 || p.rho > 1) throw InvalidParam("arrigoni: rho must be in [0,1]");
    for (double v : {p.gamma, p.kappa, p.sup_b, p.sup_d, p.sup_d_over_i})
      if (!(v >= 0) || !std::isfinite(v)) throw InvalidParam("arrigoni: parameters must be nonnegative finite");

    double w = 0.0;
    for (int64_t i = 1; i <= (1 << 20); i = i < 64 ? i + 1 : i * 2) {
      double di = p.d(i), bi = p.b(i);
      if (di < 0 || bi < 0) throw InvalidParam("arrigoni: d_i, b_i must be nonnegative");
      if (bi > p.sup_b * (1 + 1e-9))
        throw InvalidParam("arrigoni: declared sup_b violated at i=" + std::to_string(i));
      if (di > p.sup_d * (1 + 1e-9))
        throw InvalidParam("arrigoni: declared sup_d violated at i=" + std::to_string(i));
      if (di > p.sup_d_over_i * static_cast<double>(i) * (1 + 1e-9))
        throw InvalidParam("arrigoni: declared sup_d_over_i violated at i=" + std::to_string(i));
      w = std::max(w, bi - di - p.gamma - p.kappa);
    }

    name_ = "arrigoni";
    jstar_ = 4;
    min_jump_entry_ = -2;  // same-size-class migration exits twice from one class
    conserves_total_ = true;
    ws_ = power_weights(std::max(0.0, w));
    mc_ = build_constants(p);
  }

  void active_channels(const SparseVec& x, std::vector<Channel>& out) const override {
    const double rg = p_.rho * p_.gamma;
    for (const auto& [i, xi] : x.entries()) {
      if (i < 1) continue;
      double fi = static_cast<double>(i);
      double leave = fi * xi * (p_.d(i) + p_.gamma * (1.0 - p_.rho) + (i == 1 ? p_.kappa : 0.0));
      if (leave > 0) out.push_back({JumpVector{{i - 1, +1}, {i, -1}}, leave});
      double birth = fi * p_.b(i) * xi;
      if (birth > 0) out.push_back({JumpVector{{i + 1, +1}, {i, -1}}, birth});
      if (i >= 2 && p_.kappa * xi > 0) out.push_back({JumpVector{{0, +1}, {i, -1}}, p_.kappa * xi});
    }
    if (rg <= 0) return;
    for (const auto& [i, xi] : x.entries()) {
      if (i < 1) continue;
      for (const auto& [k, xk] : x.entries()) {
        if (k == i - 1) continue;  // null net jump, invisible in law
        double rate = static_cast<double>(i) * rg * xi * xk;
        if (rate <= 0) continue;
        JumpVector j;
        j.add(k + 1, +1);
        j.add(k, -1);
        j.add(i - 1, +1);
        j.add(i, -1);
        out.push_back({j, rate});
      }
    }
  }

  double a_entry(int64_t i, int64_t j) const override {
    if (i == 0) {
      if (j == 0) return -p_.kappa;
      if (j == 1) return p_.d(1) + p_.gamma;
      return 0.0;
    }
    if (j == i) return -(p_.kappa + static_cast<double>(i) * (p_.b(i) + p_.d(i) + p_.gamma));
    if (j == i + 1) return static_cast<double>(i + 1) * (p_.d(i + 1) + p_.gamma);
    if (j == i - 1) return static_cast<double>(i - 1) * p_.b(i - 1);
    return 0.0;
  }

  void f_eval(std::span<const double> x, std::span<double> out) const override {
    double m11 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) m11 += static_cast<double>(i) * x[i];
    const double rg = p_.rho * p_.gamma * m11;
    out[0] = -rg * x[0] + p_.kappa;
    for (size_t i = 1; i < out.size(); ++i)
      out[i] = rg * (x[i - 1] - (i < x.size() ? x[i] : 0.0));
  }

  double lipschitz_bound(double z) const override { return 3.0 * p_.rho * p_.gamma * z; }

 private:
  static MomentConstants build_constants(const ArrigoniParams& p) {
    MomentConstants mc;
    const double rg = p.rho * p.gamma;
    mc.k.resize(25);
    mc.k[0] = {0.0, 0.0, 0.0, 0.0, 0.0};
    for (int r = 1; r < 25; ++r) {
      double rr = static_cast<double>(r);
      double two_rm1 = std::ldexp(1.0, r - 1);
      double two_2rm1 = std::ldexp(1.0, 2 * (r - 1));
      mc.k[r] = {rr * two_rm1 * (p.sup_b + rg),
                 0.0,
                 p.kappa + rr * rr * (two_2rm1 * (p.sup_b + rg) + p.sup_d_over_i + p.gamma),
                 0.0,
                 0.0};
    }
    mc.p = [](int r) { return r <= 0 ? 1 : 2 * r; };
    mc.r_max1 = mc.r_max2 = std::numeric_limits<int32_t>::max();
    mc.r_zeta = 8;
    mc.beta_zeta = 1.0;
    mc.k1_zeta = 2.0 * (p.sup_d + p.gamma) + 3.0 * p.kappa + 256.0 * p.sup_b + 258.0 * rg;
    mc.k2_zeta = 0.0;
    mc.rho = 16;  // max(8, p(8)=16, 2)
    mc.r_mu = 1;
    return mc;
  }

  ArrigoniParams p_;
};

}  // namespace

std::unique_ptr<Model> make_arrigoni(const ArrigoniParams& params) {
  return std::make_unique<ArrigoniModel>(params);
}

}  // namespace popdyn
