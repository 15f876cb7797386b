#include "popdyn/models/kretzschmar.hpp"

#include <cmath>
#include <limits>

#include "popdyn/errors.hpp"

namespace popdyn {

namespace {

class KretzschmarModel final : public Model {
 public:
  explicit KretzschmarModel(const KretzschmarParams& p) : p_(p) {
    if (p.c <= 0) throw InvalidParam("kretzschmar: c must be > 0");
    if (p.theta < 0 || p.theta > 1) throw InvalidParam("kretzschmar: theta must be in [0,1]");
    for (double v : {p.mu_d, p.kappa, p.alpha, p.beta, p.lambda})
      if (!(v >= 0) || !std::isfinite(v)) throw InvalidParam("kretzschmar: rates must be nonnegative finite");

    name_ = "kretzschmar";
    jstar_ = 2;
    min_jump_entry_ = -1;
    ws_ = power_weights(std::max(0.0, p.beta - p.kappa));
    mc_ = build_constants(p);

    theta_pow_.resize(kThetaCache);
    double t = 1.0;
    for (int i = 0; i < kThetaCache; ++i) {
      theta_pow_[i] = t;
      t *= p.theta;
    }
  }

  void active_channels(const SparseVec& x, std::vector<Channel>& out) const override {
    double m1 = 0.0, m11 = 0.0, birth = 0.0;
    for (const auto& [i, xi] : x.entries()) {
      m1 += xi;
      m11 += static_cast<double>(i) * xi;
      birth += theta_pow(i) * xi;
    }
    birth *= p_.beta;
    if (birth > 0) out.push_back({JumpVector{{0, +1}}, birth});

    const double phi = m11 > 0 ? m11 / (p_.c + m1) : 0.0;
    for (const auto& [i, xi] : x.entries()) {
      if (i >= 1) {
        double r = static_cast<double>(i) * p_.mu_d * xi;
        if (r > 0) out.push_back({JumpVector{{i - 1, +1}, {i, -1}}, r});
      }
      double death = (p_.kappa + static_cast<double>(i) * p_.alpha) * xi;
      if (death > 0) out.push_back({JumpVector{{i, -1}}, death});
      double infect = p_.lambda * xi * phi;
      if (infect > 0) out.push_back({JumpVector{{i + 1, +1}, {i, -1}}, infect});
    }
  }

  double a_entry(int64_t i, int64_t j) const override {
    if (i == 0) {
      if (j == 0) return p_.beta - p_.kappa;
      if (j == 1) return p_.mu_d + p_.beta * p_.theta;
      return p_.beta * theta_pow(j);
    }
    if (j == i) return -(p_.kappa + static_cast<double>(i) * (p_.alpha + p_.mu_d));
    if (j == i + 1) return static_cast<double>(i + 1) * p_.mu_d;
    return 0.0;
  }

  void f_eval(std::span<const double> x, std::span<double> out) const override {
    double m1 = 0.0, m11 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      m1 += x[i];
      m11 += static_cast<double>(i) * x[i];
    }
    const double phi = m11 != 0.0 ? m11 / (p_.c + m1) : 0.0;
    out[0] = -p_.lambda * x[0] * phi;
    for (size_t i = 1; i < out.size(); ++i)
      out[i] = p_.lambda * (x[i - 1] - (i < x.size() ? x[i] : 0.0)) * phi;
  }

  double lipschitz_bound(double z) const override {
    return p_.lambda * z * (2.0 * p_.c + z) / (p_.c * p_.c);
  }

 private:
  static constexpr int kThetaCache = 4096;

  double theta_pow(int64_t i) const {
    if (i < kThetaCache) return theta_pow_[static_cast<size_t>(i)];
    return std::pow(p_.theta, static_cast<double>(i));
  }

  static MomentConstants build_constants(const KretzschmarParams& p) {
    MomentConstants mc;
    mc.k.resize(25);
    mc.k[0] = {p.beta, 0.0, p.kappa + p.beta + p.alpha, 0.0, 0.0};
    for (int r = 1; r < 25; ++r) {
      double rr = static_cast<double>(r);
      double two_rm1 = std::ldexp(1.0, r - 1);        // 2^(r-1)
      double two_2rm1 = std::ldexp(1.0, 2 * (r - 1)); // 2^(2(r-1))
      mc.k[r] = {p.beta + rr * two_rm1 * p.lambda,
                 0.0,
                 p.beta + rr * rr * (p.kappa + p.alpha + p.mu_d + two_2rm1 * p.lambda),
                 0.0,
                 0.0};
    }
    mc.p = [](int r) { return r <= 0 ? 1 : 2 * r + 1; };
    mc.r_max1 = mc.r_max2 = std::numeric_limits<int32_t>::max();
    mc.r_zeta = 8;
    mc.beta_zeta = 1.0;
    mc.k1_zeta = 2.0 * p.mu_d + p.kappa + p.alpha + p.beta + 256.0 * p.lambda;
    mc.k2_zeta = 0.0;
    mc.rho = 17;  // max(8, p(8)=17, 2)
    mc.r_mu = 1;
    return mc;
  }

  KretzschmarParams p_;
  std::vector<double> theta_pow_;
};

}  // namespace

std::unique_ptr<Model> make_kretzschmar(const KretzschmarParams& params) {
  return std::make_unique<KretzschmarModel>(params);
}

}  // namespace popdyn
