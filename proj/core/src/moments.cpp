#include "popdyn/moments.hpp"

#include <cmath>

#include "popdyn/errors.hpp"

namespace popdyn {

double mu_norm(const SparseVec& x, const WeightSystem& ws) {
  double s = 0.0;
  for (const auto& [j, v] : x.entries()) s += ws.mu(j) * std::abs(v);
  return s;
}

double mu_norm(const SparseState& x, const WeightSystem& ws) {
  double s = 0.0;
  for (const auto& [j, c] : x.entries()) s += ws.mu(j) * static_cast<double>(c);
  return s;
}

double mu_norm(std::span<const double> x, const WeightSystem& ws) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += ws.mu(static_cast<int64_t>(i)) * std::abs(x[i]);
  return s;
}

double moment_s(const SparseState& x, const WeightSystem& ws, int r) {
  if (r < 0) throw InvalidParam("moment_s: r must be nonnegative");
  if (r == 0) return static_cast<double>(x.total());
  double s = 0.0;
  for (const auto& [j, c] : x.entries()) s += ws.nu_pow(j, r) * static_cast<double>(c);
  return s;
}

double moment_s(const SparseVec& x, const WeightSystem& ws, int r) {
  if (r < 0) throw InvalidParam("moment_s: r must be nonnegative");
  double s = 0.0;
  for (const auto& [j, v] : x.entries()) s += ws.nu_pow(j, r) * v;
  return s;
}

double zeta_weight(const JumpVector& j, const WeightSystem& ws) {
  double s = 0.0;
  for (const auto& [idx, d] : j.coords()) s += std::abs(static_cast<double>(d)) * ws.zeta(idx);
  return s;
}

double jump_increment(const JumpVector& j, const WeightSystem& ws, int r) {
  double s = 0.0;
  for (const auto& [idx, d] : j.coords()) s += static_cast<double>(d) * ws.nu_pow(idx, r);
  return s;
}

namespace {

template <typename Fn>
double channel_sum(const SparseVec& x, const Model& model, Fn term) {
  std::vector<Channel> chans;
  model.active_channels(x, chans);
  double s = 0.0;
  for (const Channel& c : chans) {
    if (!std::isfinite(c.rate)) throw NonFiniteRate("non-finite channel rate");
    s += term(c);
  }
  return s;
}

}  // namespace

double moment_u(const SparseVec& x, const Model& model, int r) {
  const WeightSystem& ws = model.weights();
  return channel_sum(x, model, [&](const Channel& c) { return c.rate * jump_increment(c.jump, ws, r); });
}

double moment_v(const SparseVec& x, const Model& model, int r) {
  const WeightSystem& ws = model.weights();
  return channel_sum(x, model, [&](const Channel& c) {
    double inc = jump_increment(c.jump, ws, r);
    return c.rate * inc * inc;
  });
}

}  // namespace popdyn
