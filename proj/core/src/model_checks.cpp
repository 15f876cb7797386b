#include "popdyn/model_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "popdyn/moments.hpp"

namespace popdyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string CheckReport::to_string() const {
  std::ostringstream os;
  for (const CheckRow& r : rows) {
    os << (r.pass ? "[pass] " : "[FAIL] ") << r.name << "  margin=" << fmt(r.margin);
    if (!r.detail.empty()) os << "  (" << r.detail << ")";
    os << "\n";
  }
  return os.str();
}

SparseState random_profile_state(int64_t units, double q, CounterRng& rng) {
  SparseState x;
  for (int64_t u = 0; u < units; ++u) {
    // geometric(q) class: P[j] = (1-q) q^j
    int64_t j = 0;
    while (rng.next_unit() < q && j < 512) ++j;
    x.add(j, 1);
  }
  return x;
}

std::vector<SparseState> sample_states(const Model& model, int64_t n_scale, size_t count,
                                       uint64_t seed) {
  std::vector<SparseState> out;
  out.reserve(count);
  const bool fixed_total = model.conserves_total();
  for (size_t s = 0; s < count; ++s) {
    CounterRng rng(seed, 0xC0FFEEull + s);
    double q = 0.2 + 0.5 * rng.next_unit();
    int64_t units = n_scale;
    if (!fixed_total) {
      units = n_scale / 2 + static_cast<int64_t>(rng.next_unit() * 1.5 * static_cast<double>(n_scale));
      units = std::max<int64_t>(1, units);
    }
    out.push_back(random_profile_state(units, q, rng));
  }
  return out;
}

CheckReport check_model_assumptions(const Model& model, const std::vector<SparseState>& states,
                                    int64_t n_scale, const std::vector<int>& r_list) {
  if (states.empty()) throw InvalidParam("check_model_assumptions: no states");
  if (n_scale < 1) throw InvalidParam("check_model_assumptions: n_scale must be >= 1");
  const WeightSystem& ws = model.weights();
  const MomentConstants& mc = model.moments();
  CheckReport rep;

  // weight functions behave on the probe grid
  {
    CheckRow row{"weights", true, 0.0, ""};
    try {
      validate_weights(ws);
    } catch (const Error& e) {
      row.pass = false;
      row.detail = e.what();
    }
    rep.rows.push_back(row);
  }

  for (int r : r_list) {
    if (!mc.has(r))
      throw ConstantMissing("moment constants missing for r=" + std::to_string(r));
  }

  double worst_influence = kInf;          // jstar - sum|J|
  double worst_entry = kInf;              // min delta - declared bound
  double worst_boundary = kInf;           // min occupied mass on exit coords
  bool feasible = true;
  std::vector<double> worst_u(r_list.size(), kInf), worst_v(r_list.size(), kInf);
  double worst_zeta = kInf;

  const double inv_n = 1.0 / static_cast<double>(n_scale);
  std::vector<Channel> chans;
  for (const SparseState& state : states) {
    SparseVec x = scaled(state, inv_n);
    chans.clear();
    model.active_channels(x, chans);

    double zeta_sum = 0.0;
    for (const Channel& c : chans) {
      if (!std::isfinite(c.rate)) throw NonFiniteRate("non-finite channel rate in check");
      worst_influence = std::min(worst_influence, static_cast<double>(model.jstar() - c.jump.l1()));
      worst_entry = std::min(worst_entry,
                             static_cast<double>(c.jump.min_delta() - model.min_jump_entry()));
      for (const auto& [j, d] : c.jump.coords()) {
        if (d < 0) {
          worst_boundary = std::min(worst_boundary, x.value(j));
          if (x.value(j) <= 0.0) feasible = false;
        }
      }
      zeta_sum += c.rate * zeta_weight(c.jump, ws);
    }

    double s0 = moment_s(x, ws, 0);
    for (size_t ri = 0; ri < r_list.size(); ++ri) {
      int r = r_list[ri];
      const auto& k = mc.at(r);
      double sr = moment_s(x, ws, r);
      double u = moment_u(x, model, r);
      double v = moment_v(x, model, r);
      double ubound = r <= 1 ? k[0] * sr + k[3] : (k[0] + k[1] * s0) * sr + k[3];
      double vref = r == 0 ? moment_s(x, ws, 1) : moment_s(x, ws, mc.p(r));
      double vbound = k[2] * vref + k[4];
      double uscale = std::max(1.0, std::abs(ubound));
      double vscale = std::max(1.0, vbound);
      worst_u[ri] = std::min(worst_u[ri], (ubound - u) / uscale);
      worst_v[ri] = std::min(worst_v[ri], (vbound - v) / vscale);
    }

    double sz = moment_s(x, ws, mc.r_zeta);
    double zbound = std::pow(mc.k1_zeta * sz + mc.k2_zeta, mc.beta_zeta);
    worst_zeta = std::min(worst_zeta, (zbound - zeta_sum) / std::max(1.0, zbound));
  }

  rep.rows.push_back({"jump_influence_bound", worst_influence >= 0, worst_influence,
                      "sum|J| <= " + std::to_string(model.jstar())});
  rep.rows.push_back({"jump_lower_bound", worst_entry >= 0, worst_entry,
                      "declared min entry " + std::to_string(model.min_jump_entry())});
  rep.rows.push_back({"boundary_rule", feasible, worst_boundary,
                      "active exit coordinates are occupied"});
  for (size_t ri = 0; ri < r_list.size(); ++ri) {
    rep.rows.push_back({"drift_moment_bound_r" + std::to_string(r_list[ri]),
                        worst_u[ri] >= 0, worst_u[ri], ""});
    rep.rows.push_back({"variance_moment_bound_r" + std::to_string(r_list[ri]),
                        worst_v[ri] >= 0, worst_v[ri], ""});
  }
  rep.rows.push_back({"zeta_growth_bound", worst_zeta >= 0, worst_zeta,
                      "r_zeta=" + std::to_string(mc.r_zeta)});

  // tilting series sum_k mu(k)(|A_kk|+1)/sqrt(zeta(k)): terms must decay
  // like a summable power law along the probe grid
  {
    double prev = kInf;
    double margin = kInf;
    double partial = 0.0;
    for (int64_t k = 0; k <= (1 << 20); k = k < 16 ? k + 1 : k * 2) {
      double term = ws.mu(k) * (std::abs(model.a_diag(k)) + 1.0) / std::sqrt(ws.zeta(k));
      if (k <= 16) partial += term;
      double graded = term * std::pow(static_cast<double>(k + 1), 1.05);
      if (k >= 64) margin = std::min(margin, prev - graded);
      if (k >= 16) prev = graded;
    }
    rep.rows.push_back({"tilting_series_summable", margin >= 0, margin,
                        "partial sum(k<=16)=" + fmt(partial)});
  }

  // column drift condition (A^T mu)_i <= w mu(i) on a probe section
  {
    const int64_t probe = 512;
    double margin = kInf;
    for (int64_t i = 0; i <= probe; ++i) {
      double colsum = 0.0;
      for (int64_t r = 0; r <= probe + 8; ++r) colsum += model.a_entry(r, i) * ws.mu(r);
      margin = std::min(margin, (ws.w * ws.mu(i) - colsum) / std::max(1.0, std::abs(ws.w * ws.mu(i))));
    }
    rep.rows.push_back({"drift_condition_columns", margin >= -1e-12, margin,
                        "A^T mu <= w mu, i <= 512"});
  }

  return rep;
}

}  // namespace popdyn
