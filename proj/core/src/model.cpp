#include "popdyn/model.hpp"

#include <cmath>

#include "popdyn/moments.hpp"

namespace popdyn {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int64_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int64_t p = rowptr[i]; p < rowptr[i + 1]; ++p) acc += val[p] * x[col[p]];
    y[i] = acc;
  }
}

CsrMatrix truncated_a(const Model& model, int64_t K) {
  CsrMatrix m;
  m.rows = m.cols = K + 1;
  m.rowptr.assign(K + 2, 0);
  for (int64_t i = 0; i <= K; ++i) {
    for (int64_t j = 0; j <= K; ++j) {
      double v = model.a_entry(i, j);
      if (v != 0.0) {
        m.col.push_back(static_cast<int32_t>(j));
        m.val.push_back(v);
      }
    }
    m.rowptr[i + 1] = static_cast<int64_t>(m.col.size());
  }
  return m;
}

std::vector<double> drift_total(const Model& model, const SparseVec& x, int64_t K) {
  std::vector<Channel> chans;
  model.active_channels(x, chans);
  std::vector<double> out(static_cast<size_t>(K + 1), 0.0);
  for (const Channel& c : chans) {
    if (!std::isfinite(c.rate)) throw NonFiniteRate("non-finite channel rate");
    for (const auto& [j, d] : c.jump.coords()) {
      if (j <= K) out[static_cast<size_t>(j)] += c.rate * static_cast<double>(d);
    }
  }
  return out;
}

double drift_split_residual(const Model& model, const SparseVec& x, int64_t K) {
  std::vector<double> dense(static_cast<size_t>(K + 1), 0.0);
  for (const auto& [j, v] : x.entries()) {
    if (j <= K) dense[static_cast<size_t>(j)] = v;
  }
  CsrMatrix a = truncated_a(model, K);
  std::vector<double> ax(dense.size(), 0.0), f(dense.size(), 0.0);
  a.multiply(dense, ax);
  model.f_eval(dense, f);
  std::vector<double> total = drift_total(model, x, K);

  const WeightSystem& ws = model.weights();
  int64_t interior = K - model.jstar();
  double res = 0.0;
  for (int64_t i = 0; i <= interior; ++i) {
    size_t u = static_cast<size_t>(i);
    res += ws.mu(i) * std::abs(total[u] - (ax[u] + f[u]));
  }
  return res;
}

}  // namespace popdyn
