#ifndef POPDYN_MODEL_HPP
#define POPDYN_MODEL_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "popdyn/sparse_state.hpp"
#include "popdyn/weights.hpp"

namespace popdyn {

// Net state change of one event.  At most kCapacity coordinates may be
// touched; entries are kept sorted by index and merged, deltas nonzero.
class JumpVector {
 public:
  static constexpr int kCapacity = 8;

  JumpVector() = default;
  JumpVector(std::initializer_list<std::pair<int64_t, int32_t>> init) {
    for (const auto& [j, d] : init) add(j, d);
  }

  void add(int64_t j, int32_t delta) {
    if (delta == 0) return;
    int pos = 0;
    while (pos < n_ && coords_[pos].first < j) ++pos;
    if (pos < n_ && coords_[pos].first == j) {
      coords_[pos].second += delta;
      if (coords_[pos].second == 0) {
        for (int k = pos; k + 1 < n_; ++k) coords_[k] = coords_[k + 1];
        --n_;
      }
      return;
    }
    if (n_ == kCapacity) throw InvalidParam("JumpVector: too many coordinates");
    for (int k = n_; k > pos; --k) coords_[k] = coords_[k - 1];
    coords_[pos] = {j, delta};
    ++n_;
  }

  int size() const { return n_; }
  bool null() const { return n_ == 0; }
  std::span<const std::pair<int64_t, int32_t>> coords() const { return {coords_.data(), static_cast<size_t>(n_)}; }

  int64_t l1() const {
    int64_t s = 0;
    for (int i = 0; i < n_; ++i) s += std::abs(static_cast<int64_t>(coords_[i].second));
    return s;
  }
  int64_t coordinate_sum() const {
    int64_t s = 0;
    for (int i = 0; i < n_; ++i) s += coords_[i].second;
    return s;
  }
  int32_t min_delta() const {
    int32_t m = 0;
    for (int i = 0; i < n_; ++i) m = std::min(m, coords_[i].second);
    return m;
  }
  int32_t delta(int64_t j) const {
    for (int i = 0; i < n_; ++i)
      if (coords_[i].first == j) return coords_[i].second;
    return 0;
  }
  int64_t max_index() const { return n_ == 0 ? -1 : coords_[n_ - 1].first; }

  bool operator==(const JumpVector& o) const {
    if (n_ != o.n_) return false;
    for (int i = 0; i < n_; ++i)
      if (coords_[i] != o.coords_[i]) return false;
    return true;
  }

 private:
  std::array<std::pair<int64_t, int32_t>, kCapacity> coords_{};
  int n_ = 0;
};

// A jump channel materialized at a state: the net jump and its rate
// alpha_J(x) there.  Enumerators only emit channels with positive rate.
struct Channel {
  JumpVector jump;
  double rate = 0.0;
};

// A population model: jump-channel enumerator plus the drift split
// F0(x) = A x + F(x), the weight system, and the growth constants.
class Model {
 public:
  virtual ~Model() = default;

  const std::string& name() const { return name_; }
  int jstar() const { return jstar_; }
  // Smallest jump entry any channel of this model may carry (-1 unless
  // the model declares pair-interaction transitions).
  int min_jump_entry() const { return min_jump_entry_; }
  // True when every jump has coordinate sum zero, so S0 is conserved.
  bool conserves_total() const { return conserves_total_; }
  const WeightSystem& weights() const { return ws_; }
  const MomentConstants& moments() const { return mc_; }

  // Channels with rate > 0 at x, in a deterministic order.  Appends to out.
  virtual void active_channels(const SparseVec& x, std::vector<Channel>& out) const = 0;

  // Entry A_{ij} of the linear drift part, (Ax)_i = sum_j A_{ij} x^j.
  virtual double a_entry(int64_t i, int64_t j) const = 0;
  double a_diag(int64_t i) const { return a_entry(i, i); }

  // F evaluated on the dense section 0..out.size()-1.
  virtual void f_eval(std::span<const double> x, std::span<double> out) const = 0;

  // Local Lipschitz bound K(mu, F; z) of F on the mu-ball of radius z.
  virtual double lipschitz_bound(double z) const = 0;

 protected:
  std::string name_;
  int jstar_ = 0;
  int min_jump_entry_ = -1;
  bool conserves_total_ = false;
  WeightSystem ws_;
  MomentConstants mc_;
};

// Dense CSR section of A over 0..K, assembled by probing a_entry.
struct CsrMatrix {
  int64_t rows = 0, cols = 0;
  std::vector<int64_t> rowptr;
  std::vector<int32_t> col;
  std::vector<double> val;

  void multiply(std::span<const double> x, std::span<double> y) const;
};

CsrMatrix truncated_a(const Model& model, int64_t K);

// F0(x) = sum over active channels of rate * J, on the dense section 0..K.
std::vector<double> drift_total(const Model& model, const SparseVec& x, int64_t K);

// || drift_total(x) - (Ax + F(x)) ||_mu restricted to 0..K-jstar, the
// interior components unaffected by the truncation boundary.
double drift_split_residual(const Model& model, const SparseVec& x, int64_t K);

}  // namespace popdyn

#endif
