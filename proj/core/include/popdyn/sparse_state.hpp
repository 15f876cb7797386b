#ifndef POPDYN_SPARSE_STATE_HPP
#define POPDYN_SPARSE_STATE_HPP

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "popdyn/errors.hpp"

namespace popdyn {

// Finitely supported count vector over type indices.  Entries are kept
// sorted by index, stored counts are strictly positive, and the total
// (S0) is cached and updated in exact integer arithmetic.
class SparseState {
 public:
  using Entry = std::pair<int64_t, int64_t>;  // (type index, count)

  SparseState() = default;
  SparseState(std::initializer_list<Entry> init) {
    for (const auto& [j, c] : init) add(j, c);
  }

  int64_t count(int64_t j) const {
    auto it = find(j);
    return it != entries_.end() && it->first == j ? it->second : 0;
  }

  int64_t total() const { return total_; }
  bool empty() const { return entries_.empty(); }
  size_t support_size() const { return entries_.size(); }
  int64_t max_index() const { return entries_.empty() ? -1 : entries_.back().first; }
  const std::vector<Entry>& entries() const { return entries_; }

  void add(int64_t j, int64_t delta) {
    if (delta == 0) return;
    if (j < 0) throw InvalidParam("SparseState: negative type index");
    auto it = lower_bound(j);
    if (it != entries_.end() && it->first == j) {
      int64_t next = it->second + delta;
      if (next < 0) throw NegativeCount("SparseState: count would go negative");
      if (next == 0) {
        entries_.erase(it);
      } else {
        it->second = next;
      }
    } else {
      if (delta < 0) throw NegativeCount("SparseState: count would go negative");
      entries_.insert(it, {j, delta});
    }
    total_ += delta;
  }

  void set(int64_t j, int64_t c) { add(j, c - count(j)); }

  void clear() {
    entries_.clear();
    total_ = 0;
  }

  bool operator==(const SparseState& o) const = default;

 private:
  std::vector<Entry>::const_iterator find(int64_t j) const {
    return std::lower_bound(entries_.begin(), entries_.end(), j,
                            [](const Entry& e, int64_t k) { return e.first < k; });
  }
  std::vector<Entry>::iterator lower_bound(int64_t j) {
    return std::lower_bound(entries_.begin(), entries_.end(), j,
                            [](const Entry& e, int64_t k) { return e.first < k; });
  }

  std::vector<Entry> entries_;
  int64_t total_ = 0;
};

// Finitely supported real vector; used for scaled states x = X/N and
// arbitrary test vectors.  Exact zeros are not stored.
class SparseVec {
 public:
  using Entry = std::pair<int64_t, double>;

  SparseVec() = default;
  SparseVec(std::initializer_list<Entry> init) {
    for (const auto& [j, v] : init) set(j, v);
  }

  double value(int64_t j) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), j,
                               [](const Entry& e, int64_t k) { return e.first < k; });
    return it != entries_.end() && it->first == j ? it->second : 0.0;
  }

  void set(int64_t j, double v) {
    if (j < 0) throw InvalidParam("SparseVec: negative type index");
    auto it = std::lower_bound(entries_.begin(), entries_.end(), j,
                               [](const Entry& e, int64_t k) { return e.first < k; });
    if (it != entries_.end() && it->first == j) {
      if (v == 0.0) {
        entries_.erase(it);
      } else {
        it->second = v;
      }
    } else if (v != 0.0) {
      entries_.insert(it, {j, v});
    }
  }

  bool empty() const { return entries_.empty(); }
  size_t support_size() const { return entries_.size(); }
  int64_t max_index() const { return entries_.empty() ? -1 : entries_.back().first; }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

// x = X / N, each component an exact product count * (1/N).
inline SparseVec scaled(const SparseState& state, double inv_n) {
  SparseVec x;
  for (const auto& [j, c] : state.entries()) x.set(j, static_cast<double>(c) * inv_n);
  return x;
}

}  // namespace popdyn

#endif
