#pragma once

#include <unordered_map>
#include <utility>
#include <vector>

#include "unibound/types.hpp"

namespace unibound {

/// Sparse sub-probability vector over population states. Zero entries are
/// never stored; the support is exactly the key set.
class SparseDistribution {
 public:
  using Map = std::unordered_map<StateVec, double, StateVecHash>;

  SparseDistribution() = default;

  static SparseDistribution point_mass(StateVec x) {
    SparseDistribution d;
    d.entries_.emplace(std::move(x), 1.0);
    return d;
  }

  /// Probability of x; 0 when absent.
  double at(const StateVec& x) const {
    auto it = entries_.find(x);
    return it == entries_.end() ? 0.0 : it->second;
  }

  /// Adds p to the entry for x (creates it if needed). Non-positive p with no
  /// existing entry is a no-op, keeping the all-entries-positive invariant.
  void add(const StateVec& x, double p) {
    if (p == 0.0) return;
    entries_[x] += p;
  }

  void set(StateVec x, double p) {
    if (p > 0.0) {
      entries_[std::move(x)] = p;
    } else {
      entries_.erase(x);
    }
  }

  /// Compensated total mass.
  double mass() const {
    NeumaierSum sum;
    for (const auto& [x, p] : entries_) sum.add(p);
    return sum.value();
  }

  /// Removes entries with value < threshold; returns the removed mass.
  double prune(double threshold) {
    NeumaierSum removed;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second < threshold) {
        removed.add(it->second);
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
    return removed.value();
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Map& entries() const { return entries_; }

  /// Entries in lexicographic state order (stable emission order).
  std::vector<std::pair<StateVec, double>> sorted() const;

  /// Copy scaled so the mass is exactly renormalized to 1. Throws on zero mass.
  SparseDistribution normalized() const;

 private:
  Map entries_;
};

}  // namespace unibound
