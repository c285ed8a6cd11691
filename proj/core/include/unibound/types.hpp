#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace unibound {

/// Population counts are signed to make change-vector arithmetic safe.
using Count = std::int64_t;

/// A population state: one count per species.
using StateVec = std::vector<Count>;

/// Library-wide exception type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Hash for StateVec (splitmix64-style mixing per coordinate).
struct StateVecHash {
  std::size_t operator()(const StateVec& x) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ (x.size() * 0xbf58476d1ce4e5b9ull);
    for (Count c : x) {
      std::uint64_t z = h + 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(c);
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      h = z ^ (z >> 31);
    }
    return static_cast<std::size_t>(h);
  }
};

inline bool lex_less(const StateVec& a, const StateVec& b) {
  return a < b;  // std::vector compares lexicographically
}

/// Neumaier-compensated accumulator: exact enough to sum millions of terms
/// without visible drift in loss bookkeeping.
template <typename T>
class NeumaierSumT {
 public:
  void add(T value) {
    const T t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }

  T value() const { return sum_ + comp_; }

 private:
  T sum_ = 0;
  T comp_ = 0;
};

using NeumaierSum = NeumaierSumT<double>;

}  // namespace unibound
