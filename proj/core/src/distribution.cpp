#include "unibound/distribution.hpp"

#include <algorithm>

namespace unibound {

std::vector<std::pair<StateVec, double>> SparseDistribution::sorted() const {
  std::vector<std::pair<StateVec, double>> out(entries_.begin(), entries_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return lex_less(a.first, b.first); });
  return out;
}

SparseDistribution SparseDistribution::normalized() const {
  const double m = mass();
  if (!(m > 0.0)) throw Error("distribution: cannot normalize zero mass");
  SparseDistribution out;
  for (const auto& [x, p] : entries_) out.add(x, p / m);
  return out;
}

}  // namespace unibound
