#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "fisherlab/errors.hpp"
#include "fisherlab/market.hpp"

namespace fisherlab {

// How a buyer resolves ties between equally attractive goods.
enum class TieRule { LowestIndex, UniformSplit };

inline constexpr double kTieRelTol = 1e-12;

// Indices attaining max_j u_j / p_j within a relative tolerance.
// The choice set is invariant to rescaling u or p, so only ratios matter.
inline std::vector<std::size_t> bang_per_buck_set(const std::vector<double>& u,
                                                  const PriceVector& p,
                                                  double rtol = kTieRelTol) {
  if (u.size() != p.size()) throw std::invalid_argument("utility/price length mismatch");
  for (double pj : p)
    if (!(pj > 0.0)) throw NonpositivePriceError("bang_per_buck_set: price must be positive");
  double best = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) best = std::max(best, u[j] / p[j]);
  if (!(best > 0.0)) throw ZeroUtilityError("bang_per_buck_set: all utilities are zero");

  std::vector<std::size_t> set;
  const double cutoff = best * (1.0 - rtol);
  for (std::size_t j = 0; j < u.size(); ++j)
    if (u[j] / p[j] >= cutoff) set.push_back(j);
  return set;
}

// Solution of the buyer's problem: spend the whole budget on bang-per-buck
// maximizers. p.x = w holds exactly.
inline Allocation optimal_bundle(const BuyerProfile& b, const PriceVector& p, TieRule rule,
                                 double rtol = kTieRelTol) {
  const std::vector<std::size_t> set = bang_per_buck_set(b.utilities, p, rtol);
  Allocation x(p.size(), 0.0);
  if (rule == TieRule::LowestIndex) {
    const std::size_t j = set.front();
    x[j] = b.budget / p[j];
  } else {
    const double share = b.budget / static_cast<double>(set.size());
    for (std::size_t j : set) x[j] = share / p[j];
  }
  return x;
}

// w / min_j (p_j / u_j): the utility of any optimal bundle.
inline double indirect_utility(const BuyerProfile& b, const PriceVector& p) {
  if (b.utilities.size() != p.size()) throw std::invalid_argument("utility/price length mismatch");
  for (double pj : p)
    if (!(pj > 0.0)) throw NonpositivePriceError("indirect_utility: price must be positive");
  double best = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) best = std::max(best, b.utilities[j] / p[j]);
  if (!(best > 0.0)) throw ZeroUtilityError("indirect_utility: all utilities are zero");
  return b.budget * best;
}

}  // namespace fisherlab
