#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fisherlab {

using PriceVector = std::vector<double>;
using Allocation = std::vector<double>;

// One arriving user: a currency budget and a per-good utility rate.
struct BuyerProfile {
  double budget = 0.0;
  std::vector<double> utilities;

  bool operator==(const BuyerProfile&) const = default;
};

// A realized market: m goods with capacities, n buyers.
// per-user capacity d_j = c_j / n.
struct MarketInstance {
  std::size_t good_count = 0;
  std::size_t user_count = 0;
  std::vector<double> capacities;
  std::vector<BuyerProfile> buyers;

  std::vector<double> per_user_capacity() const {
    std::vector<double> d(capacities);
    for (double& v : d) v /= static_cast<double>(user_count);
    return d;
  }
};

inline MarketInstance make_instance(std::vector<double> capacities,
                                    std::vector<BuyerProfile> buyers) {
  MarketInstance inst;
  inst.good_count = capacities.size();
  inst.user_count = buyers.size();
  if (inst.good_count == 0) throw std::invalid_argument("instance needs at least one good");
  if (inst.user_count == 0) throw std::invalid_argument("instance needs at least one buyer");
  for (std::size_t j = 0; j < capacities.size(); ++j) {
    if (!(capacities[j] > 0.0))
      throw std::invalid_argument("capacity " + std::to_string(j) + " must be positive");
  }
  for (std::size_t t = 0; t < buyers.size(); ++t) {
    if (buyers[t].utilities.size() != inst.good_count)
      throw std::invalid_argument("buyer " + std::to_string(t) + " utility length mismatch");
    if (!(buyers[t].budget > 0.0))
      throw std::invalid_argument("buyer " + std::to_string(t) + " budget must be positive");
    for (double u : buyers[t].utilities)
      if (u < 0.0)
        throw std::invalid_argument("buyer " + std::to_string(t) + " has negative utility");
  }
  inst.capacities = std::move(capacities);
  inst.buyers = std::move(buyers);
  return inst;
}

enum class CheckLevel { Assumption1, Assumption3, Both };

struct Violation {
  enum Kind { UnsupportedGood, ZeroUtilityEntry, NonpositiveBudget, DegenerateBuyer } kind;
  std::size_t index = 0;                                    // good or buyer index
  std::size_t sub = std::numeric_limits<std::size_t>::max();  // good index for ZeroUtilityEntry
};

struct ValidationReport {
  std::vector<bool> good_has_demand;         // some buyer with u_tj > 0
  std::vector<bool> buyer_strictly_positive; // w_t > 0 and min_j u_tj > 0
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

// Never throws: degeneracies are reported, not raised, so generators can resample.
inline ValidationReport validate_instance(const MarketInstance& inst, CheckLevel level) {
  ValidationReport rep;
  const bool a1 = level != CheckLevel::Assumption3;
  const bool a3 = level != CheckLevel::Assumption1;

  rep.good_has_demand.assign(inst.good_count, false);
  for (const BuyerProfile& b : inst.buyers)
    for (std::size_t j = 0; j < inst.good_count; ++j)
      if (b.utilities[j] > 0.0) rep.good_has_demand[j] = true;
  if (a1)
    for (std::size_t j = 0; j < inst.good_count; ++j)
      if (!rep.good_has_demand[j]) rep.violations.push_back({Violation::UnsupportedGood, j});

  rep.buyer_strictly_positive.assign(inst.user_count, true);
  for (std::size_t t = 0; t < inst.user_count; ++t) {
    const BuyerProfile& b = inst.buyers[t];
    bool any_positive = false;
    for (std::size_t j = 0; j < inst.good_count; ++j) {
      if (b.utilities[j] > 0.0) {
        any_positive = true;
      } else {
        rep.buyer_strictly_positive[t] = false;
        if (a3) rep.violations.push_back({Violation::ZeroUtilityEntry, t, j});
      }
    }
    if (!(b.budget > 0.0)) {
      rep.buyer_strictly_positive[t] = false;
      if (a3) rep.violations.push_back({Violation::NonpositiveBudget, t});
    }
    if (!any_positive) rep.violations.push_back({Violation::DegenerateBuyer, t});
  }
  return rep;
}

// Rescale to unit capacities: x'_tj = x_tj / c_j, u'_tj = u_tj * c_j.
// The EG objective value is unchanged and dual prices map back as p_j = p'_j / c_j.
inline MarketInstance normalize_capacities(const MarketInstance& inst) {
  MarketInstance out = inst;
  for (std::size_t j = 0; j < inst.good_count; ++j) {
    const double c = inst.capacities[j];
    out.capacities[j] = 1.0;
    for (std::size_t t = 0; t < inst.user_count; ++t)
      out.buyers[t].utilities[j] = inst.buyers[t].utilities[j] * c;
  }
  return out;
}

inline PriceVector prices_to_original(const PriceVector& normalized_prices,
                                      const std::vector<double>& original_capacities) {
  if (normalized_prices.size() != original_capacities.size())
    throw std::invalid_argument("price/capacity length mismatch");
  PriceVector p(normalized_prices);
  for (std::size_t j = 0; j < p.size(); ++j) p[j] /= original_capacities[j];
  return p;
}

}  // namespace fisherlab
