#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "fisherlab/market.hpp"

namespace fisherlab {

// Splitmix-style counter generator. The (seed, stream) pair fully determines
// the output sequence and streams do not interact, so replication k draws the
// same users no matter how many replications run or in what order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(mix(seed) ^ mix(stream + 0x9E3779B97F4A7C15ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution, identical on every platform.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

// Finite support: profile k drawn with probability probs[k].
struct DiscreteSpec {
  std::vector<BuyerProfile> types;
  std::vector<double> probs;
};

// Budget from a finite set, utilities iid Uniform[lo, hi] per good,
// independent of the budget.
struct IndependentUniformSpec {
  std::vector<double> budget_values;
  std::vector<double> budget_probs;
  double utility_lo = 0.0;
  double utility_hi = 0.0;
  std::size_t good_count = 0;
};

struct DistributionSpec {
  std::variant<DiscreteSpec, IndependentUniformSpec> v;

  std::size_t good_count() const {
    if (const auto* d = std::get_if<DiscreteSpec>(&v))
      return d->types.empty() ? 0 : d->types.front().utilities.size();
    return std::get<IndependentUniformSpec>(v).good_count;
  }

  double mean_budget() const {
    double s = 0.0;
    if (const auto* d = std::get_if<DiscreteSpec>(&v)) {
      for (std::size_t k = 0; k < d->types.size(); ++k) s += d->probs[k] * d->types[k].budget;
    } else {
      const auto& u = std::get<IndependentUniformSpec>(v);
      for (std::size_t k = 0; k < u.budget_values.size(); ++k)
        s += u.budget_probs[k] * u.budget_values[k];
    }
    return s;
  }
};

inline void check_probs_sum(const std::vector<double>& probs, const char* field) {
  double s = 0.0;
  for (double q : probs) {
    if (q < 0.0) throw std::invalid_argument(std::string(field) + ": negative probability");
    s += q;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(field) + ": probabilities must sum to 1");
}

inline void validate_spec(const DistributionSpec& spec) {
  if (const auto* d = std::get_if<DiscreteSpec>(&spec.v)) {
    if (d->types.empty()) throw std::invalid_argument("types: empty support");
    if (d->types.size() != d->probs.size())
      throw std::invalid_argument("probs: length mismatch with types");
    check_probs_sum(d->probs, "probs");
    const std::size_t m = d->types.front().utilities.size();
    for (const auto& t : d->types) {
      if (t.utilities.size() != m) throw std::invalid_argument("types: utility length mismatch");
      if (!(t.budget > 0.0)) throw std::invalid_argument("types: budget must be positive");
      for (double u : t.utilities)
        if (u < 0.0) throw std::invalid_argument("types: negative utility");
    }
  } else {
    const auto& u = std::get<IndependentUniformSpec>(spec.v);
    if (u.budget_values.empty()) throw std::invalid_argument("budget_values: empty support");
    if (u.budget_values.size() != u.budget_probs.size())
      throw std::invalid_argument("budget_probs: length mismatch with budget_values");
    check_probs_sum(u.budget_probs, "budget_probs");
    for (double b : u.budget_values)
      if (!(b > 0.0)) throw std::invalid_argument("budget_values: budgets must be positive");
    if (u.utility_lo < 0.0 || u.utility_hi < u.utility_lo)
      throw std::invalid_argument("utility_range: need 0 <= lo <= hi");
    if (u.good_count == 0) throw std::invalid_argument("m: need at least one good");
  }
}

namespace detail {
// CDF inversion; the final bucket absorbs rounding slack.
inline std::size_t pick_index(const std::vector<double>& probs, double unit) {
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    cum += probs[k];
    if (unit < cum) return k;
  }
  return probs.size() - 1;
}
}  // namespace detail

inline BuyerProfile sample_user(const DistributionSpec& spec, RngStream& rng) {
  if (const auto* d = std::get_if<DiscreteSpec>(&spec.v))
    return d->types[detail::pick_index(d->probs, rng.next_unit())];
  const auto& u = std::get<IndependentUniformSpec>(spec.v);
  BuyerProfile b;
  b.budget = u.budget_values[detail::pick_index(u.budget_probs, rng.next_unit())];
  b.utilities.resize(u.good_count);
  for (std::size_t j = 0; j < u.good_count; ++j)
    b.utilities[j] = u.utility_lo + (u.utility_hi - u.utility_lo) * rng.next_unit();
  return b;
}

// Two equally likely unit-budget types that each want one of two goods.
// epsilon > 0 gives the strictly-positive variant (1,eps)/(eps,1).
inline DistributionSpec counterexample_spec(double epsilon = 0.0) {
  DiscreteSpec d;
  d.types = {BuyerProfile{1.0, {1.0, epsilon}}, BuyerProfile{1.0, {epsilon, 1.0}}};
  d.probs = {0.5, 0.5};
  return DistributionSpec{d};
}

// Five goods at ten units per user; budgets 2/5/10 with equal odds and
// utilities iid Uniform[5, 10].
inline DistributionSpec f2_benchmark_spec() {
  IndependentUniformSpec u;
  u.budget_values = {2.0, 5.0, 10.0};
  u.budget_probs = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  u.utility_lo = 5.0;
  u.utility_hi = 10.0;
  u.good_count = 5;
  return DistributionSpec{u};
}

inline std::vector<double> default_per_user_capacity(const DistributionSpec& spec) {
  if (std::holds_alternative<IndependentUniformSpec>(spec.v) && spec.good_count() == 5)
    return std::vector<double>(5, 10.0);
  return std::vector<double>(spec.good_count(), 1.0);
}

// Offline optimum of a two-good counterexample realization with s buyers of
// the first type: n log n - s log s - (n-s) log(n-s), zero at s in {0, n}.
inline double closed_form_optimum_counterexample(std::size_t n, std::size_t s) {
  if (s > n) throw std::invalid_argument("s must be at most n");
  auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
  const double nd = static_cast<double>(n), sd = static_cast<double>(s);
  return xlogx(nd) - xlogx(sd) - xlogx(nd - sd);
}

// Symbolic assumption check on the spec itself, not on samples.
inline ValidationReport check_assumptions(const DistributionSpec& spec) {
  ValidationReport rep;
  const std::size_t m = spec.good_count();
  rep.good_has_demand.assign(m, false);

  if (const auto* d = std::get_if<DiscreteSpec>(&spec.v)) {
    rep.buyer_strictly_positive.assign(d->types.size(), true);
    for (std::size_t k = 0; k < d->types.size(); ++k) {
      const auto& t = d->types[k];
      if (!(t.budget > 0.0)) {
        rep.buyer_strictly_positive[k] = false;
        rep.violations.push_back({Violation::NonpositiveBudget, k});
      }
      bool any = false;
      for (std::size_t j = 0; j < m; ++j) {
        if (t.utilities[j] > 0.0) {
          any = true;
          if (d->probs[k] > 0.0) rep.good_has_demand[j] = true;
        } else {
          rep.buyer_strictly_positive[k] = false;
          rep.violations.push_back({Violation::ZeroUtilityEntry, k, j});
        }
      }
      if (!any) rep.violations.push_back({Violation::DegenerateBuyer, k});
    }
  } else {
    const auto& u = std::get<IndependentUniformSpec>(spec.v);
    rep.buyer_strictly_positive.assign(1, true);
    for (std::size_t j = 0; j < m; ++j) rep.good_has_demand[j] = u.utility_hi > 0.0;
    if (!(u.utility_lo > 0.0)) {
      rep.buyer_strictly_positive[0] = false;
      rep.violations.push_back({Violation::ZeroUtilityEntry, 0});
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    if (!rep.good_has_demand[j]) rep.violations.push_back({Violation::UnsupportedGood, j});
  return rep;
}

}  // namespace fisherlab
