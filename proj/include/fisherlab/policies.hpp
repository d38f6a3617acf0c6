#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fisherlab/buyer.hpp"
#include "fisherlab/distributions.hpp"
#include "fisherlab/eg.hpp"
#include "fisherlab/errors.hpp"
#include "fisherlab/market.hpp"
#include "fisherlab/metrics.hpp"

namespace fisherlab {

// Online pricing policy: next_price before user t arrives, observe after the
// purchase. Steps are 1-based. A policy may also prescribe the allocation
// directly; otherwise the simulator computes the buyer's best response.
class PricingPolicy {
 public:
  virtual ~PricingPolicy() = default;

  virtual PriceVector next_price(std::size_t t) = 0;
  virtual std::optional<Allocation> prescribed_allocation(std::size_t /*t*/,
                                                          const BuyerProfile& /*b*/) {
    return std::nullopt;
  }
  virtual void observe(std::size_t /*t*/, const Allocation& /*x*/) {}
  // Only parameter-revealing benchmarks override this.
  virtual void observe_profile(std::size_t /*t*/, const BuyerProfile& /*b*/) {}

  virtual std::optional<std::size_t> switch_step() const { return std::nullopt; }
  virtual std::optional<PriceVector> post_horizon_price() const { return std::nullopt; }

  const std::vector<PolicyEvent>& events() const { return events_; }

 protected:
  std::vector<PolicyEvent> events_;
};

class StaticPricePolicy : public PricingPolicy {
 public:
  explicit StaticPricePolicy(PriceVector prices) : prices_(std::move(prices)) {}
  PriceVector next_price(std::size_t) override { return prices_; }
  const PriceVector& prices() const { return prices_; }

 private:
  PriceVector prices_;
};

// Scale-aware starting point: p_j = E[w] d_j / sum_k d_k^2.
inline PriceVector scaled_initial_price(const DistributionSpec& spec,
                                        const std::vector<double>& d) {
  double denom = 0.0;
  for (double v : d) denom += v * v;
  const double w = spec.mean_budget();
  PriceVector p(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) p[j] = w * d[j] / denom;
  return p;
}

// Expected equilibrium prices estimated by minimizing the sampled dual over
// `sample_count` draws; the price is then posted unchanged to every user.
inline std::unique_ptr<StaticPricePolicy> static_equilibrium_policy(
    const DistributionSpec& spec, const std::vector<double>& d, std::size_t sample_count,
    RngStream& rng, const SolverParams& params = {}) {
  std::vector<BuyerProfile> samples;
  samples.reserve(sample_count);
  for (std::size_t i = 0; i < sample_count; ++i) samples.push_back(sample_user(spec, rng));
  PriceVector p0 = scaled_initial_price(spec, d);
  return std::make_unique<StaticPricePolicy>(solve_dual_subgradient(samples, d, params, p0));
}

enum class ConsumptionMode { BestResponse, AllocationFromCE };

// Reprices each arrival at the capacity duals of the type-level program run
// on the average remaining capacities d_t, until d_t first leaves the band
// [d - delta, d + delta]; from then on the time-1 price is frozen.
class AdaptiveCEPolicy : public PricingPolicy {
 public:
  AdaptiveCEPolicy(CEInput input, std::size_t n, std::vector<double> delta, ConsumptionMode mode,
                   SolverParams params = {})
      : input_(std::move(input)),
        n_(n),
        delta_(std::move(delta)),
        mode_(mode),
        params_(std::move(params)) {
    const std::size_t m = input_.per_user_capacity.size();
    if (delta_.size() != m) throw std::invalid_argument("delta length mismatch");
    for (std::size_t j = 0; j < m; ++j)
      if (!(delta_[j] > 0.0) || !(delta_[j] < input_.per_user_capacity[j]))
        throw std::invalid_argument("delta must satisfy 0 < delta < d");
    remaining_.resize(m);
    for (std::size_t j = 0; j < m; ++j)
      remaining_[j] = input_.per_user_capacity[j] * static_cast<double>(n_);

    EquilibriumSolution base = solve_certainty_equivalent(input_, params_);
    frozen_price_ = base.prices;
    frozen_z_ = base.allocations;
    cur_price_ = frozen_price_;
    cur_z_ = frozen_z_;
  }

  PriceVector next_price(std::size_t t) override {
    if (in_band_) {
      std::vector<double> dt(remaining_);
      const double left = static_cast<double>(n_ - t + 1);
      bool inside = true;
      for (std::size_t j = 0; j < dt.size(); ++j) {
        dt[j] /= left;
        const double lo = input_.per_user_capacity[j] - delta_[j];
        const double hi = input_.per_user_capacity[j] + delta_[j];
        if (dt[j] < lo || dt[j] > hi) inside = false;
      }
      if (inside) {
        CEInput step = input_;
        step.per_user_capacity = dt;
        EquilibriumSolution sol = solve_certainty_equivalent(step, params_);
        cur_price_ = sol.prices;
        cur_z_ = sol.allocations;
      } else {
        in_band_ = false;
        tau_ = t;
        events_.push_back({PolicyEvent::CeSwitch, t, 0.0});
        cur_price_ = frozen_price_;
        cur_z_ = frozen_z_;
      }
    }
    return cur_price_;
  }

  std::optional<Allocation> prescribed_allocation(std::size_t /*t*/,
                                                  const BuyerProfile& b) override {
    if (mode_ == ConsumptionMode::BestResponse) return std::nullopt;
    const std::size_t k = match_type(b);
    const std::size_t m = input_.per_user_capacity.size();
    return Allocation(cur_z_.begin() + k * m, cur_z_.begin() + (k + 1) * m);
  }

  void observe(std::size_t /*t*/, const Allocation& x) override {
    for (std::size_t j = 0; j < remaining_.size(); ++j) remaining_[j] -= x[j];
  }

  std::optional<std::size_t> switch_step() const override { return tau_; }

 private:
  std::size_t match_type(const BuyerProfile& b) const {
    for (std::size_t k = 0; k < input_.types.size(); ++k)
      if (input_.probs[k] > 0.0 && input_.types[k] == b) return k;
    throw TypeMismatchError("arriving buyer matches no supported type");
  }

  CEInput input_;
  std::size_t n_;
  std::vector<double> delta_;
  ConsumptionMode mode_;
  SolverParams params_;
  std::vector<double> remaining_;
  PriceVector frozen_price_, cur_price_;
  std::vector<double> frozen_z_, cur_z_;
  bool in_band_ = true;
  std::optional<std::size_t> tau_;
};

inline CEInput ce_input_from_spec(const DistributionSpec& spec, std::vector<double> d) {
  const auto* disc = std::get_if<DiscreteSpec>(&spec.v);
  if (disc == nullptr)
    throw std::invalid_argument("adaptive pricing needs a discrete distribution");
  return CEInput{disc->types, disc->probs, std::move(d)};
}

enum class PriceUpdateRule { Additive, Multiplicative };

// Price adjustment from consumption alone: p <- p - gamma (d - x), or the
// multiplicative form p <- p * exp(-gamma (d - x)). The additive rule is not
// projected; a nonpositive component is logged and invalidates the run.
class RevealedPreferencePolicy : public PricingPolicy {
 public:
  RevealedPreferencePolicy(std::vector<double> d, std::size_t n, double gamma_scale,
                           PriceUpdateRule rule, PriceVector p1)
      : d_(std::move(d)),
        gamma_(gamma_scale / std::sqrt(static_cast<double>(n))),
        rule_(rule),
        p_(std::move(p1)) {
    if (p_.size() != d_.size()) throw std::invalid_argument("p1 length mismatch");
    for (double pj : p_)
      if (!(pj > 0.0)) throw NonpositivePriceError("revealed preference: p1 must be positive");
    if (!(gamma_scale > 0.0)) throw std::invalid_argument("gamma scale must be positive");
  }

  PriceVector next_price(std::size_t) override { return p_; }

  void observe(std::size_t t, const Allocation& x) override {
    for (std::size_t j = 0; j < p_.size(); ++j) {
      const double step = gamma_ * (d_[j] - x[j]);
      if (rule_ == PriceUpdateRule::Additive)
        p_[j] -= step;
      else
        p_[j] *= std::exp(-step);
    }
    const double low = *std::min_element(p_.begin(), p_.end());
    if (low <= 0.0) events_.push_back({PolicyEvent::PriceFloorBreach, t, low});
  }

  std::optional<PriceVector> post_horizon_price() const override { return p_; }
  double gamma() const { return gamma_; }

 private:
  std::vector<double> d_;
  double gamma_;
  PriceUpdateRule rule_;
  PriceVector p_;
};

// Parameter-revealing benchmark: reprice at geometric breakpoints by solving
// the sampled offline program on everyone seen so far with capacities scaled
// to the elapsed fraction of the horizon.
class DynamicSaaPolicy : public PricingPolicy {
 public:
  DynamicSaaPolicy(std::vector<double> capacities, std::size_t n, double delta, PriceVector p1,
                   SolverParams params = {})
      : capacities_(std::move(capacities)), n_(n), p_(std::move(p1)), params_(std::move(params)) {
    if (!(delta > 1.0) || !(delta <= 2.0))
      throw std::invalid_argument("delta must lie in (1, 2]");
    if (p_.size() != capacities_.size()) throw std::invalid_argument("p1 length mismatch");
    // t_k = floor(delta^k), deduped, stopping strictly before n; the horizon
    // end stands in for t_L = n + 1.
    for (std::size_t k = 1;; ++k) {
      const double raw = std::floor(std::pow(delta, static_cast<double>(k)));
      if (raw >= static_cast<double>(n_)) break;
      const auto tk = static_cast<std::size_t>(raw);
      if (tk >= 1 && (breakpoints_.empty() || breakpoints_.back() != tk))
        breakpoints_.push_back(tk);
    }
  }

  PriceVector next_price(std::size_t t) override {
    std::optional<std::size_t> crossed;
    while (next_bp_ < breakpoints_.size() && breakpoints_[next_bp_] < t)
      crossed = breakpoints_[next_bp_++];
    if (crossed) {
      const std::size_t tk = *crossed;
      std::vector<double> scaled(capacities_);
      const double frac = static_cast<double>(tk) / static_cast<double>(n_);
      for (double& c : scaled) c *= frac;
      std::vector<BuyerProfile> prefix(seen_.begin(), seen_.begin() + tk);
      p_ = solve_eg_primal(make_instance(std::move(scaled), std::move(prefix)), params_).prices;
    }
    return p_;
  }

  void observe_profile(std::size_t /*t*/, const BuyerProfile& b) override {
    seen_.push_back(b);
  }

  const std::vector<std::size_t>& breakpoints() const { return breakpoints_; }

 private:
  std::vector<double> capacities_;
  std::size_t n_;
  PriceVector p_;
  SolverParams params_;
  std::vector<std::size_t> breakpoints_;
  std::vector<BuyerProfile> seen_;
  std::size_t next_bp_ = 0;
};

}  // namespace fisherlab
