#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fisherlab/buyer.hpp"
#include "fisherlab/errors.hpp"
#include "fisherlab/market.hpp"

namespace fisherlab {

struct SolverParams {
  std::size_t max_iters = 1000000;  // proportional-response sweeps
  double gap_tol = 1e-8;            // relative duality gap target
  double feas_tol = 1e-8;
  double clear_tol = 1e-6;
  double price_eps = 1e-9;          // below this a price counts as zero
  // Subgradient schedule gamma_k = step_a / (step_b + k) on the normalized
  // direction; step_a <= 0 selects a scale-aware default.
  double step_a = 0.0;
  double step_b = 20.0;
  double price_floor = 1e-12;
  std::size_t subgradient_iters = 60000;
};

struct EquilibriumSolution {
  std::size_t buyer_count = 0;
  std::size_t good_count = 0;
  std::vector<double> allocations;  // buyer_count x good_count, row-major
  PriceVector prices;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;

  double alloc(std::size_t t, std::size_t j) const { return allocations[t * good_count + j]; }
};

struct MaxItersError : std::runtime_error {
  EquilibriumSolution best;
  MaxItersError(const std::string& msg, EquilibriumSolution b)
      : std::runtime_error(msg), best(std::move(b)) {}
};

namespace detail {

// beta_t = min over valued goods of p_j / u_tj. Goods the buyer does not
// value never bind, so zero prices on unvalued goods are harmless.
inline double buyer_beta(const BuyerProfile& b, const PriceVector& p) {
  double beta = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < p.size(); ++j)
    if (b.utilities[j] > 0.0) beta = std::min(beta, p[j] / b.utilities[j]);
  return beta;
}

inline double dual_value_unchecked(const PriceVector& p, const std::vector<BuyerProfile>& buyers,
                                   const std::vector<double>& capacities) {
  double v = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) v += p[j] * capacities[j];
  for (const BuyerProfile& b : buyers) {
    const double beta = buyer_beta(b, p);
    v += b.budget * (std::log(b.budget) - std::log(beta) - 1.0);
  }
  return v;
}

}  // namespace detail

// Full dual: sum_t w_t log w_t - sum_t w_t log(min_j p_j/u_tj) + p.c - sum_t w_t.
inline double dual_objective(const PriceVector& p, const MarketInstance& inst) {
  if (p.size() != inst.good_count) throw std::invalid_argument("price length mismatch");
  for (double pj : p)
    if (!(pj > 0.0)) throw NonpositivePriceError("dual_objective: price must be positive");
  for (std::size_t t = 0; t < inst.user_count; ++t) {
    bool any = false;
    for (double u : inst.buyers[t].utilities) any = any || u > 0.0;
    if (!any) throw DegenerateBuyerError("dual_objective: buyer " + std::to_string(t) +
                                         " has no positive utility");
  }
  return detail::dual_value_unchecked(p, inst.buyers, inst.capacities);
}

// Per-user form: p.d + (1/n) sum_t (w log w - w log beta_t - w).
// Equals dual_objective / n whenever d = c / n.
inline double saa_dual_objective(const PriceVector& p, const std::vector<BuyerProfile>& buyers,
                                 const std::vector<double>& d) {
  if (p.size() != d.size()) throw std::invalid_argument("price/capacity length mismatch");
  for (double pj : p)
    if (!(pj > 0.0)) throw NonpositivePriceError("saa_dual_objective: price must be positive");
  double v = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) v += p[j] * d[j];
  double acc = 0.0;
  for (const BuyerProfile& b : buyers) {
    const double beta = detail::buyer_beta(b, p);
    if (!std::isfinite(beta))
      throw DegenerateBuyerError("saa_dual_objective: buyer has no positive utility");
    acc += b.budget * (std::log(b.budget) - std::log(beta) - 1.0);
  }
  return v + acc / static_cast<double>(buyers.size());
}

// Proportional-response fixed point. Buyers split bids over goods in
// proportion to the utility each good currently delivers; prices absorb the
// bids. Every iterate exhausts budgets exactly and stays capacity-feasible,
// so the relative duality gap is the only convergence certificate needed.
//
// In-loop the gap is evaluated as sum_t w_t log(indirect_t / utility_t),
// which equals dual - primal at PR iterates because bids always sum to
// budgets (so p.c collapses against sum_t w_t).
inline EquilibriumSolution solve_eg_primal(const MarketInstance& inst,
                                           const SolverParams& params = {}) {
  const std::size_t n = inst.user_count, m = inst.good_count;

  std::vector<std::size_t> support_size(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    for (double u : inst.buyers[t].utilities)
      if (u > 0.0) ++support_size[t];
    if (support_size[t] == 0)
      throw DegenerateBuyerError("solve_eg_primal: buyer " + std::to_string(t) +
                                 " has all-zero utilities");
  }

  // Flat copies keep the sweeps cache-friendly.
  std::vector<double> util(n * m), budget(n);
  for (std::size_t t = 0; t < n; ++t) {
    budget[t] = inst.buyers[t].budget;
    for (std::size_t j = 0; j < m; ++j) util[t * m + j] = inst.buyers[t].utilities[j];
  }

  std::vector<double> bids(n * m, 0.0);
  auto reset_bids = [&](std::size_t t) {
    const double share = budget[t] / static_cast<double>(support_size[t]);
    for (std::size_t j = 0; j < m; ++j)
      bids[t * m + j] = util[t * m + j] > 0.0 ? share : 0.0;
  };
  for (std::size_t t = 0; t < n; ++t) reset_bids(t);

  std::vector<double> inv_cap(m), prices(m), inv_price(m);
  for (std::size_t j = 0; j < m; ++j) inv_cap[j] = 1.0 / inst.capacities[j];

  auto compute_prices = [&]() {
    for (std::size_t j = 0; j < m; ++j) prices[j] = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double* bid = &bids[t * m];
      for (std::size_t j = 0; j < m; ++j) prices[j] += bid[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      prices[j] *= inv_cap[j];
      inv_price[j] = prices[j] > 0.0 ? 1.0 / prices[j] : 0.0;
    }
  };

  EquilibriumSolution sol;
  sol.buyer_count = n;
  sol.good_count = m;

  // Exact (prices, allocations, primal, dual) for the current bids.
  auto finalize = [&]() {
    compute_prices();
    sol.prices = prices;
    sol.allocations.assign(n * m, 0.0);
    double primal = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double ut = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double x = bids[t * m + j] * inv_price[j];
        sol.allocations[t * m + j] = x;
        ut += inst.buyers[t].utilities[j] * x;
      }
      primal += inst.buyers[t].budget * std::log(std::max(ut, 1e-300));
    }
    sol.primal_value = primal;
    sol.dual_value = detail::dual_value_unchecked(prices, inst.buyers, inst.capacities);
    sol.gap = sol.dual_value - sol.primal_value;
  };

  double primal_scale = 1.0;  // refreshed occasionally; only sets the relative tolerance
  for (std::size_t iter = 1; iter <= params.max_iters; ++iter) {
    compute_prices();

    // The gap needs a log per buyer, so sample it every few sweeps.
    const bool eval_gap = iter % 4 == 1 || iter == params.max_iters;
    const bool full_eval = iter % 16 == 1;
    double gap = 0.0, primal = 0.0;
    bool had_reset = false;
    for (std::size_t t = 0; t < n; ++t) {
      const double* u = &util[t * m];
      double* bid = &bids[t * m];
      double ut = 0.0, best = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        // Valued goods always carry bids, hence positive prices, so a zero
        // ratio can never be the true maximum.
        const double r = u[j] * inv_price[j];
        ut += bid[j] * r;
        best = r > best ? r : best;
      }
      if (ut > 0.0) {
        const double w = budget[t];
        if (eval_gap) gap += w * std::log(w * best / ut);
        if (full_eval) primal += w * std::log(ut);
        const double scale = w / ut;
        // Bids on dominated goods decay geometrically; flush them to zero
        // well above the subnormal range, where the arithmetic would stall.
        const double tiny = w * 1e-250;
        for (std::size_t j = 0; j < m; ++j) {
          const double nb = bid[j] * scale * u[j] * inv_price[j];
          bid[j] = nb < tiny ? 0.0 : nb;
        }
      } else {
        reset_bids(t);
        had_reset = true;
      }
    }
    if (full_eval) primal_scale = 1.0 + std::abs(primal);
    sol.iterations = iter;

    if (eval_gap && !had_reset && gap <= params.gap_tol * primal_scale) {
      finalize();
      if (sol.gap <= params.gap_tol * (1.0 + std::abs(sol.primal_value))) return sol;
      primal_scale = 1.0 + std::abs(sol.primal_value);
    }
  }

  finalize();
  throw MaxItersError("solve_eg_primal: no convergence within max_iters", std::move(sol));
}

// Batch subgradient descent on the SAA dual, kept deliberately independent of
// the proportional-response route so the two can cross-check each other.
// Direction is the normalized subgradient d - mean best-response demand;
// prices stay above a positive floor and the best-value iterate is returned.
inline PriceVector solve_dual_subgradient(const std::vector<BuyerProfile>& buyers,
                                          const std::vector<double>& d,
                                          const SolverParams& params, PriceVector p0) {
  const std::size_t n = buyers.size(), m = d.size();
  if (p0.size() != m) throw std::invalid_argument("p0 length mismatch");
  for (double pj : p0)
    if (!(pj > 0.0)) throw NonpositivePriceError("solve_dual_subgradient: p0 must be positive");

  double mean_p0 = 0.0;
  for (double pj : p0) mean_p0 += pj / static_cast<double>(m);
  const double step_a =
      params.step_a > 0.0 ? params.step_a : 0.25 * mean_p0 * (params.step_b + 1.0);

  PriceVector p = p0, best_p = p0;
  double best_val = saa_dual_objective(p, buyers, d);
  double last_checkpoint = best_val;

  std::vector<double> g(m, 0.0);
  bool stationary = false;
  const std::size_t checkpoint = std::max<std::size_t>(params.subgradient_iters / 10, 1);
  for (std::size_t k = 1; k <= params.subgradient_iters; ++k) {
    std::fill(g.begin(), g.end(), 0.0);
    for (const BuyerProfile& b : buyers) {
      // Best response concentrates on one maximizer; any tie pick is a
      // valid subgradient.
      double best_ratio = 0.0;
      std::size_t jstar = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const double r = b.utilities[j] / p[j];
        if (r > best_ratio) {
          best_ratio = r;
          jstar = j;
        }
      }
      g[jstar] -= b.budget / p[jstar];
    }
    double norm = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      g[j] = d[j] + g[j] / static_cast<double>(n);
      norm += g[j] * g[j];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-15) {  // landed on a stationary point
      stationary = true;
      break;
    }

    const double gamma = step_a / (params.step_b + static_cast<double>(k));
    for (std::size_t j = 0; j < m; ++j)
      p[j] = std::max(p[j] - gamma * g[j] / norm, params.price_floor);

    const double val = saa_dual_objective(p, buyers, d);
    if (val < best_val) {
      best_val = val;
      best_p = p;
    }
    if (k % checkpoint == 0) {
      if (k == params.subgradient_iters) break;
      last_checkpoint = best_val;
    }
  }

  // Stationarity heuristic: the last tenth of the budget should not still be
  // making visible progress.
  if (!stationary && last_checkpoint - best_val > 1e-3 * (1.0 + std::abs(best_val))) {
    EquilibriumSolution partial;
    partial.prices = best_p;
    partial.dual_value = best_val;
    throw MaxItersError("solve_dual_subgradient: still improving at iteration budget",
                        std::move(partial));
  }
  return best_p;
}

// K weighted type profiles with probabilities q and per-user capacities d.
struct CEInput {
  std::vector<BuyerProfile> types;
  std::vector<double> probs;
  std::vector<double> per_user_capacity;
};

// The K-type program reduces to a K-buyer EG instance with budgets q_k w_k and
// capacities d via y_k = q_k z_k; capacity duals are unchanged by the
// substitution and the objective shifts by the constant -sum q w log q.
inline EquilibriumSolution solve_certainty_equivalent(const CEInput& input,
                                                      const SolverParams& params = {}) {
  const std::size_t m = input.per_user_capacity.size();
  if (input.types.size() != input.probs.size())
    throw std::invalid_argument("type/probability length mismatch");

  for (std::size_t j = 0; j < m; ++j) {
    bool supported = false;
    for (std::size_t k = 0; k < input.types.size(); ++k)
      if (input.probs[k] > 0.0 && input.types[k].utilities[j] > 0.0) supported = true;
    if (!supported)
      throw UnsupportedGoodError("solve_certainty_equivalent: good " + std::to_string(j) +
                                 " demanded by no type");
  }

  std::vector<BuyerProfile> weighted;
  std::vector<std::size_t> origin;
  for (std::size_t k = 0; k < input.types.size(); ++k) {
    if (input.probs[k] <= 0.0) continue;
    weighted.push_back({input.probs[k] * input.types[k].budget, input.types[k].utilities});
    origin.push_back(k);
  }

  EquilibriumSolution inner =
      solve_eg_primal(make_instance(input.per_user_capacity, weighted), params);

  EquilibriumSolution out;
  out.buyer_count = input.types.size();
  out.good_count = m;
  out.prices = inner.prices;
  out.iterations = inner.iterations;
  out.gap = inner.gap;
  out.allocations.assign(input.types.size() * m, 0.0);
  for (std::size_t i = 0; i < origin.size(); ++i) {
    const std::size_t k = origin[i];
    for (std::size_t j = 0; j < m; ++j)
      out.allocations[k * m + j] = inner.alloc(i, j) / input.probs[k];
  }
  double primal = 0.0;
  for (std::size_t k = 0; k < input.types.size(); ++k) {
    if (input.probs[k] <= 0.0) continue;
    double ut = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      ut += input.types[k].utilities[j] * out.alloc(k, j);
    primal += input.probs[k] * input.types[k].budget * std::log(ut);
  }
  out.primal_value = primal;
  out.dual_value = primal + inner.gap;
  return out;
}

// Invariant audit used by tests: feasibility, weak duality, market clearing
// for positively priced goods, and budget exhaustion.
struct EquilibriumCheck {
  double max_capacity_excess = 0.0;
  double max_clearing_gap = 0.0;
  double max_budget_gap = 0.0;
  double duality_slack = 0.0;  // dual - primal
};

inline EquilibriumCheck verify_equilibrium(const EquilibriumSolution& sol,
                                           const MarketInstance& inst,
                                           const SolverParams& params = {}) {
  EquilibriumCheck chk;
  for (std::size_t j = 0; j < inst.good_count; ++j) {
    double col = 0.0;
    for (std::size_t t = 0; t < inst.user_count; ++t) col += sol.alloc(t, j);
    chk.max_capacity_excess = std::max(chk.max_capacity_excess, col - inst.capacities[j]);
    if (sol.prices[j] > params.price_eps)
      chk.max_clearing_gap = std::max(chk.max_clearing_gap, std::abs(col - inst.capacities[j]));
  }
  for (std::size_t t = 0; t < inst.user_count; ++t) {
    double spent = 0.0;
    for (std::size_t j = 0; j < inst.good_count; ++j) spent += sol.prices[j] * sol.alloc(t, j);
    chk.max_budget_gap = std::max(chk.max_budget_gap, std::abs(spent - inst.buyers[t].budget));
  }
  chk.duality_slack = sol.dual_value - sol.primal_value;
  return chk;
}

}  // namespace fisherlab
