#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fisherlab/eg.hpp"
#include "fisherlab/market.hpp"

namespace fisherlab {

struct PolicyEvent {
  enum Kind { PriceFloorBreach, CeSwitch, ZeroUtilityOutcome } kind;
  std::size_t step = 0;
  double value = 0.0;
};

struct TraceStep {
  PriceVector price;
  Allocation alloc;
  std::size_t buyer = 0;  // index into SimulationTrace::buyers
};

// Full record of one online run: who arrived, what prices they saw, what they
// took, and anything notable that happened along the way.
struct SimulationTrace {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<BuyerProfile> buyers;
  std::vector<TraceStep> steps;
  std::vector<double> consumed;  // running column sums, kept exact
  std::vector<PolicyEvent> events;
  std::optional<std::size_t> switch_step;     // adaptive pricing stop time
  std::optional<PriceVector> final_price;     // price after the last update
  bool breached = false;
  std::size_t breach_step = 0;
};

struct MetricsReport {
  double u_online = 0.0;
  double u_star = 0.0;
  double regret = 0.0;
  double violation_l2 = 0.0;
  double violation_linf = 0.0;
  double nsw_ratio = 0.0;
  double max_price = 0.0;
  double min_price = 0.0;
  std::optional<std::size_t> tau;
  bool breach = false;
};

// sum_t w_t log(u_t . x_t); -inf when some served buyer with positive
// utility ends up with none, so aggregates can count those runs.
inline double online_objective(const SimulationTrace& trace) {
  double total = 0.0;
  for (const TraceStep& s : trace.steps) {
    const BuyerProfile& b = trace.buyers[s.buyer];
    double ut = 0.0;
    for (std::size_t j = 0; j < trace.m; ++j) ut += b.utilities[j] * s.alloc[j];
    if (!(ut > 0.0)) return -std::numeric_limits<double>::infinity();
    total += b.budget * std::log(ut);
  }
  return total;
}

inline double regret(const SimulationTrace& trace, double oracle_value) {
  return oracle_value - online_objective(trace);
}

inline double regret(const SimulationTrace& trace, const EquilibriumSolution& oracle) {
  return regret(trace, oracle.primal_value);
}

struct ViolationReport {
  std::vector<double> excess;  // (sum_t x_t - c)_+ per good
  double l2 = 0.0;
  double linf = 0.0;
};

inline ViolationReport constraint_violation(const SimulationTrace& trace,
                                            const std::vector<double>& capacities) {
  if (capacities.size() != trace.m) throw std::invalid_argument("capacity length mismatch");
  ViolationReport rep;
  rep.excess.assign(trace.m, 0.0);
  for (std::size_t j = 0; j < trace.m; ++j) {
    rep.excess[j] = std::max(trace.consumed[j] - capacities[j], 0.0);
    rep.l2 += rep.excess[j] * rep.excess[j];
    rep.linf = std::max(rep.linf, rep.excess[j]);
  }
  rep.l2 = std::sqrt(rep.l2);
  return rep;
}

// exp((U* - U)/n), the offline-to-online Nash social welfare ratio under the
// equal-budget convention.
inline double nsw_ratio(double oracle_value, double online_value, std::size_t n) {
  return std::exp((oracle_value - online_value) / static_cast<double>(n));
}

// V_t = p^t . d for each step.
inline std::vector<double> potential_series(const SimulationTrace& trace,
                                            const std::vector<double>& d) {
  if (d.size() != trace.m) throw std::invalid_argument("d length mismatch");
  for (double v : d)
    if (!(v > 0.0)) throw std::invalid_argument("potential_series: d must be positive");
  std::vector<double> series;
  series.reserve(trace.steps.size());
  for (const TraceStep& s : trace.steps) {
    double v = 0.0;
    for (std::size_t j = 0; j < trace.m; ++j) v += s.price[j] * d[j];
    series.push_back(v);
  }
  return series;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LineFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_linear: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double vxx = sxx - sx * sx / n;
  const double vxy = sxy - sx * sy / n;
  const double vyy = syy - sy * sy / n;
  if (!(vxx > 0.0)) throw std::invalid_argument("fit_linear: x values are all equal");
  LineFit fit;
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.r2 = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
  return fit;
}

// OLS on (log n, log value). Values must be positive and at least three.
inline LineFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("fit_loglog_slope: need >= 3 points");
  std::vector<double> lx, ly;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0))
      throw std::invalid_argument("fit_loglog_slope: points must be positive");
    lx.push_back(std::log(n));
    ly.push_back(std::log(v));
  }
  return fit_linear(lx, ly);
}

}  // namespace fisherlab
