#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "fisherlab/buyer.hpp"
#include "fisherlab/distributions.hpp"
#include "fisherlab/eg.hpp"
#include "fisherlab/errors.hpp"
#include "fisherlab/market.hpp"
#include "fisherlab/metrics.hpp"
#include "fisherlab/policies.hpp"

namespace fisherlab {

enum class PolicyId { StaticEq, AdaptiveCE, RpAdditive, RpMultiplicative, DynamicSaa };

inline std::string policy_id_name(PolicyId id) {
  switch (id) {
    case PolicyId::StaticEq: return "static_eq";
    case PolicyId::AdaptiveCE: return "adaptive_ce";
    case PolicyId::RpAdditive: return "rp_additive";
    case PolicyId::RpMultiplicative: return "rp_multiplicative";
    case PolicyId::DynamicSaa: return "dynamic_saa";
  }
  return "unknown";
}

struct PolicyConfig {
  PolicyId id = PolicyId::RpAdditive;
  std::string label;  // CSV tag; defaults to the id name

  // static_eq: pinned prices bypass the sampled-dual solve
  std::optional<PriceVector> prices;
  std::size_t sample_count = 5000;

  // adaptive_ce
  double delta_fraction = 0.5;
  ConsumptionMode mode = ConsumptionMode::BestResponse;

  // rp_additive / rp_multiplicative
  double gamma_scale = 0.01;
  enum class InitPrice { Scaled, Ones, Explicit } init_price = InitPrice::Scaled;
  PriceVector explicit_p1;

  // dynamic_saa
  double saa_delta = 2.0;

  std::string effective_label() const { return label.empty() ? policy_id_name(id) : label; }
};

struct OracleOptions {
  SolverParams params;
  bool force_iterative = false;  // skip the counterexample closed form
};

struct ExperimentConfig {
  std::string name = "experiment";
  DistributionSpec distribution = counterexample_spec();
  std::vector<double> per_user_capacity;  // d; defaults from the distribution
  std::vector<std::size_t> n_values;
  std::size_t replications = 30;
  std::uint64_t seed = 1;
  std::vector<PolicyConfig> policies;
  OracleOptions oracle;
  TieRule tie_rule = TieRule::LowestIndex;
  bool dump_price_steps = false;
  std::string output_dir = "out";

  std::vector<double> capacity_for(std::size_t n) const {
    std::vector<double> c(per_user_capacity);
    for (double& v : c) v *= static_cast<double>(n);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Single simulation
// ---------------------------------------------------------------------------

inline SimulationTrace simulate(const std::vector<BuyerProfile>& buyers,
                                const std::vector<double>& capacities, PricingPolicy& policy,
                                TieRule tie = TieRule::LowestIndex) {
  SimulationTrace trace;
  trace.n = buyers.size();
  trace.m = capacities.size();
  trace.buyers = buyers;
  trace.consumed.assign(trace.m, 0.0);
  trace.steps.reserve(trace.n);

  for (std::size_t t = 1; t <= trace.n; ++t) {
    PriceVector p = policy.next_price(t);
    double low = p.empty() ? 0.0 : *std::min_element(p.begin(), p.end());
    if (!(low > 0.0)) {
      // Demand is unbounded at a nonpositive price; stop rather than clamp.
      trace.breached = true;
      trace.breach_step = t;
      break;
    }
    const BuyerProfile& b = buyers[t - 1];
    Allocation x;
    if (auto prescribed = policy.prescribed_allocation(t, b))
      x = std::move(*prescribed);
    else
      x = optimal_bundle(b, p, tie);
    for (std::size_t j = 0; j < trace.m; ++j) trace.consumed[j] += x[j];
    trace.steps.push_back({std::move(p), std::move(x), t - 1});
    policy.observe(t, trace.steps.back().alloc);
    policy.observe_profile(t, b);
  }

  trace.final_price = policy.post_horizon_price();
  trace.switch_step = policy.switch_step();
  trace.events = policy.events();
  return trace;
}

// Closed form applies to the plain two-type counterexample at unit per-user
// capacities; anything else goes through the iterative solver.
inline bool closed_form_applicable(const DistributionSpec& spec,
                                   const std::vector<double>& per_user_capacity) {
  const auto* d = std::get_if<DiscreteSpec>(&spec.v);
  if (d == nullptr || d->types.size() != 2 || per_user_capacity.size() != 2) return false;
  if (per_user_capacity[0] != 1.0 || per_user_capacity[1] != 1.0) return false;
  if (d->probs[0] != 0.5 || d->probs[1] != 0.5) return false;
  const BuyerProfile a{1.0, {1.0, 0.0}}, b{1.0, {0.0, 1.0}};
  return (d->types[0] == a && d->types[1] == b) || (d->types[0] == b && d->types[1] == a);
}

inline double oracle_objective(const std::vector<BuyerProfile>& buyers,
                               const std::vector<double>& capacities,
                               const DistributionSpec* spec_hint, const OracleOptions& opt) {
  if (spec_hint != nullptr && !opt.force_iterative) {
    std::vector<double> d(capacities);
    for (double& v : d) v /= static_cast<double>(buyers.size());
    if (closed_form_applicable(*spec_hint, d)) {
      std::size_t s = 0;
      for (const BuyerProfile& b : buyers)
        if (b.utilities[0] > 0.0) ++s;
      return closed_form_optimum_counterexample(buyers.size(), s);
    }
  }
  return solve_eg_primal(make_instance(capacities, buyers), opt.params).primal_value;
}

inline MetricsReport compute_metrics(const SimulationTrace& trace,
                                     const std::vector<double>& capacities, double u_star) {
  MetricsReport rep;
  rep.breach = trace.breached;
  rep.tau = trace.switch_step;
  rep.max_price = -std::numeric_limits<double>::infinity();
  rep.min_price = std::numeric_limits<double>::infinity();
  for (const TraceStep& s : trace.steps)
    for (double pj : s.price) {
      rep.max_price = std::max(rep.max_price, pj);
      rep.min_price = std::min(rep.min_price, pj);
    }
  if (trace.breached) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.u_online = rep.u_star = rep.regret = nan;
    rep.violation_l2 = rep.violation_linf = rep.nsw_ratio = nan;
    return rep;
  }
  rep.u_star = u_star;
  rep.u_online = online_objective(trace);
  rep.regret = rep.u_star - rep.u_online;
  const ViolationReport v = constraint_violation(trace, capacities);
  rep.violation_l2 = v.l2;
  rep.violation_linf = v.linf;
  rep.nsw_ratio = nsw_ratio(rep.u_star, rep.u_online, trace.n);
  return rep;
}

struct SimResult {
  SimulationTrace trace;
  MetricsReport metrics;
};

// Sample n arrivals, run the policy, then score against the offline oracle on
// the realized instance. Deterministic given (seed, stream).
inline SimResult run_simulation(const DistributionSpec& spec, std::size_t n,
                                const std::vector<double>& capacities, PricingPolicy& policy,
                                std::uint64_t seed, std::uint64_t stream,
                                const OracleOptions& oracle = {},
                                TieRule tie = TieRule::LowestIndex) {
  RngStream rng(seed, stream);
  std::vector<BuyerProfile> buyers;
  buyers.reserve(n);
  for (std::size_t t = 0; t < n; ++t) buyers.push_back(sample_user(spec, rng));

  SimResult result;
  result.trace = simulate(buyers, capacities, policy, tie);
  double u_star = std::numeric_limits<double>::quiet_NaN();
  if (!result.trace.breached) u_star = oracle_objective(buyers, capacities, &spec, oracle);
  result.metrics = compute_metrics(result.trace, capacities, u_star);
  return result;
}

// ---------------------------------------------------------------------------
// Replicated experiments
// ---------------------------------------------------------------------------

struct ExperimentRow {
  std::string policy_label;
  std::size_t n = 0;
  std::size_t replication = 0;
  MetricsReport metrics;
  std::string error;  // nonempty when this cell failed outright
};

struct AggregateRow {
  std::string policy_label;
  std::size_t n = 0;
  double mean_regret = 0.0, std_regret = 0.0;
  double mean_violation_l2 = 0.0, std_violation_l2 = 0.0;
  double breach_rate = 0.0;
  double slope_regret = 0.0, slope_violation = 0.0;
  std::size_t used_rows = 0;
};

struct PriceStepRow {
  std::string policy_label;
  std::size_t n = 0, t = 0;
  double price_delta_l2 = 0.0;
  bool in_band = true;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ExperimentRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<PriceStepRow> price_steps;
  std::string config_hash;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void append_doubles(std::string& out, const std::vector<double>& vs) {
  for (double v : vs) {
    out += format_double(v);
    out += ',';
  }
}

inline std::string canonical_config_string(const ExperimentConfig& cfg) {
  std::string s = "name=" + cfg.name + ";seed=" + std::to_string(cfg.seed) +
                  ";reps=" + std::to_string(cfg.replications) + ";n=";
  for (std::size_t n : cfg.n_values) s += std::to_string(n) + ",";
  s += ";d=";
  append_doubles(s, cfg.per_user_capacity);
  s += ";tie=" + std::to_string(static_cast<int>(cfg.tie_rule));
  s += ";dump=" + std::to_string(cfg.dump_price_steps ? 1 : 0);
  s += ";oracle=" + format_double(cfg.oracle.params.gap_tol) + "," +
       std::to_string(cfg.oracle.params.max_iters) + "," +
       std::to_string(cfg.oracle.force_iterative ? 1 : 0);
  s += ";dist=";
  if (const auto* d = std::get_if<DiscreteSpec>(&cfg.distribution.v)) {
    s += "discrete:";
    for (std::size_t k = 0; k < d->types.size(); ++k) {
      s += format_double(d->types[k].budget) + "@" + format_double(d->probs[k]) + ":";
      append_doubles(s, d->types[k].utilities);
      s += "|";
    }
  } else {
    const auto& u = std::get<IndependentUniformSpec>(cfg.distribution.v);
    s += "uniform:m" + std::to_string(u.good_count) + ":";
    append_doubles(s, u.budget_values);
    s += ":";
    append_doubles(s, u.budget_probs);
    s += ":" + format_double(u.utility_lo) + "-" + format_double(u.utility_hi);
  }
  s += ";policies=";
  for (const PolicyConfig& p : cfg.policies) {
    s += policy_id_name(p.id) + "/" + p.effective_label() + "/" +
         format_double(p.gamma_scale) + "/" + format_double(p.delta_fraction) + "/" +
         format_double(p.saa_delta) + "/" + std::to_string(p.sample_count) + "/" +
         std::to_string(static_cast<int>(p.mode)) + "/" +
         std::to_string(static_cast<int>(p.init_price)) + "/";
    if (p.prices) append_doubles(s, *p.prices);
    s += "/";
    append_doubles(s, p.explicit_p1);
    s += "|";
  }
  return s;
}

inline std::string hash_hex(std::string_view s) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(s)));
  return buf;
}

}  // namespace detail

inline PriceVector resolve_initial_price(const PolicyConfig& pc, const ExperimentConfig& cfg) {
  switch (pc.init_price) {
    case PolicyConfig::InitPrice::Scaled:
      return scaled_initial_price(cfg.distribution, cfg.per_user_capacity);
    case PolicyConfig::InitPrice::Ones:
      return PriceVector(cfg.per_user_capacity.size(), 1.0);
    case PolicyConfig::InitPrice::Explicit:
      if (pc.explicit_p1.size() != cfg.per_user_capacity.size())
        throw ConfigError("initial_price", "length mismatch with good count");
      return pc.explicit_p1;
  }
  return {};
}

// `static_prices` carries the per-config SAA solution for static_eq policies
// without pinned prices; it is shared across cells for determinism and cost.
inline std::unique_ptr<PricingPolicy> build_policy(const PolicyConfig& pc,
                                                   const ExperimentConfig& cfg, std::size_t n,
                                                   const PriceVector* static_prices) {
  switch (pc.id) {
    case PolicyId::StaticEq: {
      if (pc.prices) return std::make_unique<StaticPricePolicy>(*pc.prices);
      if (static_prices == nullptr)
        throw std::logic_error("static_eq prices not precomputed");
      return std::make_unique<StaticPricePolicy>(*static_prices);
    }
    case PolicyId::AdaptiveCE: {
      CEInput input = ce_input_from_spec(cfg.distribution, cfg.per_user_capacity);
      std::vector<double> delta(cfg.per_user_capacity);
      for (double& v : delta) v *= pc.delta_fraction;
      return std::make_unique<AdaptiveCEPolicy>(std::move(input), n, std::move(delta), pc.mode,
                                                cfg.oracle.params);
    }
    case PolicyId::RpAdditive:
    case PolicyId::RpMultiplicative: {
      const auto rule = pc.id == PolicyId::RpAdditive ? PriceUpdateRule::Additive
                                                      : PriceUpdateRule::Multiplicative;
      return std::make_unique<RevealedPreferencePolicy>(cfg.per_user_capacity, n, pc.gamma_scale,
                                                        rule, resolve_initial_price(pc, cfg));
    }
    case PolicyId::DynamicSaa:
      return std::make_unique<DynamicSaaPolicy>(cfg.capacity_for(n), n, pc.saa_delta,
                                                resolve_initial_price(pc, cfg),
                                                cfg.oracle.params);
  }
  throw std::logic_error("unknown policy id");
}

inline unsigned resolve_thread_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FISHER_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline void validate_config(const ExperimentConfig& cfg) {
  try {
    validate_spec(cfg.distribution);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("distribution", e.what());
  }
  if (cfg.name.empty()) throw ConfigError("experiment", "must not be empty");
  if (cfg.n_values.empty()) throw ConfigError("n_values", "must not be empty");
  for (std::size_t n : cfg.n_values)
    if (n == 0) throw ConfigError("n_values", "entries must be positive");
  if (cfg.replications == 0) throw ConfigError("replications", "must be at least 1");
  if (cfg.policies.empty()) throw ConfigError("policies", "must not be empty");
  if (cfg.per_user_capacity.size() != cfg.distribution.good_count())
    throw ConfigError("capacity_per_user", "length mismatch with good count");
  for (double d : cfg.per_user_capacity)
    if (!(d > 0.0)) throw ConfigError("capacity_per_user", "entries must be positive");
  for (const PolicyConfig& pc : cfg.policies) {
    if (pc.id == PolicyId::AdaptiveCE) {
      if (!std::holds_alternative<DiscreteSpec>(cfg.distribution.v))
        throw ConfigError("policies", "adaptive_ce needs a discrete distribution");
      if (!(pc.delta_fraction > 0.0) || !(pc.delta_fraction < 1.0))
        throw ConfigError("delta_fraction", "must lie in (0, 1)");
    }
    if ((pc.id == PolicyId::RpAdditive || pc.id == PolicyId::RpMultiplicative) &&
        !(pc.gamma_scale > 0.0))
      throw ConfigError("gamma_scale", "must be positive");
    if (pc.id == PolicyId::DynamicSaa && (!(pc.saa_delta > 1.0) || !(pc.saa_delta <= 2.0)))
      throw ConfigError("delta", "must lie in (1, 2]");
    if (pc.id == PolicyId::StaticEq && pc.prices &&
        pc.prices->size() != cfg.distribution.good_count())
      throw ConfigError("prices", "length mismatch with good count");
  }
}

// One (n, replication) cell: every policy sees the same buyer sequence and
// shares one offline-oracle solve.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
  validate_config(cfg);

  ExperimentReport report;
  report.config = cfg;
  report.config_hash = detail::hash_hex(detail::canonical_config_string(cfg));

  // Per-config SAA prices for static_eq policies without pinned prices.
  std::vector<std::optional<PriceVector>> saa_prices(cfg.policies.size());
  for (std::size_t pi = 0; pi < cfg.policies.size(); ++pi) {
    const PolicyConfig& pc = cfg.policies[pi];
    if (pc.id == PolicyId::StaticEq && !pc.prices) {
      RngStream rng(cfg.seed, 0xFFFFFFFF00000000ULL + pi);
      saa_prices[pi] = static_equilibrium_policy(cfg.distribution, cfg.per_user_capacity,
                                                 pc.sample_count, rng, cfg.oracle.params)
                           ->prices();
    }
  }

  const std::size_t cells = cfg.n_values.size() * cfg.replications;
  const std::size_t n_policies = cfg.policies.size();
  report.rows.assign(cells * n_policies, {});
  std::vector<std::vector<PriceStepRow>> step_dumps(cfg.dump_price_steps ? cfg.n_values.size()
                                                                         : 0);

  std::atomic<std::size_t> next_cell{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t cell = next_cell.fetch_add(1);
      if (cell >= cells) return;
      const std::size_t ni = cell / cfg.replications;
      const std::size_t rep = cell % cfg.replications;
      const std::size_t n = cfg.n_values[ni];
      const std::vector<double> capacities = cfg.capacity_for(n);
      const std::uint64_t stream = (static_cast<std::uint64_t>(ni) << 32) | rep;

      RngStream rng(cfg.seed, stream);
      std::vector<BuyerProfile> buyers;
      buyers.reserve(n);
      for (std::size_t t = 0; t < n; ++t) buyers.push_back(sample_user(cfg.distribution, rng));

      std::optional<double> u_star;  // solved lazily, shared across policies
      for (std::size_t pi = 0; pi < n_policies; ++pi) {
        ExperimentRow& row = report.rows[cell * n_policies + pi];
        row.policy_label = cfg.policies[pi].effective_label();
        row.n = n;
        row.replication = rep;
        try {
          auto policy = build_policy(cfg.policies[pi], cfg, n,
                                     saa_prices[pi] ? &*saa_prices[pi] : nullptr);
          SimulationTrace trace = simulate(buyers, capacities, *policy, cfg.tie_rule);
          if (!trace.breached && !u_star)
            u_star = oracle_objective(buyers, capacities, &cfg.distribution, cfg.oracle);
          row.metrics = compute_metrics(trace, capacities,
                                        u_star.value_or(std::numeric_limits<double>::quiet_NaN()));
          if (cfg.dump_price_steps && rep == 0) {
            auto& out = step_dumps[ni];
            for (std::size_t t = 0; t + 1 < trace.steps.size(); ++t) {
              double s2 = 0.0;
              for (std::size_t j = 0; j < trace.m; ++j) {
                const double dp = trace.steps[t + 1].price[j] - trace.steps[t].price[j];
                s2 += dp * dp;
              }
              const bool in_band =
                  !trace.switch_step || (t + 2 < *trace.switch_step);  // steps are 1-based
              out.push_back({row.policy_label, n, t + 1, std::sqrt(s2), in_band});
            }
          }
        } catch (const std::exception& e) {
          row.error = e.what();
          const double nan = std::numeric_limits<double>::quiet_NaN();
          row.metrics = MetricsReport{};
          row.metrics.u_online = row.metrics.u_star = row.metrics.regret = nan;
          row.metrics.violation_l2 = row.metrics.violation_linf = row.metrics.nsw_ratio = nan;
          row.metrics.max_price = row.metrics.min_price = nan;
        }
      }
    }
  };

  const unsigned nthreads = std::min<std::size_t>(resolve_thread_count(threads), cells);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (auto& dump : step_dumps)
    report.price_steps.insert(report.price_steps.end(), dump.begin(), dump.end());

  // Aggregates: breached or failed rows count toward breach_rate / errors and
  // are excluded from the means.
  for (std::size_t pi = 0; pi < n_policies; ++pi) {
    std::vector<std::pair<double, double>> regret_pts, violation_pts;
    std::vector<std::size_t> policy_aggs;
    for (std::size_t ni = 0; ni < cfg.n_values.size(); ++ni) {
      AggregateRow agg;
      agg.policy_label = cfg.policies[pi].effective_label();
      agg.n = cfg.n_values[ni];
      double sum_r = 0.0, sum_r2 = 0.0, sum_v = 0.0, sum_v2 = 0.0;
      std::size_t used = 0, breached = 0;
      for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
        const ExperimentRow& row =
            report.rows[(ni * cfg.replications + rep) * n_policies + pi];
        if (row.metrics.breach) {
          ++breached;
          continue;
        }
        if (!row.error.empty() || !std::isfinite(row.metrics.regret)) continue;
        ++used;
        sum_r += row.metrics.regret;
        sum_r2 += row.metrics.regret * row.metrics.regret;
        sum_v += row.metrics.violation_l2;
        sum_v2 += row.metrics.violation_l2 * row.metrics.violation_l2;
      }
      agg.used_rows = used;
      agg.breach_rate = static_cast<double>(breached) / static_cast<double>(cfg.replications);
      if (used > 0) {
        agg.mean_regret = sum_r / static_cast<double>(used);
        agg.mean_violation_l2 = sum_v / static_cast<double>(used);
        if (used > 1) {
          const double du = static_cast<double>(used);
          agg.std_regret = std::sqrt(std::max(0.0, (sum_r2 - sum_r * sum_r / du) / (du - 1.0)));
          agg.std_violation_l2 =
              std::sqrt(std::max(0.0, (sum_v2 - sum_v * sum_v / du) / (du - 1.0)));
        }
        if (agg.mean_regret > 0.0)
          regret_pts.push_back({static_cast<double>(agg.n), agg.mean_regret});
        if (agg.mean_violation_l2 > 0.0)
          violation_pts.push_back({static_cast<double>(agg.n), agg.mean_violation_l2});
      } else {
        agg.mean_regret = agg.std_regret = std::numeric_limits<double>::quiet_NaN();
        agg.mean_violation_l2 = agg.std_violation_l2 = std::numeric_limits<double>::quiet_NaN();
      }
      report.aggregates.push_back(agg);
      policy_aggs.push_back(report.aggregates.size() - 1);
    }
    double slope_r = std::numeric_limits<double>::quiet_NaN();
    double slope_v = std::numeric_limits<double>::quiet_NaN();
    if (regret_pts.size() >= 3) slope_r = fit_loglog_slope(regret_pts).slope;
    if (violation_pts.size() >= 3) slope_v = fit_loglog_slope(violation_pts).slope;
    for (std::size_t idx : policy_aggs) {
      report.aggregates[idx].slope_regret = slope_r;
      report.aggregates[idx].slope_violation = slope_v;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline std::string render_rows_csv(const ExperimentReport& report) {
  std::string out =
      "experiment,policy,n,replication,seed,regret,u_star,u_online,violation_l2,"
      "violation_linf,nsw_ratio,max_price,min_price,tau,breach\n";
  for (const ExperimentRow& row : report.rows) {
    const MetricsReport& m = row.metrics;
    out += report.config.name + ',' + row.policy_label + ',' + std::to_string(row.n) + ',' +
           std::to_string(row.replication) + ',' + std::to_string(report.config.seed) + ',' +
           detail::format_double(m.regret) + ',' + detail::format_double(m.u_star) + ',' +
           detail::format_double(m.u_online) + ',' + detail::format_double(m.violation_l2) +
           ',' + detail::format_double(m.violation_linf) + ',' +
           detail::format_double(m.nsw_ratio) + ',' + detail::format_double(m.max_price) + ',' +
           detail::format_double(m.min_price) + ',' +
           (m.tau ? std::to_string(*m.tau) : std::string()) + ',' + (m.breach ? "1" : "0") +
           '\n';
  }
  return out;
}

inline std::string render_aggregate_csv(const ExperimentReport& report) {
  std::string out =
      "experiment,policy,n,mean_regret,std_regret,mean_violation_l2,std_violation_l2,"
      "breach_rate,slope_regret,slope_violation\n";
  for (const AggregateRow& a : report.aggregates) {
    out += report.config.name + ',' + a.policy_label + ',' + std::to_string(a.n) + ',' +
           detail::format_double(a.mean_regret) + ',' + detail::format_double(a.std_regret) +
           ',' + detail::format_double(a.mean_violation_l2) + ',' +
           detail::format_double(a.std_violation_l2) + ',' +
           detail::format_double(a.breach_rate) + ',' + detail::format_double(a.slope_regret) +
           ',' + detail::format_double(a.slope_violation) + '\n';
  }
  return out;
}

inline std::string render_price_steps_csv(const ExperimentReport& report) {
  std::string out = "experiment,policy,n,t,price_delta_l2,in_band\n";
  for (const PriceStepRow& r : report.price_steps) {
    out += report.config.name + ',' + r.policy_label + ',' + std::to_string(r.n) + ',' +
           std::to_string(r.t) + ',' + detail::format_double(r.price_delta_l2) + ',' +
           (r.in_band ? "1" : "0") + '\n';
  }
  return out;
}

struct WrittenFiles {
  std::vector<std::filesystem::path> paths;
};

inline WrittenFiles write_experiment_outputs(const ExperimentReport& report,
                                             const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  WrittenFiles written;
  auto emit = [&](const std::string& suffix, const std::string& content) {
    const fs::path path = dir / (report.config.name + suffix);
    if (!force && fs::exists(path))
      throw std::runtime_error("refusing to overwrite " + path.string() +
                               " (pass --force to allow)");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    written.paths.push_back(path);
  };
  emit("_rows.csv", render_rows_csv(report));
  emit("_agg.csv", render_aggregate_csv(report));
  if (report.config.dump_price_steps) emit("_price_steps.csv", render_price_steps_csv(report));
  std::size_t failed = 0;
  for (const ExperimentRow& r : report.rows)
    if (!r.error.empty()) ++failed;
  emit("_meta.json", std::string("{\"experiment\":\"") + report.config.name +
                         "\",\"config_hash\":\"" + report.config_hash +
                         "\",\"seed\":" + std::to_string(report.config.seed) +
                         ",\"failed_rows\":" + std::to_string(failed) + "}\n");
  return written;
}

// ---------------------------------------------------------------------------
// Presets mirroring the experiment setups the CSV outputs are meant to plot
// ---------------------------------------------------------------------------

inline ExperimentConfig preset(const std::string& name) {
  const std::vector<std::size_t> f2_sweep = {100,  250,  500,  750,  1000, 1250,
                                             1500, 2000, 2500, 3000, 5000};
  ExperimentConfig cfg;
  cfg.name = name;

  auto rp = [](double gamma, PolicyConfig::InitPrice init, std::string label = "") {
    PolicyConfig pc;
    pc.id = PolicyId::RpAdditive;
    pc.gamma_scale = gamma;
    pc.init_price = init;
    pc.label = std::move(label);
    return pc;
  };

  if (name == "fig_theory_bounds") {
    cfg.distribution = f2_benchmark_spec();
    cfg.per_user_capacity = default_per_user_capacity(cfg.distribution);
    cfg.n_values = f2_sweep;
    cfg.replications = 30;
    cfg.policies = {rp(0.01, PolicyConfig::InitPrice::Ones)};
    return cfg;
  }
  if (name == "fig_comparison") {
    cfg.distribution = f2_benchmark_spec();
    cfg.per_user_capacity = default_per_user_capacity(cfg.distribution);
    cfg.n_values = f2_sweep;
    cfg.replications = 30;
    PolicyConfig stat;
    stat.id = PolicyId::StaticEq;
    stat.sample_count = 5000;
    PolicyConfig saa;
    saa.id = PolicyId::DynamicSaa;
    saa.saa_delta = 2.0;
    saa.init_price = PolicyConfig::InitPrice::Ones;
    cfg.policies = {rp(0.01, PolicyConfig::InitPrice::Ones), stat, saa};
    return cfg;
  }
  if (name == "fig_static_vs_adaptive") {
    cfg.distribution = counterexample_spec();
    cfg.per_user_capacity = {1.0, 1.0};
    cfg.n_values = {100, 250, 500, 1000, 2500, 5000, 10000, 20000};
    cfg.replications = 300;
    PolicyConfig stat;
    stat.id = PolicyId::StaticEq;
    stat.prices = PriceVector{0.5, 0.5};
    PolicyConfig ada;
    ada.id = PolicyId::AdaptiveCE;
    cfg.policies = {stat, ada};
    return cfg;
  }
  if (name == "fig_add_vs_mult") {
    cfg.distribution = f2_benchmark_spec();
    cfg.per_user_capacity = default_per_user_capacity(cfg.distribution);
    cfg.n_values = f2_sweep;
    cfg.replications = 30;
    PolicyConfig m1, m2;
    m1.id = m2.id = PolicyId::RpMultiplicative;
    m1.gamma_scale = 1.0;
    m1.init_price = PolicyConfig::InitPrice::Ones;
    m1.label = "rp_multiplicative_D1";
    m2.gamma_scale = 0.01;
    m2.init_price = PolicyConfig::InitPrice::Ones;
    m2.label = "rp_multiplicative_D0.01";
    cfg.policies = {rp(1.0, PolicyConfig::InitPrice::Ones, "rp_additive_D1"), m1,
                    rp(0.01, PolicyConfig::InitPrice::Ones, "rp_additive_D0.01"), m2};
    return cfg;
  }
  if (name == "fig_price_positivity") {
    cfg.distribution = counterexample_spec();
    cfg.per_user_capacity = {1.0, 1.0};
    cfg.n_values = f2_sweep;
    cfg.replications = 300;
    cfg.policies = {rp(0.01, PolicyConfig::InitPrice::Scaled)};
    return cfg;
  }
  if (name == "fig_lipschitz") {
    cfg.distribution = counterexample_spec();
    cfg.per_user_capacity = {1.0, 1.0};
    cfg.n_values = {10000};
    cfg.replications = 1;
    PolicyConfig ada;
    ada.id = PolicyId::AdaptiveCE;
    cfg.policies = {ada};
    cfg.dump_price_steps = true;
    return cfg;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace fisherlab
