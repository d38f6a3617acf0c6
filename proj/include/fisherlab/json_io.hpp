#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "fisherlab/eg.hpp"
#include "fisherlab/errors.hpp"
#include "fisherlab/harness.hpp"
#include "fisherlab/market.hpp"

namespace fisherlab {

using ordered_json = nlohmann::ordered_json;

namespace detail {

// Fail closed: any key outside the allow list is an error, so config drift
// gets caught instead of silently ignored.
inline void expect_keys(const ordered_json& obj, const std::string& ctx,
                        std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(ctx, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw ConfigError(ctx + "." + it.key(), "unknown key");
  }
}

template <typename T>
T require(const ordered_json& obj, const std::string& ctx, const char* key) {
  if (!obj.contains(key)) throw ConfigError(ctx + "." + key, "missing");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(ctx + "." + key, e.what());
  }
}

template <typename T>
T get_or(const ordered_json& obj, const std::string& ctx, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(ctx + "." + key, e.what());
  }
}

}  // namespace detail

// --------------------------- market instances ------------------------------

inline ordered_json instance_to_json(const MarketInstance& inst) {
  ordered_json j;
  j["m"] = inst.good_count;
  j["n"] = inst.user_count;
  j["capacities"] = inst.capacities;
  ordered_json buyers = ordered_json::array();
  for (const BuyerProfile& b : inst.buyers) {
    ordered_json jb;
    jb["budget"] = b.budget;
    jb["utilities"] = b.utilities;
    buyers.push_back(std::move(jb));
  }
  j["buyers"] = std::move(buyers);
  return j;
}

inline MarketInstance instance_from_json(const ordered_json& j) {
  detail::expect_keys(j, "instance", {"m", "n", "capacities", "buyers"});
  const auto m = detail::require<std::size_t>(j, "instance", "m");
  const auto n = detail::require<std::size_t>(j, "instance", "n");
  auto capacities = detail::require<std::vector<double>>(j, "instance", "capacities");
  if (capacities.size() != m) throw ConfigError("instance.capacities", "length mismatch with m");
  if (!j.contains("buyers") || !j.at("buyers").is_array())
    throw ConfigError("instance.buyers", "missing or not an array");
  std::vector<BuyerProfile> buyers;
  for (std::size_t t = 0; t < j.at("buyers").size(); ++t) {
    const ordered_json& jb = j.at("buyers")[t];
    const std::string ctx = "instance.buyers[" + std::to_string(t) + "]";
    detail::expect_keys(jb, ctx, {"budget", "utilities"});
    BuyerProfile b;
    b.budget = detail::require<double>(jb, ctx, "budget");
    b.utilities = detail::require<std::vector<double>>(jb, ctx, "utilities");
    buyers.push_back(std::move(b));
  }
  if (buyers.size() != n) throw ConfigError("instance.buyers", "length mismatch with n");
  try {
    return make_instance(std::move(capacities), std::move(buyers));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("instance", e.what());
  }
}

inline ordered_json solution_to_json(const MarketInstance& inst,
                                     const EquilibriumSolution& sol) {
  ordered_json j = instance_to_json(inst);
  ordered_json rows = ordered_json::array();
  for (std::size_t t = 0; t < sol.buyer_count; ++t) {
    std::vector<double> row(sol.allocations.begin() + t * sol.good_count,
                            sol.allocations.begin() + (t + 1) * sol.good_count);
    rows.push_back(row);
  }
  j["allocations"] = std::move(rows);
  j["prices"] = sol.prices;
  j["gap"] = sol.gap;
  j["primal_value"] = sol.primal_value;
  j["dual_value"] = sol.dual_value;
  return j;
}

// ----------------------------- distributions -------------------------------

inline DistributionSpec distribution_from_json(const ordered_json& j) {
  const std::string ctx = "distribution";
  const auto kind = detail::require<std::string>(j, ctx, "kind");
  DistributionSpec spec;
  if (kind == "counterexample") {
    detail::expect_keys(j, ctx, {"kind", "epsilon"});
    spec = counterexample_spec(detail::get_or<double>(j, ctx, "epsilon", 0.0));
  } else if (kind == "f2_benchmark") {
    detail::expect_keys(j, ctx, {"kind"});
    spec = f2_benchmark_spec();
  } else if (kind == "discrete") {
    detail::expect_keys(j, ctx, {"kind", "types", "probs"});
    DiscreteSpec d;
    if (!j.contains("types") || !j.at("types").is_array())
      throw ConfigError(ctx + ".types", "missing or not an array");
    for (std::size_t k = 0; k < j.at("types").size(); ++k) {
      const std::string tctx = ctx + ".types[" + std::to_string(k) + "]";
      detail::expect_keys(j.at("types")[k], tctx, {"budget", "utilities"});
      BuyerProfile b;
      b.budget = detail::require<double>(j.at("types")[k], tctx, "budget");
      b.utilities = detail::require<std::vector<double>>(j.at("types")[k], tctx, "utilities");
      d.types.push_back(std::move(b));
    }
    d.probs = detail::require<std::vector<double>>(j, ctx, "probs");
    spec = DistributionSpec{std::move(d)};
  } else if (kind == "independent_uniform") {
    detail::expect_keys(j, ctx,
                        {"kind", "budget_values", "budget_probs", "utility_lo", "utility_hi", "m"});
    IndependentUniformSpec u;
    u.budget_values = detail::require<std::vector<double>>(j, ctx, "budget_values");
    u.budget_probs = detail::require<std::vector<double>>(j, ctx, "budget_probs");
    u.utility_lo = detail::require<double>(j, ctx, "utility_lo");
    u.utility_hi = detail::require<double>(j, ctx, "utility_hi");
    u.good_count = detail::require<std::size_t>(j, ctx, "m");
    spec = DistributionSpec{std::move(u)};
  } else {
    throw ConfigError(ctx + ".kind", "unknown kind '" + kind + "'");
  }
  try {
    validate_spec(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ctx, e.what());
  }
  return spec;
}

inline ordered_json distribution_to_json(const DistributionSpec& spec) {
  ordered_json j;
  if (const auto* d = std::get_if<DiscreteSpec>(&spec.v)) {
    j["kind"] = "discrete";
    ordered_json types = ordered_json::array();
    for (const BuyerProfile& b : d->types) {
      ordered_json jb;
      jb["budget"] = b.budget;
      jb["utilities"] = b.utilities;
      types.push_back(std::move(jb));
    }
    j["types"] = std::move(types);
    j["probs"] = d->probs;
  } else {
    const auto& u = std::get<IndependentUniformSpec>(spec.v);
    j["kind"] = "independent_uniform";
    j["budget_values"] = u.budget_values;
    j["budget_probs"] = u.budget_probs;
    j["utility_lo"] = u.utility_lo;
    j["utility_hi"] = u.utility_hi;
    j["m"] = u.good_count;
  }
  return j;
}

// ------------------------------- policies ----------------------------------

inline PolicyConfig policy_from_json(const ordered_json& j, std::size_t index) {
  const std::string ctx = "policies[" + std::to_string(index) + "]";
  const auto id = detail::require<std::string>(j, ctx, "id");
  PolicyConfig pc;
  auto parse_init_price = [&](const char* key) {
    if (!j.contains(key)) return;
    const ordered_json& v = j.at(key);
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "scaled")
        pc.init_price = PolicyConfig::InitPrice::Scaled;
      else if (s == "ones")
        pc.init_price = PolicyConfig::InitPrice::Ones;
      else
        throw ConfigError(ctx + "." + key, "expected \"scaled\", \"ones\", or an array");
    } else if (v.is_array()) {
      pc.init_price = PolicyConfig::InitPrice::Explicit;
      pc.explicit_p1 = v.get<std::vector<double>>();
    } else {
      throw ConfigError(ctx + "." + key, "expected \"scaled\", \"ones\", or an array");
    }
  };

  if (id == "static_eq") {
    detail::expect_keys(j, ctx, {"id", "label", "prices", "sample_count"});
    pc.id = PolicyId::StaticEq;
    if (j.contains("prices"))
      pc.prices = detail::require<std::vector<double>>(j, ctx, "prices");
    pc.sample_count = detail::get_or<std::size_t>(j, ctx, "sample_count", 5000);
  } else if (id == "adaptive_ce") {
    detail::expect_keys(j, ctx, {"id", "label", "delta_fraction", "mode"});
    pc.id = PolicyId::AdaptiveCE;
    pc.delta_fraction = detail::get_or<double>(j, ctx, "delta_fraction", 0.5);
    const auto mode = detail::get_or<std::string>(j, ctx, "mode", "best_response");
    if (mode == "best_response")
      pc.mode = ConsumptionMode::BestResponse;
    else if (mode == "allocation_from_ce")
      pc.mode = ConsumptionMode::AllocationFromCE;
    else
      throw ConfigError(ctx + ".mode", "expected \"best_response\" or \"allocation_from_ce\"");
  } else if (id == "rp_additive" || id == "rp_multiplicative") {
    detail::expect_keys(j, ctx, {"id", "label", "gamma_scale", "initial_price"});
    pc.id = id == "rp_additive" ? PolicyId::RpAdditive : PolicyId::RpMultiplicative;
    pc.gamma_scale = detail::get_or<double>(j, ctx, "gamma_scale", 0.01);
    parse_init_price("initial_price");
  } else if (id == "dynamic_saa") {
    detail::expect_keys(j, ctx, {"id", "label", "delta", "initial_price"});
    pc.id = PolicyId::DynamicSaa;
    pc.saa_delta = detail::get_or<double>(j, ctx, "delta", 2.0);
    pc.init_price = PolicyConfig::InitPrice::Ones;
    parse_init_price("initial_price");
  } else {
    throw ConfigError(ctx + ".id", "unknown policy id '" + id + "'");
  }
  pc.label = detail::get_or<std::string>(j, ctx, "label", "");
  return pc;
}

// ------------------------------ experiments --------------------------------

inline ExperimentConfig config_from_json(const ordered_json& j) {
  const std::string ctx = "config";
  detail::expect_keys(j, ctx,
                      {"experiment", "distribution", "capacity_per_user", "n_values",
                       "replications", "seed", "policies", "oracle", "tie_rule",
                       "dump_price_steps", "output"});
  ExperimentConfig cfg;
  cfg.name = detail::require<std::string>(j, ctx, "experiment");
  if (!j.contains("distribution")) throw ConfigError("distribution", "missing");
  cfg.distribution = distribution_from_json(j.at("distribution"));
  cfg.per_user_capacity = detail::get_or<std::vector<double>>(
      j, ctx, "capacity_per_user", default_per_user_capacity(cfg.distribution));
  cfg.n_values = detail::require<std::vector<std::size_t>>(j, ctx, "n_values");
  cfg.replications = detail::get_or<std::size_t>(j, ctx, "replications", 30);
  cfg.seed = detail::get_or<std::uint64_t>(j, ctx, "seed", 1);
  if (!j.contains("policies") || !j.at("policies").is_array() || j.at("policies").empty())
    throw ConfigError("policies", "missing or empty");
  for (std::size_t i = 0; i < j.at("policies").size(); ++i)
    cfg.policies.push_back(policy_from_json(j.at("policies")[i], i));

  if (j.contains("oracle")) {
    const std::string octx = "oracle";
    const ordered_json& jo = j.at("oracle");
    detail::expect_keys(jo, octx,
                        {"max_iters", "gap_tol", "feas_tol", "clear_tol", "price_eps", "step_a",
                         "step_b", "price_floor", "subgradient_iters", "force_iterative"});
    SolverParams& sp = cfg.oracle.params;
    sp.max_iters = detail::get_or<std::size_t>(jo, octx, "max_iters", sp.max_iters);
    sp.gap_tol = detail::get_or<double>(jo, octx, "gap_tol", sp.gap_tol);
    sp.feas_tol = detail::get_or<double>(jo, octx, "feas_tol", sp.feas_tol);
    sp.clear_tol = detail::get_or<double>(jo, octx, "clear_tol", sp.clear_tol);
    sp.price_eps = detail::get_or<double>(jo, octx, "price_eps", sp.price_eps);
    sp.step_a = detail::get_or<double>(jo, octx, "step_a", sp.step_a);
    sp.step_b = detail::get_or<double>(jo, octx, "step_b", sp.step_b);
    sp.price_floor = detail::get_or<double>(jo, octx, "price_floor", sp.price_floor);
    sp.subgradient_iters =
        detail::get_or<std::size_t>(jo, octx, "subgradient_iters", sp.subgradient_iters);
    cfg.oracle.force_iterative = detail::get_or<bool>(jo, octx, "force_iterative", false);
  }

  const auto tie = detail::get_or<std::string>(j, ctx, "tie_rule", "lowest_index");
  if (tie == "lowest_index")
    cfg.tie_rule = TieRule::LowestIndex;
  else if (tie == "uniform_split")
    cfg.tie_rule = TieRule::UniformSplit;
  else
    throw ConfigError("tie_rule", "expected \"lowest_index\" or \"uniform_split\"");

  cfg.dump_price_steps = detail::get_or<bool>(j, ctx, "dump_price_steps", false);
  cfg.output_dir = detail::get_or<std::string>(j, ctx, "output", "out");
  validate_config(cfg);
  return cfg;
}

inline ordered_json load_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path.string(), "cannot open file");
  try {
    return ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string(), e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(load_json_file(path));
}

inline MarketInstance load_instance(const std::filesystem::path& path) {
  return instance_from_json(load_json_file(path));
}

}  // namespace fisherlab
