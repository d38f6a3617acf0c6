#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fisherlab/harness.hpp"
#include "fisherlab/json_io.hpp"

namespace fisherlab {

namespace cli_detail {

inline int run_and_write(ExperimentConfig cfg, const std::string& out_override, bool force,
                         unsigned threads, std::ostream& out) {
  if (!out_override.empty()) cfg.output_dir = out_override;
  ExperimentReport report = run_experiment(cfg, threads);
  const WrittenFiles files = write_experiment_outputs(report, cfg.output_dir, force);
  for (const auto& p : files.paths) out << "wrote " << p.string() << "\n";

  std::size_t breached = 0, failed = 0;
  for (const ExperimentRow& r : report.rows) {
    if (r.metrics.breach) ++breached;
    if (!r.error.empty()) ++failed;
  }
  if (failed > 0) {
    std::cerr << failed << " rows failed; first error: ";
    for (const ExperimentRow& r : report.rows)
      if (!r.error.empty()) {
        std::cerr << r.error << "\n";
        break;
      }
  }
  if (breached + failed >= report.rows.size()) {
    std::cerr << "no replication produced metrics\n";
    return 2;
  }
  return 0;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout) {
  CLI::App app{"Online Fisher market pricing experiments"};
  app.require_subcommand(1);

  std::string config_path, preset_name, instance_path, out_dir, dump_path;
  std::vector<std::size_t> n_override;
  std::size_t reps_override = 0;
  std::uint64_t seed_override = 0;
  bool force = false;
  unsigned threads = 0;

  CLI::App* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_flag("--force", force, "overwrite existing output files");
  run->add_option("--threads", threads, "cap worker threads");

  CLI::App* pre = app.add_subcommand("preset", "Run a named built-in experiment");
  pre->add_option("name", preset_name, "preset name")->required();
  pre->add_option("--n", n_override, "override the list of user counts");
  pre->add_option("--reps", reps_override, "override the replication count");
  pre->add_option("--seed", seed_override, "override the seed");
  pre->add_option("--out", out_dir, "output directory");
  pre->add_flag("--force", force, "overwrite existing output files");
  pre->add_option("--threads", threads, "cap worker threads");

  CLI::App* solve = app.add_subcommand("solve", "Solve the offline program for an instance file");
  solve->add_option("instance", instance_path, "market instance (JSON)")->required();
  solve->add_option("--dump", dump_path, "write the full solution as JSON");

  CLI::App* val = app.add_subcommand("validate", "Check an experiment config without running it");
  val->add_option("config", config_path, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      return cli_detail::run_and_write(load_config(config_path), out_dir, force, threads, out);
    }
    if (pre->parsed()) {
      ExperimentConfig cfg = preset(preset_name);
      if (!n_override.empty()) cfg.n_values = n_override;
      if (reps_override > 0) cfg.replications = reps_override;
      if (pre->count("--seed") > 0) cfg.seed = seed_override;
      return cli_detail::run_and_write(std::move(cfg), out_dir, force, threads, out);
    }
    if (solve->parsed()) {
      const MarketInstance inst = load_instance(instance_path);
      const EquilibriumSolution sol = solve_eg_primal(inst);
      out << "prices:";
      for (double p : sol.prices) out << ' ' << detail::format_double(p);
      out << "\nprimal_value: " << detail::format_double(sol.primal_value)
          << "\ndual_value: " << detail::format_double(sol.dual_value)
          << "\ngap: " << detail::format_double(sol.gap)
          << "\niterations: " << sol.iterations << "\n";
      if (!dump_path.empty()) {
        std::ofstream f(dump_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + dump_path);
        f << solution_to_json(inst, sol).dump(2) << "\n";
        out << "wrote " << dump_path << "\n";
      }
      return 0;
    }
    if (val->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      out << "ok: " << cfg.name << " ("
          << detail::hash_hex(detail::canonical_config_string(cfg)) << ")\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const MaxItersError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace fisherlab
