#include "rltmle/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rltmle/environments.hpp"
#include "rltmle/errors.hpp"
#include "rltmle/harness.hpp"
#include "rltmle/serialization.hpp"

namespace rltmle {

namespace {

constexpr int kUsageError = 2;

struct Overrides {
  std::string environment;
  std::size_t horizon = 0;
  double gamma = 1.0;
  std::vector<std::size_t> sample_sizes;
  std::vector<double> misspecification;
  std::size_t trials = 1;
  std::vector<std::string> estimators;
  std::size_t bootstrap = 200;
  double ci_level = 0.1;
  std::uint64_t seed = 0;
  std::string output;
  double split_fraction = 0.5;
  std::size_t folds = 2;
  int workers = 0;
  bool exact_model = false;
  bool record_timing = false;
};

/// Registers flags mirroring the config fields; returns a function that
/// copies the ones actually given onto a config.
auto add_override_flags(CLI::App* cmd, Overrides& o) {
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> flags;
  auto add = [&](CLI::Option* opt, std::function<void(ExperimentConfig&)> apply) {
    flags.emplace_back(opt, std::move(apply));
  };
  add(cmd->add_option("--env", o.environment, "environment name"),
      [&o](ExperimentConfig& c) { c.environment = o.environment; });
  add(cmd->add_option("--horizon", o.horizon, "horizon override (0 keeps the default)"),
      [&o](ExperimentConfig& c) { c.horizon = o.horizon; });
  add(cmd->add_option("--gamma", o.gamma, "discount factor"), [&o](ExperimentConfig& c) { c.gamma = o.gamma; });
  add(cmd->add_option("--sample-sizes", o.sample_sizes, "sample sizes")->delimiter(','),
      [&o](ExperimentConfig& c) { c.sample_sizes = o.sample_sizes; });
  add(cmd->add_option("--misspecification", o.misspecification, "noise scales")->delimiter(','),
      [&o](ExperimentConfig& c) { c.misspecification = o.misspecification; });
  add(cmd->add_option("--trials", o.trials, "trials per cell"), [&o](ExperimentConfig& c) { c.trials = o.trials; });
  add(cmd->add_option("--estimators", o.estimators, "estimator keys")->delimiter(','),
      [&o](ExperimentConfig& c) { c.estimators = o.estimators; });
  add(cmd->add_option("--bootstrap", o.bootstrap, "bootstrap replicates"),
      [&o](ExperimentConfig& c) { c.bootstrap = o.bootstrap; });
  add(cmd->add_option("--ci-level", o.ci_level, "two-sided CI miss probability"),
      [&o](ExperimentConfig& c) { c.ci_level = o.ci_level; });
  add(cmd->add_option("--seed", o.seed, "master seed"), [&o](ExperimentConfig& c) { c.seed = o.seed; });
  add(cmd->add_option("--output,-o", o.output, "results path"), [&o](ExperimentConfig& c) { c.output = o.output; });
  add(cmd->add_option("--split-fraction", o.split_fraction, "targeting fraction"),
      [&o](ExperimentConfig& c) { c.split_fraction = o.split_fraction; });
  add(cmd->add_option("--folds", o.folds, "folds for cvltmle"), [&o](ExperimentConfig& c) { c.folds = o.folds; });
  add(cmd->add_option("--workers", o.workers, "worker threads (0 = all)"),
      [&o](ExperimentConfig& c) { c.workers = o.workers; });
  add(cmd->add_flag("--exact-model", o.exact_model, "use exact Q-functions plus noise"),
      [&o](ExperimentConfig& c) { c.exact_model = o.exact_model; });
  add(cmd->add_flag("--record-timing", o.record_timing, "record wall time per estimator"),
      [&o](ExperimentConfig& c) { c.record_timing = o.record_timing; });
  return [flags](ExperimentConfig& config) {
    for (const auto& [opt, apply] : flags)
      if (opt->count() > 0) apply(config);
  };
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigurationError(path + ": " + e.what());
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Off-policy evaluation with regularized longitudinal TMLE"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a Monte Carlo sweep from a JSON config");
  std::string config_path;
  run->add_option("config", config_path, "config file")->required();
  Overrides run_overrides;
  const auto apply_run = add_override_flags(run, run_overrides);

  auto* report = app.add_subcommand("report", "summarize a results file");
  std::string results_path;
  std::string prefix;
  report->add_option("results", results_path, "results JSONL")->required();
  report->add_option("--prefix", prefix, "output prefix (default: results path without extension)");

  app.add_subcommand("envs", "list environments");

  auto* estimate = app.add_subcommand("estimate", "run estimators on a logged dataset");
  std::string data_path;
  double estimate_scale = 0.0;
  estimate->add_option("--data", data_path, "dataset JSONL")->required();
  estimate->add_option("--scale", estimate_scale, "noise added to the fitted Q");
  Overrides estimate_overrides;
  const auto apply_estimate = add_override_flags(estimate, estimate_overrides);

  auto* simulate_cmd = app.add_subcommand("simulate", "log trajectories under the behavior policy");
  std::string sim_env = "modelwin";
  std::size_t sim_n = 100;
  std::size_t sim_horizon = 0;
  std::uint64_t sim_seed = 0;
  std::string sim_output;
  simulate_cmd->add_option("--env", sim_env, "environment name");
  simulate_cmd->add_option("--n", sim_n, "number of trajectories");
  simulate_cmd->add_option("--horizon", sim_horizon, "horizon override");
  simulate_cmd->add_option("--seed", sim_seed, "seed");
  simulate_cmd->add_option("--output,-o", sim_output, "output path (default stdout)");

  auto* export_env = app.add_subcommand("export-env", "print an environment as JSON");
  std::string export_name;
  std::size_t export_horizon = 0;
  export_env->add_option("name", export_name, "environment name")->required();
  export_env->add_option("--horizon", export_horizon, "horizon override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*run) {
      ExperimentConfig config = config_from_json(read_json_file(config_path));
      apply_run(config);
      config.validate();
      const auto records = run_experiment(config);
      if (config.output.empty() || config.output == "-") {
        write_results(config, records, out);
      } else {
        std::ofstream file(config.output);
        if (!file) throw ConfigurationError("cannot write " + config.output);
        write_results(config, records, file);
        err << "wrote " << records.size() << " records to " << config.output << '\n';
      }
    } else if (*report) {
      if (prefix.empty()) {
        const auto dot = results_path.find_last_of('.');
        const auto slash = results_path.find_last_of('/');
        prefix = (dot != std::string::npos && (slash == std::string::npos || dot > slash))
                     ? results_path.substr(0, dot)
                     : results_path;
      }
      emit_report(results_path, prefix);
      std::ifstream csv(prefix + ".csv");
      out << csv.rdbuf();
    } else if (app.got_subcommand("envs")) {
      for (const auto& name : environment_names()) out << name << '\n';
    } else if (*estimate) {
      ExperimentConfig config;
      config.estimators = {"dm", "wdr", "ltmle"};
      apply_estimate(config);
      const EnvironmentSpec env = make_environment(config.environment, config.horizon);
      std::ifstream in(data_path);
      if (!in) throw ConfigurationError("cannot read " + data_path);
      const Dataset dataset = read_dataset_jsonl(in, env.mdp.observation_map());
      json result = json::object();
      for (const auto& record : run_on_dataset(config, dataset, estimate_scale))
        result[record.estimator] = record.ok ? json(record.estimate) : json({{"error", record.error}});
      out << result.dump(2) << '\n';
    } else if (*simulate_cmd) {
      const EnvironmentSpec env = make_environment(sim_env, sim_horizon);
      const Dataset dataset = simulate(env.mdp, env.behavior, env.default_horizon, sim_n, sim_seed);
      if (sim_output.empty() || sim_output == "-") {
        write_dataset_jsonl(dataset, out);
      } else {
        std::ofstream file(sim_output);
        if (!file) throw ConfigurationError("cannot write " + sim_output);
        write_dataset_jsonl(dataset, file);
      }
    } else if (*export_env) {
      out << to_json(make_environment(export_name, export_horizon)).dump(2) << '\n';
    }
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace rltmle
