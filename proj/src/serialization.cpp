#include "rltmle/serialization.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "rltmle/errors.hpp"

namespace rltmle {

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd row = m.row(r).transpose();
    rows.push_back(to_json(row));
  }
  return rows;
}

json to_json(const TabularMDP& mdp) {
  json transitions = json::array();
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    json per_action = json::array();
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      json branches = json::array();
      for (const Outcome& o : mdp.outcomes(s, a))
        branches.push_back({{"next", o.next_state}, {"reward", o.reward}, {"p", o.probability}});
      per_action.push_back(std::move(branches));
    }
    transitions.push_back(std::move(per_action));
  }
  return {{"num_states", mdp.num_states()},
          {"num_actions", mdp.num_actions()},
          {"initial_state", mdp.initial_state()},
          {"reward_bounds", {mdp.reward_bounds().min, mdp.reward_bounds().max}},
          {"observation_map", mdp.observation_map()},
          {"terminal_states", mdp.terminal_states()},
          {"transitions", std::move(transitions)}};
}

json to_json(const StochasticPolicy& policy) {
  json tables = json::array();
  for (std::size_t t = 0; t < policy.num_tables(); ++t) {
    json rows = json::array();
    for (std::size_t o = 0; o < policy.num_observations(); ++o) {
      const auto row = policy.row(t, o);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    tables.push_back(std::move(rows));
  }
  return {{"tables", std::move(tables)}};
}

StochasticPolicy policy_from_json(const json& j) {
  try {
    auto tables = j.at("tables").get<std::vector<std::vector<std::vector<double>>>>();
    if (tables.size() == 1) return StochasticPolicy::stationary(std::move(tables.front()));
    return StochasticPolicy::time_varying(std::move(tables));
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed policy: ") + e.what());
  }
}

json to_json(const QStack& q) {
  return {{"keying", q.keying == QKeying::state ? "state" : "observation"},
          {"num_rows", q.num_rows},
          {"num_actions", q.num_actions},
          {"row_observation", q.row_observation},
          {"gamma", q.discount.gamma()},
          {"delta", q.delta},
          {"q", q.q}};
}

json to_json(const RegularizationTriple& triple) {
  return {{"alpha", triple.alpha}, {"tau", triple.tau}, {"lambda", triple.lambda}};
}

RegularizationTriple triple_from_json(const json& j) {
  try {
    if (j.is_array()) return {j.at(0).get<double>(), j.at(1).get<std::size_t>(), j.at(2).get<double>()};
    return {j.at("alpha").get<double>(), j.at("tau").get<std::size_t>(), j.at("lambda").get<double>()};
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed regularization triple: ") + e.what());
  }
}

json to_json(const SecondStageFit& fit) {
  return {{"epsilon", fit.epsilon},
          {"score_residuals", fit.score_residuals},
          {"threshold", fit.threshold_used},
          {"degenerate", fit.degenerate},
          {"at_bound", fit.at_bound}};
}

json to_json(const EnsembleSolution& solution) {
  return {{"x_hat", to_json(solution.x_hat)},
          {"omega_hat", to_json(solution.omega_hat)},
          {"b_hat", to_json(solution.b_hat)},
          {"objective", solution.objective_value},
          {"ci", {solution.ci.lower, solution.ci.upper}},
          {"qp_converged", solution.qp.converged},
          {"qp_kkt_residual", solution.qp.kkt_residual}};
}

json to_json(const RltmleResult& result) {
  json triples = json::array();
  for (const auto& t : result.bank.triples) triples.push_back(to_json(t));
  return {{"estimate", result.estimate},
          {"g", to_json(result.bank.g)},
          {"triples", std::move(triples)},
          {"x_hat", to_json(result.solution.x_hat)},
          {"b_hat", to_json(result.solution.b_hat)},
          {"objective", result.solution.objective_value},
          {"qp_converged", result.solution.qp.converged}};
}

json to_json(const MagicResult& result) {
  return {{"estimate", result.estimate},
          {"g", to_json(result.g)},
          {"x_hat", to_json(result.x_hat)},
          {"b_hat", to_json(result.b_hat)},
          {"ci", {result.ci.lower, result.ci.upper}},
          {"qp_converged", result.qp.converged}};
}

json to_json(const EnvironmentSpec& env) {
  return {{"name", env.name},
          {"default_horizon", env.default_horizon},
          {"mdp", to_json(env.mdp)},
          {"behavior", to_json(env.behavior)},
          {"evaluation", to_json(env.evaluation)}};
}

void write_dataset_jsonl(const Dataset& dataset, std::ostream& out) {
  for (const Trajectory& traj : dataset.trajectories) {
    json states = json::array(), actions = json::array(), rewards = json::array();
    for (const Step& step : traj.steps) {
      states.push_back(step.state);
      actions.push_back(step.action);
      rewards.push_back(step.reward);
    }
    out << json{{"states", std::move(states)}, {"actions", std::move(actions)}, {"rewards", std::move(rewards)}}.dump()
        << '\n';
  }
}

Dataset read_dataset_jsonl(std::istream& in, std::vector<std::size_t> observation_map) {
  Dataset dataset;
  dataset.observation_map = std::move(observation_map);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto states = j.at("states").get<std::vector<std::size_t>>();
      const auto actions = j.at("actions").get<std::vector<std::size_t>>();
      const auto rewards = j.at("rewards").get<std::vector<double>>();
      if (states.size() != actions.size() || states.size() != rewards.size())
        throw ConfigurationError("field lengths differ");
      Trajectory traj;
      for (std::size_t t = 0; t < states.size(); ++t) {
        if (states[t] >= dataset.observation_map.size()) throw ConfigurationError("state out of range");
        traj.steps.push_back({states[t], actions[t], rewards[t]});
      }
      dataset.trajectories.push_back(std::move(traj));
    } catch (const std::exception& e) {
      throw ConfigurationError("dataset line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  if (dataset.empty()) throw ConfigurationError("dataset has no trajectories");
  dataset.horizon = dataset.trajectories.front().horizon();
  dataset.validate();
  return dataset;
}

}  // namespace rltmle
