#pragma once

#include <iosfwd>

#include <json.hpp>

#include "rltmle/baseline.hpp"
#include "rltmle/ensemble.hpp"
#include "rltmle/environments.hpp"
#include "rltmle/ltmle.hpp"
#include "rltmle/mdp.hpp"
#include "rltmle/q_stack.hpp"

namespace rltmle {

using json = nlohmann::json;

json to_json(const TabularMDP& mdp);
json to_json(const StochasticPolicy& policy);
json to_json(const QStack& q);
json to_json(const RegularizationTriple& triple);
json to_json(const SecondStageFit& fit);
json to_json(const EnsembleSolution& solution);
json to_json(const RltmleResult& result);
json to_json(const MagicResult& result);
json to_json(const EnvironmentSpec& env);

StochasticPolicy policy_from_json(const json& j);
RegularizationTriple triple_from_json(const json& j);

json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);

/// One trajectory per line: {"states": [...], "actions": [...], "rewards": [...]}.
void write_dataset_jsonl(const Dataset& dataset, std::ostream& out);

/// Reads trajectories written by write_dataset_jsonl. The observation map is
/// not part of the file and must be supplied. Throws ConfigurationError on
/// malformed lines.
Dataset read_dataset_jsonl(std::istream& in, std::vector<std::size_t> observation_map);

}  // namespace rltmle
