#include "rltmle/logged_batch.hpp"

#include <string>

#include "rltmle/errors.hpp"

namespace rltmle {

LoggedBatch make_batch(const Dataset& dataset, QKeying keying, const StochasticPolicy& pi_e,
                       const StochasticPolicy& pi_b) {
  if (dataset.empty()) throw ConfigurationError("dataset is empty");
  LoggedBatch batch;
  batch.n = dataset.size();
  batch.horizon = dataset.horizon;
  const std::size_t cells = batch.n * batch.horizon;
  batch.row.resize(cells);
  batch.action.resize(cells);
  batch.reward.resize(cells);
  batch.ratio.resize(cells);

  auto row_of = [&](std::size_t state) {
    return keying == QKeying::state ? state : dataset.observation(state);
  };
  for (std::size_t i = 0; i < batch.n; ++i) {
    const Trajectory& traj = dataset.trajectories[i];
    if (traj.horizon() != batch.horizon)
      throw ConfigurationError("trajectory " + std::to_string(i) + " has the wrong length");
    const std::vector<double> rho = importance_ratios(traj, dataset.observation_map, pi_e, pi_b);
    for (std::size_t t = 0; t < batch.horizon; ++t) {
      const std::size_t k = batch.at(t, i);
      batch.row[k] = row_of(traj.steps[t].state);
      batch.action[k] = traj.steps[t].action;
      batch.reward[k] = traj.steps[t].reward;
      batch.ratio[k] = rho[t];
    }
  }
  batch.initial_row = batch.row[0];
  return batch;
}

BatchValues evaluate_on_batch(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e) {
  if (q.horizon() != batch.horizon) throw ConfigurationError("Q stack horizon differs from the data");
  BatchValues values;
  values.q_logged.resize(batch.n * batch.horizon);
  values.v_next.assign(batch.n * batch.horizon, 0.0);
  std::vector<double> v_current = q.state_values(0, pi_e);
  values.v_initial = v_current.at(batch.initial_row);
  for (std::size_t t = 0; t < batch.horizon; ++t) {
    const std::vector<double> v_next = q.state_values(t + 1, pi_e);
    for (std::size_t i = 0; i < batch.n; ++i) {
      const std::size_t k = batch.at(t, i);
      values.q_logged[k] = q.value(t, batch.row[k], batch.action[k]);
      if (t + 1 < batch.horizon) values.v_next[k] = v_next.at(batch.row[batch.at(t + 1, i)]);
    }
  }
  return values;
}

}  // namespace rltmle
