#include "rltmle/model_estimation.hpp"

#include <algorithm>
#include <random>

#include "rltmle/errors.hpp"
#include "rltmle/random.hpp"

namespace rltmle {

EmpiricalModel::EmpiricalModel(std::size_t num_observations, std::size_t num_actions,
                               RewardBounds bounds, double smoothing)
    : num_observations_(num_observations),
      num_actions_(num_actions),
      bounds_(bounds),
      smoothing_(smoothing),
      counts_(num_observations * num_actions * num_observations, 0),
      transition_totals_(num_observations * num_actions, 0),
      visits_(num_observations * num_actions, 0),
      reward_sums_(num_observations * num_actions, 0.0) {
  if (num_observations == 0 || num_actions == 0)
    throw ConfigurationError("empirical model needs observations and actions");
  if (!(smoothing >= 0.0)) throw ConfigurationError("smoothing must be non-negative");
}

void EmpiricalModel::add_transition(std::size_t obs, std::size_t action, std::size_t next_obs) {
  ++counts_.at(index(obs, action) * num_observations_ + next_obs);
  ++transition_totals_[index(obs, action)];
}

void EmpiricalModel::add_reward(std::size_t obs, std::size_t action, double reward) {
  ++visits_.at(index(obs, action));
  reward_sums_[index(obs, action)] += reward;
}

std::size_t EmpiricalModel::transition_count(std::size_t obs, std::size_t action,
                                             std::size_t next_obs) const {
  return counts_.at(index(obs, action) * num_observations_ + next_obs);
}

std::size_t EmpiricalModel::visit_count(std::size_t obs, std::size_t action) const {
  return visits_.at(index(obs, action));
}

double EmpiricalModel::reward_sum(std::size_t obs, std::size_t action) const {
  return reward_sums_.at(index(obs, action));
}

double EmpiricalModel::transition_probability(std::size_t obs, std::size_t action,
                                              std::size_t next_obs) const {
  const auto total = static_cast<double>(transition_totals_.at(index(obs, action)));
  const double denominator = total + smoothing_ * static_cast<double>(num_observations_);
  if (denominator == 0.0) return 1.0 / static_cast<double>(num_observations_);
  return (static_cast<double>(transition_count(obs, action, next_obs)) + smoothing_) / denominator;
}

double EmpiricalModel::expected_reward(std::size_t obs, std::size_t action) const {
  const std::size_t visits = visit_count(obs, action);
  if (visits == 0) return std::clamp(0.0, bounds_.min, bounds_.max);
  return std::clamp(reward_sum(obs, action) / static_cast<double>(visits), bounds_.min, bounds_.max);
}

EmpiricalModel fit_empirical_model(const Dataset& dataset, std::size_t num_actions,
                                   const RewardBounds& bounds, double smoothing) {
  if (dataset.empty()) throw ConfigurationError("cannot fit a model on an empty dataset");
  std::size_t num_observations = 0;
  for (std::size_t obs : dataset.observation_map) num_observations = std::max(num_observations, obs + 1);

  EmpiricalModel model(num_observations, num_actions, bounds, smoothing);
  for (const Trajectory& traj : dataset.trajectories) {
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
      const Step& step = traj.steps[t];
      const std::size_t obs = dataset.observation(step.state);
      model.add_reward(obs, step.action, step.reward);
      if (t + 1 < traj.horizon())
        model.add_transition(obs, step.action, dataset.observation(traj.steps[t + 1].state));
    }
  }
  return model;
}

QStack q_from_model(const EmpiricalModel& model, const StochasticPolicy& pi_e,
                    std::size_t horizon, const DiscountSpec& discount) {
  if (pi_e.num_observations() != model.num_observations() ||
      pi_e.num_actions() != model.num_actions())
    throw ConfigurationError("policy does not cover the model's observation space");

  const std::size_t num_obs = model.num_observations();
  const std::size_t num_actions = model.num_actions();
  std::vector<std::size_t> rows(num_obs);
  for (std::size_t o = 0; o < num_obs; ++o) rows[o] = o;
  QStack stack = make_q_stack(QKeying::observation, std::move(rows), num_actions, horizon,
                              model.reward_bounds(), discount);

  std::vector<double> next_values(num_obs, 0.0);
  for (std::size_t t = horizon; t-- > 0;) {
    for (std::size_t o = 0; o < num_obs; ++o) {
      for (std::size_t a = 0; a < num_actions; ++a) {
        double continuation = 0.0;
        for (std::size_t next = 0; next < num_obs; ++next)
          continuation += model.transition_probability(o, a, next) * next_values[next];
        const double q = model.expected_reward(o, a) + discount.gamma() * continuation;
        stack.value(t, o, a) = std::clamp(q, -stack.delta[t], stack.delta[t]);
      }
    }
    next_values = stack.state_values(t, pi_e);
  }
  return stack;
}

QStack inject_bias(const QStack& q, double scale, std::uint64_t seed) {
  if (!(scale >= 0.0)) throw ConfigurationError("bias scale must be non-negative");
  QStack out = q;
  if (scale == 0.0) return out;
  Engine engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& table : out.q)
    for (double& entry : table) entry += scale * normal(engine);
  out.clip_to_range();
  return out;
}

}  // namespace rltmle
