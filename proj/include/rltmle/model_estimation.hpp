#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rltmle/mdp.hpp"
#include "rltmle/q_stack.hpp"

namespace rltmle {

/// Count-based model of the dynamics over observations.
///
/// Transitions out of the last logged step are never seen (trajectories do
/// not record the state after step T), so transition counts and reward
/// visits are tracked separately.
class EmpiricalModel {
 public:
  EmpiricalModel(std::size_t num_observations, std::size_t num_actions, RewardBounds bounds,
                 double smoothing);

  void add_transition(std::size_t obs, std::size_t action, std::size_t next_obs);
  void add_reward(std::size_t obs, std::size_t action, double reward);

  std::size_t num_observations() const noexcept { return num_observations_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  double smoothing() const noexcept { return smoothing_; }
  const RewardBounds& reward_bounds() const noexcept { return bounds_; }

  std::size_t transition_count(std::size_t obs, std::size_t action, std::size_t next_obs) const;
  std::size_t visit_count(std::size_t obs, std::size_t action) const;
  double reward_sum(std::size_t obs, std::size_t action) const;

  /// (count + λ) / (total + λ |O|); uniform when nothing was observed.
  double transition_probability(std::size_t obs, std::size_t action, std::size_t next_obs) const;

  /// Mean logged reward clipped to the reward bounds; 0 for unseen pairs.
  double expected_reward(std::size_t obs, std::size_t action) const;

 private:
  std::size_t index(std::size_t obs, std::size_t action) const { return obs * num_actions_ + action; }

  std::size_t num_observations_;
  std::size_t num_actions_;
  RewardBounds bounds_;
  double smoothing_;
  std::vector<std::size_t> counts_;          // [(obs * A + a) * O + next]
  std::vector<std::size_t> transition_totals_;
  std::vector<std::size_t> visits_;
  std::vector<double> reward_sums_;
};

/// Maximum-likelihood (additively smoothed) fit over observations.
EmpiricalModel fit_empirical_model(const Dataset& dataset, std::size_t num_actions,
                                   const RewardBounds& bounds, double smoothing = 0.5);

/// Backward induction of pi_e under the fitted model; entries clipped to ±Δ_t.
QStack q_from_model(const EmpiricalModel& model, const StochasticPolicy& pi_e,
                    std::size_t horizon, const DiscountSpec& discount);

/// Adds scale * N(0,1) to every (t, row, action) entry, then re-clips to ±Δ_t.
QStack inject_bias(const QStack& q, double scale, std::uint64_t seed);

}  // namespace rltmle
