#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rltmle {

struct QStack;

/// Range of every per-step reward the model can emit.
struct RewardBounds {
  double min = 0.0;
  double max = 0.0;

  /// max(|r_min|, |r_max|): the per-step contribution to the range bound Δ_t.
  double magnitude() const noexcept;
};

/// One branch of the transition kernel out of a (state, action) pair.
struct Outcome {
  std::size_t next_state = 0;
  double reward = 0.0;
  double probability = 0.0;
};

/// Finite MDP with a deterministic start state and an observation map that
/// may alias several underlying states onto one observation.
class TabularMDP {
 public:
  /// `transitions` is indexed by `state * num_actions + action`.
  /// Throws ConfigurationError when any row is not a distribution, a reward
  /// leaves `bounds`, or an index is out of range.
  TabularMDP(std::size_t num_states, std::size_t num_actions,
             std::vector<std::vector<Outcome>> transitions, std::size_t initial_state,
             RewardBounds bounds, std::vector<std::size_t> observation_map,
             std::vector<std::size_t> terminal_states = {});

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  std::size_t num_observations() const noexcept { return num_observations_; }
  std::size_t initial_state() const noexcept { return initial_state_; }
  const RewardBounds& reward_bounds() const noexcept { return bounds_; }

  std::size_t observation(std::size_t state) const { return observation_map_.at(state); }
  const std::vector<std::size_t>& observation_map() const noexcept { return observation_map_; }
  const std::vector<std::size_t>& terminal_states() const noexcept { return terminal_states_; }
  bool is_terminal(std::size_t state) const noexcept;

  std::span<const Outcome> outcomes(std::size_t state, std::size_t action) const;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::size_t num_observations_ = 0;
  std::vector<std::vector<Outcome>> transitions_;
  std::size_t initial_state_;
  RewardBounds bounds_;
  std::vector<std::size_t> observation_map_;
  std::vector<std::size_t> terminal_states_;
};

/// Action distributions indexed by (time step, observation).
///
/// A stationary policy stores a single table that is reused at every step.
class StochasticPolicy {
 public:
  StochasticPolicy() = default;

  /// One row of action probabilities per observation, reused at every step.
  static StochasticPolicy stationary(std::vector<std::vector<double>> rows);

  /// `tables[t][obs]` is the action distribution at 0-based step t.
  static StochasticPolicy time_varying(std::vector<std::vector<std::vector<double>>> tables);

  std::size_t num_observations() const noexcept { return num_observations_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  bool is_stationary() const noexcept { return tables_.size() == 1; }
  std::size_t num_tables() const noexcept { return tables_.size(); }

  /// Time-varying policies must provide a table for every step below `horizon`.
  bool covers(std::size_t horizon) const noexcept {
    return is_stationary() || tables_.size() >= horizon;
  }

  std::span<const double> row(std::size_t t, std::size_t observation) const;
  double prob(std::size_t t, std::size_t observation, std::size_t action) const {
    return row(t, observation)[action];
  }

 private:
  std::size_t num_observations_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<std::vector<double>> tables_;  // [t][obs * A + a]
};

struct Step {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
};

/// One logged episode. Episodes that hit a terminal state keep stepping
/// through the terminal's zero-reward self loop until the horizon.
struct Trajectory {
  std::vector<Step> steps;

  std::size_t horizon() const noexcept { return steps.size(); }
};

/// n i.i.d. trajectories together with the observation map under which
/// they were logged.
struct Dataset {
  std::vector<Trajectory> trajectories;
  std::vector<std::size_t> observation_map;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return trajectories.size(); }
  bool empty() const noexcept { return trajectories.empty(); }
  std::size_t observation(std::size_t state) const { return observation_map.at(state); }

  /// Trajectories [first, last) as a new dataset sharing the observation map.
  Dataset slice(std::size_t first, std::size_t last) const;

  /// Throws ConfigurationError on ragged horizons or differing start states.
  void validate() const;
};

/// Discount factor. Step t (0-based) is weighted by gamma^t, so the first
/// reward is undiscounted.
class DiscountSpec {
 public:
  explicit DiscountSpec(double gamma = 1.0);

  double gamma() const noexcept { return gamma_; }
  double factor(std::size_t t) const;

 private:
  double gamma_;
};

/// Δ_t for t = 0..T, with Δ_T = 0 and Δ_t = |r|_max + γ Δ_{t+1}.
std::vector<double> range_bounds(const RewardBounds& bounds, std::size_t horizon,
                                 const DiscountSpec& discount);

/// Samples n trajectories under `policy`. Trajectory i draws from its own
/// engine seeded by derive_seed(seed, i).
Dataset simulate(const TabularMDP& mdp, const StochasticPolicy& policy, std::size_t horizon,
                 std::size_t n, std::uint64_t seed);

/// Cumulative importance ratios ρ_{1:t} for t = 1..T (entry t-1 holds ρ_{1:t}).
/// Throws AbsoluteContinuityError when pi_b gives a logged action probability 0.
std::vector<double> importance_ratios(const Trajectory& trajectory,
                                      std::span<const std::size_t> observation_map,
                                      const StochasticPolicy& pi_e, const StochasticPolicy& pi_b);

/// Σ_{τ >= t} γ^{τ-t} r_τ for 0-based t.
double return_to_go(const Trajectory& trajectory, std::size_t t, const DiscountSpec& discount);

/// Exact Q_t^π over underlying states by finite-horizon backward induction.
QStack exact_q_functions(const TabularMDP& mdp, const StochasticPolicy& policy,
                         std::size_t horizon, const DiscountSpec& discount);

/// V_1^π(s_1) under the true model.
double exact_policy_value(const TabularMDP& mdp, const StochasticPolicy& policy,
                          std::size_t horizon, const DiscountSpec& discount);

}  // namespace rltmle
