#pragma once

#include <cstddef>
#include <vector>

#include "rltmle/mdp.hpp"

namespace rltmle {

/// Whether the rows of a QStack are underlying states or observations.
enum class QKeying { state, observation };

/// Per-step tabular action-value estimates Q̂_1..Q̂_T with their range bounds.
struct QStack {
  QKeying keying = QKeying::observation;
  std::size_t num_rows = 0;
  std::size_t num_actions = 0;
  /// Observation seen by the agent in each row (identity for observation keying).
  std::vector<std::size_t> row_observation;
  /// q[t][row * num_actions + action], t = 0..T-1.
  std::vector<std::vector<double>> q;
  /// Δ_t for t = 0..T; delta[T] == 0.
  std::vector<double> delta;
  DiscountSpec discount;

  std::size_t horizon() const noexcept { return q.size(); }

  double value(std::size_t t, std::size_t row, std::size_t action) const {
    return q[t][row * num_actions + action];
  }
  double& value(std::size_t t, std::size_t row, std::size_t action) {
    return q[t][row * num_actions + action];
  }

  /// Row used for a logged state under this stack's keying.
  std::size_t row_of(std::size_t state, const std::vector<std::size_t>& observation_map) const {
    return keying == QKeying::state ? state : observation_map.at(state);
  }

  /// V_t(row) = Σ_a π(a | obs(row)) Q_t(row, a); all zeros for t == T.
  std::vector<double> state_values(std::size_t t, const StochasticPolicy& policy) const;

  /// Clamps every entry into [-Δ_t, Δ_t].
  void clip_to_range();
};

/// A zero-initialized stack with range bounds for `horizon` steps.
QStack make_q_stack(QKeying keying, std::vector<std::size_t> row_observation,
                    std::size_t num_actions, std::size_t horizon, const RewardBounds& bounds,
                    const DiscountSpec& discount);

}  // namespace rltmle
