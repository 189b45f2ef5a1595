#pragma once

#include <cstddef>
#include <vector>

#include "rltmle/mdp.hpp"
#include "rltmle/q_stack.hpp"

namespace rltmle {

/// A dataset flattened into step-major arrays (index t * n + i) and viewed
/// through the row keying of one QStack. Cumulative importance ratios are
/// computed once here and shared by every estimator.
struct LoggedBatch {
  std::size_t n = 0;
  std::size_t horizon = 0;
  std::size_t initial_row = 0;
  std::vector<std::size_t> row;
  std::vector<std::size_t> action;
  std::vector<double> reward;
  /// ρ_{1:t+1} at index t * n + i.
  std::vector<double> ratio;

  std::size_t at(std::size_t t, std::size_t i) const noexcept { return t * n + i; }
};

/// Throws AbsoluteContinuityError if pi_b never produces a logged action.
LoggedBatch make_batch(const Dataset& dataset, QKeying keying, const StochasticPolicy& pi_e,
                       const StochasticPolicy& pi_b);

inline LoggedBatch make_batch(const Dataset& dataset, const QStack& q, const StochasticPolicy& pi_e,
                              const StochasticPolicy& pi_b) {
  return make_batch(dataset, q.keying, pi_e, pi_b);
}

/// Q̂_t evaluated on every logged step, and V̂_{t+1} on every next state
/// (zero past the horizon). Both are step-major like the batch.
struct BatchValues {
  std::vector<double> q_logged;
  std::vector<double> v_next;
  double v_initial = 0.0;
};

BatchValues evaluate_on_batch(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e);

}  // namespace rltmle
