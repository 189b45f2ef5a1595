#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rltmle/mdp.hpp"

namespace rltmle {

/// A benchmark domain together with its logging and target policies.
struct EnvironmentSpec {
  std::string name;
  TabularMDP mdp;
  StochasticPolicy behavior;
  StochasticPolicy evaluation;
  std::size_t default_horizon = 1;
};

/// Three states; from s1 both actions split between s2 (+1) and s3 (-1)
/// with mirrored 0.4/0.6 probabilities, then return to s1 with reward 0.
EnvironmentSpec make_modelwin(std::size_t horizon = 20);

/// Four states, three of which share one observation. The action taken at
/// s1 decides whether the following step pays +1 or -1.
EnvironmentSpec make_modelfail(std::size_t horizon = 2);

/// 4x4 deterministic grid, states numbered column-major from 1 (s1 top-left,
/// s4 bottom-left, s8 bottom of the second column). Rewards are paid on
/// entering a cell: -1 by default, +1 at s8, -10 at s6, +10 at the terminal.
/// Behavior is the uniform policy; evaluation is a near-deterministic policy
/// that walks to s8 around s6, parks there pushing into the wall, and
/// occasionally steps right into the terminal.
///
/// `terminal_label` is the 1-based cell label of the terminal state.
EnvironmentSpec make_gridworld(std::size_t horizon = 100, std::size_t terminal_label = 12);

/// Names accepted by make_environment, in registration order.
std::vector<std::string> environment_names();

/// Looks an environment up by name; horizon 0 keeps its default.
/// Throws ConfigurationError for unknown names.
EnvironmentSpec make_environment(std::string_view name, std::size_t horizon = 0);

/// Throws AbsoluteContinuityError if pi_e puts mass where pi_b puts none.
void check_absolute_continuity(const StochasticPolicy& pi_e, const StochasticPolicy& pi_b,
                               std::size_t horizon);

}  // namespace rltmle
