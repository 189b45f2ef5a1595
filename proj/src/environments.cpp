#include "rltmle/environments.hpp"

#include <array>
#include <deque>
#include <limits>
#include <string>

#include "rltmle/errors.hpp"

namespace rltmle {

namespace {

constexpr std::size_t kGridSide = 4;
constexpr std::size_t kGridCells = kGridSide * kGridSide;

enum GridAction : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

std::size_t grid_index(std::size_t col, std::size_t row) { return col * kGridSide + row; }

std::size_t grid_move(std::size_t cell, std::size_t action) {
  std::size_t col = cell / kGridSide;
  std::size_t row = cell % kGridSide;
  switch (action) {
    case kUp: row = row == 0 ? row : row - 1; break;
    case kDown: row = row + 1 == kGridSide ? row : row + 1; break;
    case kLeft: col = col == 0 ? col : col - 1; break;
    default: col = col + 1 == kGridSide ? col : col + 1; break;
  }
  return grid_index(col, row);
}

std::vector<std::vector<double>> uniform_rows(std::size_t observations, std::size_t actions) {
  return std::vector<std::vector<double>>(observations,
                                          std::vector<double>(actions, 1.0 / static_cast<double>(actions)));
}

}  // namespace

EnvironmentSpec make_modelwin(std::size_t horizon) {
  constexpr std::size_t s1 = 0, s2 = 1, s3 = 2;
  std::vector<std::vector<Outcome>> transitions(3 * 2);
  transitions[s1 * 2 + 0] = {{s2, 1.0, 0.4}, {s3, -1.0, 0.6}};
  transitions[s1 * 2 + 1] = {{s2, 1.0, 0.6}, {s3, -1.0, 0.4}};
  for (std::size_t s : {s2, s3})
    for (std::size_t a = 0; a < 2; ++a) transitions[s * 2 + a] = {{s1, 0.0, 1.0}};

  TabularMDP mdp(3, 2, std::move(transitions), s1, RewardBounds{-1.0, 1.0}, {0, 1, 2});
  auto behavior = StochasticPolicy::stationary({{0.73, 0.27}, {0.5, 0.5}, {0.5, 0.5}});
  auto evaluation = StochasticPolicy::stationary({{0.27, 0.73}, {0.5, 0.5}, {0.5, 0.5}});
  return EnvironmentSpec{"modelwin", std::move(mdp), std::move(behavior), std::move(evaluation),
                         horizon};
}

EnvironmentSpec make_modelfail(std::size_t horizon) {
  constexpr std::size_t s1 = 0, s2 = 1, s3 = 2, s4 = 3;
  std::vector<std::vector<Outcome>> transitions(4 * 2);
  transitions[s1 * 2 + 0] = {{s2, 0.0, 1.0}};
  transitions[s1 * 2 + 1] = {{s3, 0.0, 1.0}};
  for (std::size_t a = 0; a < 2; ++a) {
    transitions[s2 * 2 + a] = {{s4, 1.0, 1.0}};
    transitions[s3 * 2 + a] = {{s4, -1.0, 1.0}};
    transitions[s4 * 2 + a] = {{s4, 0.0, 1.0}};
  }

  TabularMDP mdp(4, 2, std::move(transitions), s1, RewardBounds{-1.0, 1.0}, {0, 0, 0, 1}, {s4});
  auto behavior = StochasticPolicy::stationary({{0.88, 0.12}, {0.5, 0.5}});
  auto evaluation = StochasticPolicy::stationary({{0.12, 0.88}, {0.5, 0.5}});
  return EnvironmentSpec{"modelfail", std::move(mdp), std::move(behavior), std::move(evaluation),
                         horizon};
}

EnvironmentSpec make_gridworld(std::size_t horizon, std::size_t terminal_label) {
  if (terminal_label < 1 || terminal_label > kGridCells)
    throw ConfigurationError("gridworld terminal label must be in 1..16");
  const std::size_t terminal = terminal_label - 1;
  const std::size_t bonus = grid_index(1, 3);    // s8
  const std::size_t penalty = grid_index(1, 1);  // s6

  auto entry_reward = [&](std::size_t cell) {
    if (cell == terminal) return 10.0;
    if (cell == penalty) return -10.0;
    if (cell == bonus) return 1.0;
    return -1.0;
  };

  std::vector<std::vector<Outcome>> transitions(kGridCells * 4);
  for (std::size_t s = 0; s < kGridCells; ++s) {
    for (std::size_t a = 0; a < 4; ++a) {
      if (s == terminal) {
        transitions[s * 4 + a] = {{s, 0.0, 1.0}};
      } else {
        const std::size_t next = grid_move(s, a);
        transitions[s * 4 + a] = {{next, entry_reward(next), 1.0}};
      }
    }
  }
  std::vector<std::size_t> identity(kGridCells);
  for (std::size_t s = 0; s < kGridCells; ++s) identity[s] = s;
  TabularMDP mdp(kGridCells, 4, std::move(transitions), grid_index(0, 0),
                 RewardBounds{-10.0, 10.0}, identity, {terminal});

  // Breadth-first distances to s8 through cells other than s6 and the terminal.
  constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
  std::array<std::size_t, kGridCells> distance;
  distance.fill(kUnreached);
  distance[bonus] = 0;
  std::deque<std::size_t> frontier{bonus};
  while (!frontier.empty()) {
    const std::size_t cell = frontier.front();
    frontier.pop_front();
    for (std::size_t s = 0; s < kGridCells; ++s) {
      if (s == penalty || s == terminal || distance[s] != kUnreached) continue;
      for (std::size_t a = 0; a < 4; ++a) {
        if (grid_move(s, a) == cell) {
          distance[s] = distance[cell] + 1;
          frontier.push_back(s);
          break;
        }
      }
    }
  }

  auto prescribed_action = [&](std::size_t s) {
    if (s == bonus) return std::size_t{kDown};
    std::size_t best = kUp;
    std::size_t best_distance = kUnreached;
    for (std::size_t a = 0; a < 4; ++a) {
      const std::size_t next = grid_move(s, a);
      if (next == s || next == penalty || next == terminal) continue;
      if (distance[next] < best_distance) {
        best_distance = distance[next];
        best = a;
      }
    }
    return best;
  };

  constexpr double kPrescribed = 0.99;
  constexpr double kOther = (1.0 - kPrescribed) / 3.0;
  std::vector<std::vector<double>> near_optimal = uniform_rows(kGridCells, 4);
  for (std::size_t s = 0; s < kGridCells; ++s) {
    if (s == terminal) continue;
    std::vector<double>& row = near_optimal[s];
    const std::size_t chosen = prescribed_action(s);
    for (std::size_t a = 0; a < 4; ++a) row[a] = a == chosen ? kPrescribed : kOther;
  }

  return EnvironmentSpec{"gridworld", std::move(mdp),
                         StochasticPolicy::stationary(uniform_rows(kGridCells, 4)),
                         StochasticPolicy::stationary(std::move(near_optimal)), horizon};
}

std::vector<std::string> environment_names() { return {"modelwin", "modelfail", "gridworld"}; }

EnvironmentSpec make_environment(std::string_view name, std::size_t horizon) {
  if (name == "modelwin") return make_modelwin(horizon == 0 ? 20 : horizon);
  if (name == "modelfail") return make_modelfail(horizon == 0 ? 2 : horizon);
  if (name == "gridworld") return make_gridworld(horizon == 0 ? 100 : horizon);
  throw ConfigurationError("unknown environment '" + std::string(name) + "'");
}

void check_absolute_continuity(const StochasticPolicy& pi_e, const StochasticPolicy& pi_b,
                               std::size_t horizon) {
  if (pi_e.num_observations() != pi_b.num_observations() ||
      pi_e.num_actions() != pi_b.num_actions())
    throw ConfigurationError("policies are defined over different spaces");
  const std::size_t steps = (pi_e.is_stationary() && pi_b.is_stationary()) ? 1 : horizon;
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t o = 0; o < pi_e.num_observations(); ++o)
      for (std::size_t a = 0; a < pi_e.num_actions(); ++a)
        if (pi_e.prob(t, o, a) > 0.0 && pi_b.prob(t, o, a) <= 0.0)
          throw AbsoluteContinuityError("evaluation policy is not dominated by behavior policy at obs " +
                                        std::to_string(o) + ", action " + std::to_string(a));
}

}  // namespace rltmle
