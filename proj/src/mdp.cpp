#include "rltmle/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rltmle/errors.hpp"
#include "rltmle/q_stack.hpp"
#include "rltmle/random.hpp"

namespace rltmle {

namespace {

constexpr double kProbabilityTolerance = 1e-12;

void check_distribution(std::span<const double> row, const std::string& what) {
  double total = 0.0;
  for (double p : row) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigurationError(what + ": probability outside [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance)
    throw ConfigurationError(what + ": probabilities sum to " + std::to_string(total));
}

std::size_t sample_index(std::span<const double> probs, Engine& engine) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(engine);
  double cumulative = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    cumulative += probs[k];
    if (u < cumulative) return k;
  }
  // Walk back over trailing zero-probability entries.
  std::size_t k = probs.size() - 1;
  while (k > 0 && probs[k] == 0.0) --k;
  return k;
}

}  // namespace

double RewardBounds::magnitude() const noexcept { return std::max(std::abs(min), std::abs(max)); }

TabularMDP::TabularMDP(std::size_t num_states, std::size_t num_actions,
                       std::vector<std::vector<Outcome>> transitions, std::size_t initial_state,
                       RewardBounds bounds, std::vector<std::size_t> observation_map,
                       std::vector<std::size_t> terminal_states)
    : num_states_(num_states),
      num_actions_(num_actions),
      transitions_(std::move(transitions)),
      initial_state_(initial_state),
      bounds_(bounds),
      observation_map_(std::move(observation_map)),
      terminal_states_(std::move(terminal_states)) {
  if (num_states_ == 0 || num_actions_ == 0)
    throw ConfigurationError("MDP needs at least one state and one action");
  if (transitions_.size() != num_states_ * num_actions_)
    throw ConfigurationError("transition table must have num_states * num_actions rows");
  if (initial_state_ >= num_states_) throw ConfigurationError("initial state out of range");
  if (!(bounds_.min <= bounds_.max) || !std::isfinite(bounds_.min) || !std::isfinite(bounds_.max))
    throw ConfigurationError("reward bounds must be finite with min <= max");
  if (bounds_.magnitude() == 0.0)
    throw ConfigurationError("reward bounds must not both be zero");
  if (observation_map_.size() != num_states_)
    throw ConfigurationError("observation map must cover every state");

  for (std::size_t obs : observation_map_) num_observations_ = std::max(num_observations_, obs + 1);
  std::vector<bool> seen(num_observations_, false);
  for (std::size_t obs : observation_map_) seen[obs] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ConfigurationError("observation indices must be contiguous from 0");

  for (std::size_t s : terminal_states_)
    if (s >= num_states_) throw ConfigurationError("terminal state out of range");
  std::sort(terminal_states_.begin(), terminal_states_.end());
  terminal_states_.erase(std::unique(terminal_states_.begin(), terminal_states_.end()),
                         terminal_states_.end());

  for (std::size_t s = 0; s < num_states_; ++s) {
    for (std::size_t a = 0; a < num_actions_; ++a) {
      const auto& row = transitions_[s * num_actions_ + a];
      const std::string where = "transition (" + std::to_string(s) + "," + std::to_string(a) + ")";
      if (row.empty()) throw ConfigurationError(where + " has no outcomes");
      std::vector<double> probs;
      probs.reserve(row.size());
      for (const Outcome& o : row) {
        if (o.next_state >= num_states_) throw ConfigurationError(where + ": next state out of range");
        if (o.reward < bounds_.min || o.reward > bounds_.max)
          throw ConfigurationError(where + ": reward outside reward bounds");
        probs.push_back(o.probability);
      }
      check_distribution(probs, where);
    }
  }
}

bool TabularMDP::is_terminal(std::size_t state) const noexcept {
  return std::binary_search(terminal_states_.begin(), terminal_states_.end(), state);
}

std::span<const Outcome> TabularMDP::outcomes(std::size_t state, std::size_t action) const {
  return transitions_.at(state * num_actions_ + action);
}

StochasticPolicy StochasticPolicy::stationary(std::vector<std::vector<double>> rows) {
  return time_varying({std::move(rows)});
}

StochasticPolicy StochasticPolicy::time_varying(
    std::vector<std::vector<std::vector<double>>> tables) {
  if (tables.empty() || tables.front().empty() || tables.front().front().empty())
    throw ConfigurationError("policy needs at least one observation and one action");
  StochasticPolicy policy;
  policy.num_observations_ = tables.front().size();
  policy.num_actions_ = tables.front().front().size();
  for (std::size_t t = 0; t < tables.size(); ++t) {
    if (tables[t].size() != policy.num_observations_)
      throw ConfigurationError("policy tables disagree on the number of observations");
    std::vector<double> flat;
    flat.reserve(policy.num_observations_ * policy.num_actions_);
    for (std::size_t o = 0; o < tables[t].size(); ++o) {
      const auto& row = tables[t][o];
      if (row.size() != policy.num_actions_)
        throw ConfigurationError("policy rows disagree on the number of actions");
      check_distribution(row, "policy row (t=" + std::to_string(t) + ", obs=" + std::to_string(o) + ")");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    policy.tables_.push_back(std::move(flat));
  }
  return policy;
}

std::span<const double> StochasticPolicy::row(std::size_t t, std::size_t observation) const {
  const auto& table = tables_.size() == 1 ? tables_.front() : tables_.at(t);
  if (observation >= num_observations_) throw ConfigurationError("observation outside policy domain");
  return std::span<const double>(table).subspan(observation * num_actions_, num_actions_);
}

Dataset Dataset::slice(std::size_t first, std::size_t last) const {
  Dataset out;
  out.observation_map = observation_map;
  out.horizon = horizon;
  out.seed = seed;
  out.trajectories.assign(trajectories.begin() + static_cast<std::ptrdiff_t>(first),
                          trajectories.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

void Dataset::validate() const {
  for (const Trajectory& traj : trajectories) {
    if (traj.horizon() != horizon) throw ConfigurationError("trajectory length differs from horizon");
    if (traj.steps.front().state != trajectories.front().steps.front().state)
      throw ConfigurationError("trajectories start from different states");
    for (const Step& step : traj.steps)
      if (step.state >= observation_map.size())
        throw ConfigurationError("logged state outside the observation map");
  }
}

DiscountSpec::DiscountSpec(double gamma) : gamma_(gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigurationError("discount must lie in (0, 1]");
}

double DiscountSpec::factor(std::size_t t) const {
  return gamma_ == 1.0 ? 1.0 : std::pow(gamma_, static_cast<double>(t));
}

std::vector<double> range_bounds(const RewardBounds& bounds, std::size_t horizon,
                                 const DiscountSpec& discount) {
  std::vector<double> delta(horizon + 1, 0.0);
  for (std::size_t t = horizon; t-- > 0;)
    delta[t] = bounds.magnitude() + discount.gamma() * delta[t + 1];
  return delta;
}

Dataset simulate(const TabularMDP& mdp, const StochasticPolicy& policy, std::size_t horizon,
                 std::size_t n, std::uint64_t seed) {
  if (horizon == 0) throw ConfigurationError("horizon must be at least 1");
  if (policy.num_observations() != mdp.num_observations() ||
      policy.num_actions() != mdp.num_actions())
    throw ConfigurationError("policy dimensions do not match the MDP observation/action spaces");
  if (!policy.covers(horizon)) throw ConfigurationError("policy has fewer tables than the horizon");

  Dataset data;
  data.observation_map = mdp.observation_map();
  data.horizon = horizon;
  data.seed = seed;
  data.trajectories.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Engine engine = make_engine(derive_seed(seed, i));
    Trajectory& traj = data.trajectories[i];
    traj.steps.reserve(horizon);
    std::size_t state = mdp.initial_state();
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t action = sample_index(policy.row(t, mdp.observation(state)), engine);
      const auto outcomes = mdp.outcomes(state, action);
      std::vector<double> probs(outcomes.size());
      std::transform(outcomes.begin(), outcomes.end(), probs.begin(),
                     [](const Outcome& o) { return o.probability; });
      const Outcome& next = outcomes[sample_index(probs, engine)];
      traj.steps.push_back(Step{state, action, next.reward});
      state = next.next_state;
    }
  }
  return data;
}

std::vector<double> importance_ratios(const Trajectory& trajectory,
                                      std::span<const std::size_t> observation_map,
                                      const StochasticPolicy& pi_e, const StochasticPolicy& pi_b) {
  std::vector<double> ratios(trajectory.horizon());
  double rho = 1.0;
  for (std::size_t t = 0; t < trajectory.horizon(); ++t) {
    const Step& step = trajectory.steps[t];
    const std::size_t obs = observation_map[step.state];
    const double behavior = pi_b.prob(t, obs, step.action);
    if (behavior <= 0.0)
      throw AbsoluteContinuityError("behavior policy gives probability 0 to logged action " +
                                    std::to_string(step.action) + " at step " + std::to_string(t));
    rho *= pi_e.prob(t, obs, step.action) / behavior;
    ratios[t] = rho;
  }
  return ratios;
}

double return_to_go(const Trajectory& trajectory, std::size_t t, const DiscountSpec& discount) {
  double total = 0.0;
  for (std::size_t tau = trajectory.horizon(); tau-- > t;)
    total = trajectory.steps[tau].reward + discount.gamma() * total;
  return total;
}

QStack exact_q_functions(const TabularMDP& mdp, const StochasticPolicy& policy,
                         std::size_t horizon, const DiscountSpec& discount) {
  if (policy.num_observations() != mdp.num_observations() ||
      policy.num_actions() != mdp.num_actions())
    throw ConfigurationError("policy dimensions do not match the MDP");
  if (!policy.covers(horizon)) throw ConfigurationError("policy has fewer tables than the horizon");

  QStack stack = make_q_stack(QKeying::state, mdp.observation_map(), mdp.num_actions(), horizon,
                              mdp.reward_bounds(), discount);
  std::vector<double> next_values(mdp.num_states(), 0.0);
  for (std::size_t t = horizon; t-- > 0;) {
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
      for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
        double q = 0.0;
        for (const Outcome& o : mdp.outcomes(s, a))
          q += o.probability * (o.reward + discount.gamma() * next_values[o.next_state]);
        stack.value(t, s, a) = q;
      }
    }
    next_values = stack.state_values(t, policy);
  }
  return stack;
}

double exact_policy_value(const TabularMDP& mdp, const StochasticPolicy& policy,
                          std::size_t horizon, const DiscountSpec& discount) {
  const QStack q = exact_q_functions(mdp, policy, horizon, discount);
  return q.state_values(0, policy)[mdp.initial_state()];
}

std::vector<double> QStack::state_values(std::size_t t, const StochasticPolicy& policy) const {
  std::vector<double> values(num_rows, 0.0);
  if (t >= horizon()) return values;
  for (std::size_t row = 0; row < num_rows; ++row) {
    const auto probs = policy.row(t, row_observation[row]);
    double v = 0.0;
    for (std::size_t a = 0; a < num_actions; ++a) v += probs[a] * value(t, row, a);
    values[row] = v;
  }
  return values;
}

void QStack::clip_to_range() {
  for (std::size_t t = 0; t < q.size(); ++t)
    for (double& entry : q[t]) entry = std::clamp(entry, -delta[t], delta[t]);
}

QStack make_q_stack(QKeying keying, std::vector<std::size_t> row_observation,
                    std::size_t num_actions, std::size_t horizon, const RewardBounds& bounds,
                    const DiscountSpec& discount) {
  QStack stack;
  stack.keying = keying;
  stack.num_rows = row_observation.size();
  stack.num_actions = num_actions;
  stack.row_observation = std::move(row_observation);
  stack.q.assign(horizon, std::vector<double>(stack.num_rows * num_actions, 0.0));
  stack.delta = range_bounds(bounds, horizon, discount);
  stack.discount = discount;
  return stack;
}

}  // namespace rltmle
