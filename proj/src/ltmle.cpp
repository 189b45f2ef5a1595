#include "rltmle/ltmle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rltmle/errors.hpp"

namespace rltmle {

namespace {

/// Stop once the score is this small relative to the total weight.
constexpr double kRelativeScoreTolerance = 1e-14;

double frequency_of(std::span<const double> frequency, std::size_t i) {
  return frequency.empty() ? 1.0 : frequency[i];
}

double checked_delta(const LtmleConfig& config, std::size_t n) {
  const double delta = config.delta_schedule(n);
  if (!(delta > 0.0 && delta < 0.5)) throw ConfigurationError("threshold delta_n must lie in (0, 1/2)");
  return delta;
}

/// σ⁻¹ of the thresholded, normalized Q̂_t for every (row, action).
std::vector<std::vector<double>> thresholded_offsets(const QStack& q, double delta_n) {
  std::vector<std::vector<double>> offsets(q.horizon());
  for (std::size_t t = 0; t < q.horizon(); ++t) {
    const std::vector<double> clamped = threshold(normalize_q(q.q[t], q.delta[t]), delta_n);
    offsets[t].resize(clamped.size());
    std::transform(clamped.begin(), clamped.end(), offsets[t].begin(), logit);
  }
  return offsets;
}

double group_score(std::span<const double> weights, std::span<const double> offsets,
                   double weighted_outcome, double epsilon) {
  double total = 0.0;
  for (std::size_t g = 0; g < weights.size(); ++g)
    if (weights[g] != 0.0) total += weights[g] * logistic(offsets[g] + epsilon);
  return total - weighted_outcome;
}

}  // namespace

void validate(const RegularizationTriple& triple, std::size_t horizon) {
  if (!(triple.alpha >= 0.0 && triple.alpha <= 1.0)) throw ConfigurationError("alpha must lie in [0, 1]");
  if (triple.tau > horizon) throw ConfigurationError("tau must not exceed the horizon");
  if (!(triple.lambda >= 0.0)) throw ConfigurationError("lambda must be non-negative");
}

double default_delta_schedule(std::size_t n) {
  return std::min(0.01, 0.25 / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1))));
}

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

std::vector<double> normalize_q(std::span<const double> q, double delta) {
  if (!(delta > 0.0)) throw InvariantError("range bound must be positive");
  const double slack = 1e-12 * delta;
  std::vector<double> out(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (!(std::abs(q[k]) <= delta + slack))
      throw InvariantError("Q entry " + std::to_string(q[k]) + " outside [-Δ, Δ] with Δ = " +
                           std::to_string(delta));
    out[k] = std::clamp((q[k] + delta) / (2.0 * delta), 0.0, 1.0);
  }
  return out;
}

std::vector<double> denormalize_q(std::span<const double> q_tilde, double delta) {
  std::vector<double> out(q_tilde.size());
  for (std::size_t k = 0; k < q_tilde.size(); ++k) out[k] = 2.0 * delta * (q_tilde[k] - 0.5);
  return out;
}

std::vector<double> threshold(std::span<const double> q_tilde, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) throw ConfigurationError("threshold must lie in (0, 1/2)");
  std::vector<double> out(q_tilde.size());
  for (std::size_t k = 0; k < q_tilde.size(); ++k) out[k] = std::clamp(q_tilde[k], delta, 1.0 - delta);
  return out;
}

std::vector<double> perturb(std::span<const double> q_tilde, double epsilon) {
  std::vector<double> out(q_tilde.size());
  for (std::size_t k = 0; k < q_tilde.size(); ++k) {
    if (!(q_tilde[k] > 0.0 && q_tilde[k] < 1.0)) throw InvariantError("perturb needs entries in (0, 1)");
    out[k] = epsilon == 0.0 ? q_tilde[k] : logistic(logit(q_tilde[k]) + epsilon);
  }
  return out;
}

SoftenedWeights soften(std::span<const double> x, double alpha) {
  SoftenedWeights out;
  out.weights.assign(x.size(), 0.0);
  double raw = 0.0;
  for (double v : x) {
    if (!(v >= 0.0)) throw InvariantError("soften needs non-negative inputs");
    raw += v;
  }
  if (raw == 0.0) {
    out.degenerate = true;
    return out;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    out.weights[k] = std::pow(x[k], alpha);
    total += out.weights[k];
  }
  for (double& w : out.weights) w /= total;
  return out;
}

EpsilonFit fit_epsilon_grouped(std::span<const double> weights, std::span<const double> offsets,
                               double weighted_outcome, double lambda, const LtmleConfig& config) {
  EpsilonFit fit;
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) {
    fit.degenerate = true;
    fit.score = -weighted_outcome;
    return fit;
  }

  const double score_at_zero = group_score(weights, offsets, weighted_outcome, 0.0);
  fit.score = score_at_zero;
  if (std::abs(score_at_zero) <= lambda) return fit;

  // Off zero the penalized derivative is score(ε) + λ sign(ε); the optimum
  // sits on the side opposite to the sign of score(0).
  const double shift = score_at_zero > 0.0 ? lambda : -lambda;
  const double bound = config.epsilon_bound;
  double lo = score_at_zero > 0.0 ? -bound : 0.0;
  double hi = score_at_zero > 0.0 ? 0.0 : bound;
  const double far = score_at_zero > 0.0 ? lo : hi;
  const double far_value = group_score(weights, offsets, weighted_outcome, far) - shift;
  if ((score_at_zero > 0.0 && far_value >= 0.0) || (score_at_zero < 0.0 && far_value <= 0.0)) {
    fit.epsilon = far;
    fit.score = far_value + shift;
    fit.at_bound = true;
    return fit;
  }

  const double score_tolerance = kRelativeScoreTolerance * total;
  double epsilon = 0.0;
  for (fit.iterations = 1; fit.iterations <= config.max_iterations; ++fit.iterations) {
    double value = -weighted_outcome - shift;
    double slope = 0.0;
    for (std::size_t g = 0; g < weights.size(); ++g) {
      if (weights[g] == 0.0) continue;
      const double p = logistic(offsets[g] + epsilon);
      value += weights[g] * p;
      slope += weights[g] * p * (1.0 - p);
    }
    if (std::abs(value) <= score_tolerance) break;
    if (value < 0.0) lo = epsilon; else hi = epsilon;
    if (hi - lo <= config.tolerance) break;
    const double newton = slope > 0.0 ? epsilon - value / slope : lo - 1.0;
    epsilon = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  if (fit.iterations > config.max_iterations)
    throw SolverError("second-stage fit did not converge in " + std::to_string(config.max_iterations) +
                      " iterations");
  fit.epsilon = epsilon;
  fit.score = group_score(weights, offsets, weighted_outcome, epsilon);
  return fit;
}

EpsilonFit fit_epsilon(std::span<const double> weights, std::span<const double> u_tilde,
                       std::span<const double> q_tilde, double lambda, const LtmleConfig& config) {
  if (weights.size() != u_tilde.size() || weights.size() != q_tilde.size())
    throw ConfigurationError("fit_epsilon inputs differ in length");
  if (!(lambda >= 0.0)) throw ConfigurationError("lambda must be non-negative");
  std::vector<double> offsets(q_tilde.size());
  double weighted_outcome = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw InvariantError("weights must be non-negative");
    if (!(u_tilde[i] >= 0.0 && u_tilde[i] <= 1.0)) throw InvariantError("outcomes must lie in [0, 1]");
    if (!(q_tilde[i] > 0.0 && q_tilde[i] < 1.0)) throw InvariantError("predictions must lie in (0, 1)");
    offsets[i] = logit(q_tilde[i]);
    weighted_outcome += weights[i] * u_tilde[i];
  }
  return fit_epsilon_grouped(weights, offsets, weighted_outcome, lambda, config);
}

// ---------------------------------------------------------------------------

struct LtmleKernel::Workspace {
  bool diagnostics = false;
  std::vector<double> group_weights;
  std::vector<double> scratch;
  /// values[t][row] = V̂_t(ε_t); values[T] = 0.
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> fitted;  // Q̂_t^δ(ε_t), filled with diagnostics
  std::vector<std::vector<double>> local_offsets;
  SecondStageFit fit;
};

LtmleKernel::LtmleKernel(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                         LtmleConfig config)
    : batch_(&batch), q_(&q), pi_e_(&pi_e), config_(std::move(config)) {
  if (q.horizon() != batch.horizon) throw ConfigurationError("Q stack horizon differs from the data");
  for (std::size_t k = 0; k < batch.row.size(); ++k)
    if (batch.row[k] >= q.num_rows || batch.action[k] >= q.num_actions)
      throw ConfigurationError("logged data falls outside the Q stack");
  for (double d : q.delta)
    if (d < 0.0) throw ConfigurationError("negative range bound");
  if (q.delta.front() <= 0.0) throw ConfigurationError("range bounds must be positive");
}

void LtmleKernel::prepare_alpha(double alpha) {
  if (std::find(alphas_.begin(), alphas_.end(), alpha) != alphas_.end()) return;
  std::vector<double> powered(batch_->ratio.size());
  for (std::size_t k = 0; k < powered.size(); ++k) powered[k] = std::pow(batch_->ratio[k], alpha);
  alphas_.push_back(alpha);
  powered_.push_back(std::move(powered));
}

std::span<const double> LtmleKernel::powered_ratios(double alpha, std::vector<double>& scratch) const {
  if (alpha == 1.0) return batch_->ratio;
  const auto it = std::find(alphas_.begin(), alphas_.end(), alpha);
  if (it != alphas_.end()) return powered_[static_cast<std::size_t>(it - alphas_.begin())];
  scratch.resize(batch_->ratio.size());
  for (std::size_t k = 0; k < scratch.size(); ++k) scratch[k] = std::pow(batch_->ratio[k], alpha);
  return scratch;
}

double LtmleKernel::backward(const RegularizationTriple& reg, std::span<const double> frequency,
                             Workspace& work) const {
  const LoggedBatch& batch = *batch_;
  const QStack& q = *q_;
  const std::size_t n = batch.n;
  const std::size_t horizon = batch.horizon;
  const std::size_t actions = q.num_actions;
  const double gamma = q.discount.gamma();
  if (!frequency.empty() && frequency.size() != n)
    throw ConfigurationError("frequency weights must have one entry per trajectory");

  double effective = 0.0;
  for (std::size_t i = 0; i < n; ++i) effective += frequency_of(frequency, i);
  const auto effective_n = static_cast<std::size_t>(std::llround(effective));
  const double delta_n = checked_delta(config_, effective_n);
  work.local_offsets = thresholded_offsets(q, delta_n);
  const auto& offsets = work.local_offsets;

  const std::span<const double> powered = powered_ratios(reg.alpha, work.scratch);
  work.group_weights.assign(q.num_rows * actions, 0.0);
  work.values.assign(horizon + 1, std::vector<double>(q.num_rows, 0.0));
  if (work.diagnostics) {
    work.fitted.assign(horizon, std::vector<double>(q.num_rows * actions, 0.0));
    work.fit = SecondStageFit{};
    work.fit.epsilon.assign(horizon, 0.0);
    work.fit.score_residuals.assign(horizon, 0.0);
    work.fit.degenerate.assign(horizon, false);
    work.fit.at_bound.assign(horizon, false);
    work.fit.threshold_used = delta_n;
  }

  for (std::size_t t = horizon; t-- > 0;) {
    const double range = q.delta[t];
    const std::vector<double>& v_next = work.values[t + 1];
    const double* x = powered.data() + t * n;
    const double* rho = batch.ratio.data() + t * n;

    double mass = 0.0;
    double raw_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mass += frequency_of(frequency, i) * x[i];
      raw_mass += frequency_of(frequency, i) * rho[i];
    }
    const bool degenerate = !(raw_mass > 0.0) || !(mass > 0.0);

    std::fill(work.group_weights.begin(), work.group_weights.end(), 0.0);
    double weighted_outcome = 0.0;
    if (!degenerate) {
      for (std::size_t i = 0; i < n; ++i) {
        const double w = frequency_of(frequency, i) * x[i] / mass;
        if (w == 0.0) continue;
        const std::size_t k = batch.at(t, i);
        const double continuation = t + 1 < horizon ? v_next[batch.row[k + n]] : 0.0;
        const double u = (batch.reward[k] + gamma * continuation + range) / (2.0 * range);
        work.group_weights[batch.row[k] * actions + batch.action[k]] += w;
        weighted_outcome += w * u;
      }
    }

    double epsilon = 0.0;
    if (!degenerate && t + 1 <= reg.tau) {
      const EpsilonFit fit =
          fit_epsilon_grouped(work.group_weights, offsets[t], weighted_outcome, reg.lambda, config_);
      epsilon = fit.epsilon;
      if (work.diagnostics) work.fit.at_bound[t] = fit.at_bound;
    }
    if (work.diagnostics) {
      work.fit.epsilon[t] = epsilon;
      work.fit.degenerate[t] = degenerate;
      work.fit.score_residuals[t] = group_score(work.group_weights, offsets[t], weighted_outcome, epsilon);
    }

    std::vector<double>& v_here = work.values[t];
    for (std::size_t row = 0; row < q.num_rows; ++row) {
      const auto probs = pi_e_->row(t, q.row_observation[row]);
      double v = 0.0;
      for (std::size_t a = 0; a < actions; ++a) {
        const double fitted = 2.0 * range * (logistic(offsets[t][row * actions + a] + epsilon) - 0.5);
        if (work.diagnostics) work.fitted[t][row * actions + a] = fitted;
        v += probs[a] * fitted;
      }
      v_here[row] = v;
    }
  }
  return work.values[0][batch.initial_row];
}

LtmleResult LtmleKernel::run(const RegularizationTriple& reg, std::span<const double> frequency,
                             bool with_eif) const {
  validate(reg, horizon());
  Workspace work;
  work.diagnostics = true;
  LtmleResult result;
  result.estimate = backward(reg, frequency, work);
  result.fit = std::move(work.fit);
  result.perturbed = *q_;
  result.perturbed.q = std::move(work.fitted);

  if (with_eif) {
    const LoggedBatch& batch = *batch_;
    const double gamma = q_->discount.gamma();
    const std::size_t actions = q_->num_actions;
    result.eif_values.assign(batch.n, 0.0);
    for (std::size_t t = 0; t < batch.horizon; ++t) {
      const double factor = q_->discount.factor(t);
      for (std::size_t i = 0; i < batch.n; ++i) {
        const std::size_t k = batch.at(t, i);
        const double continuation = t + 1 < batch.horizon ? work.values[t + 1][batch.row[k + batch.n]] : 0.0;
        const double fitted = result.perturbed.q[t][batch.row[k] * actions + batch.action[k]];
        result.eif_values[i] += factor * batch.ratio[k] * (batch.reward[k] + gamma * continuation - fitted);
      }
    }
  }
  return result;
}

double LtmleKernel::estimate(const RegularizationTriple& reg, std::span<const double> frequency) const {
  validate(reg, horizon());
  Workspace work;
  return backward(reg, frequency, work);
}

LtmleResult ltmle_backward(const Dataset& targeting, const QStack& q, const StochasticPolicy& pi_e,
                           const StochasticPolicy& pi_b, const RegularizationTriple& reg,
                           const LtmleConfig& config) {
  const LoggedBatch batch = make_batch(targeting, q, pi_e, pi_b);
  const LtmleKernel kernel(batch, q, pi_e, config);
  return kernel.run(reg);
}

double eif_evaluate(const Trajectory& trajectory, std::span<const std::size_t> observation_map,
                    const QStack& q_perturbed, const StochasticPolicy& pi_e,
                    const StochasticPolicy& pi_b) {
  if (trajectory.horizon() != q_perturbed.horizon())
    throw ConfigurationError("trajectory length differs from the Q stack horizon");
  const std::vector<double> rho = importance_ratios(trajectory, observation_map, pi_e, pi_b);
  const double gamma = q_perturbed.discount.gamma();
  auto row_of = [&](std::size_t state) {
    return q_perturbed.keying == QKeying::state ? state : observation_map[state];
  };
  double total = 0.0;
  for (std::size_t t = 0; t < trajectory.horizon(); ++t) {
    if (rho[t] == 0.0) continue;
    const Step& step = trajectory.steps[t];
    double continuation = 0.0;
    if (t + 1 < trajectory.horizon())
      continuation = q_perturbed.state_values(t + 1, pi_e)[row_of(trajectory.steps[t + 1].state)];
    total += q_perturbed.discount.factor(t) * rho[t] *
             (step.reward + gamma * continuation - q_perturbed.value(t, row_of(step.state), step.action));
  }
  return total;
}

CvLtmleResult cv_ltmle(const Dataset& dataset, const InitialEstimator& initial,
                       const StochasticPolicy& pi_e, const StochasticPolicy& pi_b,
                       const RegularizationTriple& reg, const LtmleConfig& config) {
  const std::size_t n = dataset.size();
  const std::size_t folds = config.folds;
  if (folds < 2) throw ConfigurationError("cross-validated LTMLE needs at least two folds");
  if (n < folds) throw ConfigurationError("fewer trajectories than folds: a fold would be empty");
  validate(reg, dataset.horizon);

  struct Fold {
    QStack q;
    LoggedBatch batch;
    std::vector<std::vector<double>> offsets;
    std::vector<std::vector<double>> values;
  };
  const double delta_n = checked_delta(config, n);
  std::vector<Fold> parts;
  parts.reserve(folds);
  for (std::size_t v = 0; v < folds; ++v) {
    const std::size_t first = v * n / folds;
    const std::size_t last = (v + 1) * n / folds;
    Dataset training = dataset.slice(0, first);
    const Dataset tail = dataset.slice(last, n);
    training.trajectories.insert(training.trajectories.end(), tail.trajectories.begin(),
                                 tail.trajectories.end());
    if (training.empty() || first == last) throw ConfigurationError("fold too small to fit a model");
    Fold part{initial(training), {}, {}, {}};
    if (part.q.horizon() != dataset.horizon)
      throw ConfigurationError("initial estimator returned the wrong horizon");
    part.batch = make_batch(dataset.slice(first, last), part.q, pi_e, pi_b);
    part.offsets = thresholded_offsets(part.q, delta_n);
    part.values.assign(dataset.horizon + 1, std::vector<double>(part.q.num_rows, 0.0));
    parts.push_back(std::move(part));
  }

  const std::size_t horizon = dataset.horizon;
  CvLtmleResult result;
  result.fit.epsilon.assign(horizon, 0.0);
  result.fit.score_residuals.assign(horizon, 0.0);
  result.fit.degenerate.assign(horizon, false);
  result.fit.at_bound.assign(horizon, false);
  result.fit.threshold_used = delta_n;

  std::vector<double> weights;
  std::vector<double> offsets;
  for (std::size_t t = horizon; t-- > 0;) {
    weights.clear();
    offsets.clear();
    double weighted_outcome = 0.0;
    bool any_mass = false;
    for (Fold& part : parts) {
      const LoggedBatch& batch = part.batch;
      const std::size_t actions = part.q.num_actions;
      const double range = part.q.delta[t];
      const double gamma = part.q.discount.gamma();
      const std::size_t base = weights.size();
      weights.resize(base + part.q.num_rows * actions, 0.0);
      offsets.insert(offsets.end(), part.offsets[t].begin(), part.offsets[t].end());

      std::vector<double> rho(batch.ratio.begin() + static_cast<std::ptrdiff_t>(t * batch.n),
                              batch.ratio.begin() + static_cast<std::ptrdiff_t>((t + 1) * batch.n));
      const SoftenedWeights softened = soften(rho, reg.alpha);
      if (softened.degenerate) continue;
      any_mass = true;
      for (std::size_t i = 0; i < batch.n; ++i) {
        const double w = softened.weights[i] / static_cast<double>(folds);
        if (w == 0.0) continue;
        const std::size_t k = batch.at(t, i);
        const double continuation = t + 1 < horizon ? part.values[t + 1][batch.row[k + batch.n]] : 0.0;
        weights[base + batch.row[k] * actions + batch.action[k]] += w;
        weighted_outcome += w * (batch.reward[k] + gamma * continuation + range) / (2.0 * range);
      }
    }

    double epsilon = 0.0;
    if (any_mass && t + 1 <= reg.tau) {
      const EpsilonFit fit = fit_epsilon_grouped(weights, offsets, weighted_outcome, reg.lambda, config);
      epsilon = fit.epsilon;
      result.fit.at_bound[t] = fit.at_bound;
    }
    result.fit.epsilon[t] = epsilon;
    result.fit.degenerate[t] = !any_mass;
    result.fit.score_residuals[t] = group_score(weights, offsets, weighted_outcome, epsilon);

    for (Fold& part : parts) {
      const std::size_t actions = part.q.num_actions;
      for (std::size_t row = 0; row < part.q.num_rows; ++row) {
        const auto probs = pi_e.row(t, part.q.row_observation[row]);
        double v = 0.0;
        for (std::size_t a = 0; a < actions; ++a)
          v += probs[a] * 2.0 * part.q.delta[t] *
               (logistic(part.offsets[t][row * actions + a] + epsilon) - 0.5);
        part.values[t][row] = v;
      }
    }
  }

  for (const Fold& part : parts) result.fold_estimates.push_back(part.values[0][part.batch.initial_row]);
  for (double v : result.fold_estimates) result.estimate += v;
  result.estimate /= static_cast<double>(folds);
  return result;
}

}  // namespace rltmle
