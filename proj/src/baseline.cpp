#include "rltmle/baseline.hpp"

#include <algorithm>

#include "rltmle/errors.hpp"

namespace rltmle {

namespace {

double frequency_of(std::span<const double> frequency, std::size_t i) {
  return frequency.empty() ? 1.0 : frequency[i];
}

void check_frequency(const LoggedBatch& batch, std::span<const double> frequency) {
  if (!frequency.empty() && frequency.size() != batch.n)
    throw ConfigurationError("frequency weights must have one entry per trajectory");
}

}  // namespace

bool StabilizedWeights::any_degenerate() const {
  return std::find(degenerate.begin(), degenerate.end(), true) != degenerate.end();
}

StabilizedWeights stabilized_weights(const LoggedBatch& batch, std::span<const double> frequency) {
  check_frequency(batch, frequency);
  StabilizedWeights weights;
  weights.n = batch.n;
  weights.horizon = batch.horizon;
  weights.w.assign((batch.horizon + 1) * batch.n, 0.0);
  weights.degenerate.assign(batch.horizon + 1, false);

  double total = 0.0;
  for (std::size_t i = 0; i < batch.n; ++i) total += frequency_of(frequency, i);
  if (total <= 0.0) throw ConfigurationError("frequency weights sum to zero");
  for (std::size_t i = 0; i < batch.n; ++i) weights.w[i] = frequency_of(frequency, i) / total;

  for (std::size_t t = 0; t < batch.horizon; ++t) {
    double mass = 0.0;
    for (std::size_t i = 0; i < batch.n; ++i)
      mass += frequency_of(frequency, i) * batch.ratio[batch.at(t, i)];
    if (mass <= 0.0) {
      weights.degenerate[t + 1] = true;
      continue;
    }
    double* row = weights.w.data() + (t + 1) * batch.n;
    for (std::size_t i = 0; i < batch.n; ++i)
      row[i] = frequency_of(frequency, i) * batch.ratio[batch.at(t, i)] / mass;
  }
  return weights;
}

double dm_estimate(const QStack& q, const StochasticPolicy& pi_e, std::size_t initial_row) {
  if (q.horizon() == 0) throw ConfigurationError("empty Q stack");
  return q.state_values(0, pi_e).at(initial_row);
}

double wdr_estimate(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                    std::span<const double> frequency) {
  const BatchValues values = evaluate_on_batch(batch, q, pi_e);
  const StabilizedWeights w = stabilized_weights(batch, frequency);
  const double gamma = q.discount.gamma();

  double estimate = values.v_initial;
  for (std::size_t t = 0; t < batch.horizon; ++t) {
    double correction = 0.0;
    for (std::size_t i = 0; i < batch.n; ++i) {
      const std::size_t k = batch.at(t, i);
      correction += w.at(t + 1, i) * (batch.reward[k] - values.q_logged[k] + gamma * values.v_next[k]);
    }
    estimate += q.discount.factor(t) * correction;
  }
  return estimate;
}

double wdr_estimate(const Dataset& dataset, const QStack& q, const StochasticPolicy& pi_e,
                    const StochasticPolicy& pi_b) {
  return wdr_estimate(make_batch(dataset, q, pi_e, pi_b), q, pi_e);
}

PartialReturnMatrix partial_returns(const LoggedBatch& batch, const QStack& q,
                                    const StochasticPolicy& pi_e) {
  const BatchValues values = evaluate_on_batch(batch, q, pi_e);
  const StabilizedWeights w = stabilized_weights(batch);
  const double gamma = q.discount.gamma();
  const auto n = static_cast<double>(batch.n);

  PartialReturnMatrix out;
  out.n = batch.n;
  out.horizon = batch.horizon;
  out.g.resize(static_cast<Eigen::Index>(batch.n), static_cast<Eigen::Index>(batch.horizon + 1));
  for (std::size_t i = 0; i < batch.n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double running = n * w.at(0, i) * values.v_initial;
    out.g(row, 0) = running;
    for (std::size_t t = 0; t < batch.horizon; ++t) {
      const std::size_t k = batch.at(t, i);
      running += n * q.discount.factor(t) * w.at(t + 1, i) *
                 (batch.reward[k] - values.q_logged[k] + gamma * values.v_next[k]);
      out.g(row, static_cast<Eigen::Index>(t + 1)) = running;
    }
  }
  return out;
}

MagicResult magic_estimate(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                           const MagicOptions& options) {
  if (options.bootstrap < 2) throw ConfigurationError("MAGIC needs at least two bootstrap replicates");
  const PartialReturnMatrix returns = partial_returns(batch, q, pi_e);

  MagicResult result;
  result.g = returns.column_means();
  const auto k = result.g.size();
  result.omega_hat = batch.n >= 2 ? covariance_eif(returns.g) : Eigen::MatrixXd::Zero(k, k);

  std::vector<double> anchor;
  anchor.reserve(options.bootstrap);
  for (const auto& draw : bootstrap_indices(batch.n, options.bootstrap, options.seed))
    anchor.push_back(wdr_estimate(batch, q, pi_e, frequency_weights(draw, batch.n)));
  result.ci = percentile_interval(anchor, options.ci_level);
  result.b_hat = bias_estimates(result.g, anchor, options.ci_level);

  result.qp = solve_simplex_qp(result.omega_hat, result.b_hat, options.qp);
  result.x_hat = result.qp.x;
  result.estimate = result.x_hat.dot(result.g);
  return result;
}

ImportanceSamplingEstimates is_family(const LoggedBatch& batch, const DiscountSpec& discount) {
  ImportanceSamplingEstimates out;
  const auto n = static_cast<double>(batch.n);
  const std::size_t last = batch.horizon - 1;

  double weighted_returns = 0.0;
  double final_mass = 0.0;
  for (std::size_t i = 0; i < batch.n; ++i) {
    double discounted = 0.0;
    for (std::size_t t = 0; t < batch.horizon; ++t) {
      const std::size_t k = batch.at(t, i);
      discounted += discount.factor(t) * batch.reward[k];
      out.pdis += discount.factor(t) * batch.ratio[k] * batch.reward[k];
    }
    const double rho = batch.ratio[batch.at(last, i)];
    weighted_returns += rho * discounted;
    final_mass += rho;
  }
  out.is = weighted_returns / n;
  out.pdis /= n;
  out.wis = final_mass > 0.0 ? weighted_returns / final_mass : 0.0;

  for (std::size_t t = 0; t < batch.horizon; ++t) {
    double numerator = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < batch.n; ++i) {
      const std::size_t k = batch.at(t, i);
      numerator += batch.ratio[k] * batch.reward[k];
      mass += batch.ratio[k];
    }
    if (mass > 0.0) out.cwpdis += discount.factor(t) * numerator / mass;
  }
  return out;
}

}  // namespace rltmle
