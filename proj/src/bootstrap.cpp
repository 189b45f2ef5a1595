#include "rltmle/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rltmle/errors.hpp"
#include "rltmle/random.hpp"

namespace rltmle {

std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t replicates,
                                                        std::uint64_t seed) {
  if (n == 0) throw ConfigurationError("cannot bootstrap an empty sample");
  std::vector<std::vector<std::size_t>> draws(replicates, std::vector<std::size_t>(n));
  for (std::size_t b = 0; b < replicates; ++b) {
    Engine engine = make_engine(derive_seed(seed, b));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t& index : draws[b]) index = pick(engine);
  }
  return draws;
}

std::vector<double> frequency_weights(std::span<const std::size_t> indices, std::size_t n) {
  std::vector<double> counts(n, 0.0);
  for (std::size_t index : indices) counts.at(index) += 1.0;
  return counts;
}

std::vector<Dataset> bootstrap_resample(const Dataset& dataset, std::size_t replicates,
                                        std::uint64_t seed) {
  std::vector<Dataset> out;
  out.reserve(replicates);
  for (const auto& draw : bootstrap_indices(dataset.size(), replicates, seed)) {
    Dataset replicate;
    replicate.observation_map = dataset.observation_map;
    replicate.horizon = dataset.horizon;
    replicate.seed = dataset.seed;
    replicate.trajectories.reserve(draw.size());
    for (std::size_t index : draw) replicate.trajectories.push_back(dataset.trajectories[index]);
    out.push_back(std::move(replicate));
  }
  return out;
}

Eigen::MatrixXd covariance_bootstrap(const Eigen::MatrixXd& replicate_values) {
  const auto b = replicate_values.rows();
  if (b < 2) throw ConfigurationError("bootstrap covariance needs at least two replicates");
  const Eigen::RowVectorXd mean = replicate_values.colwise().mean();
  const Eigen::MatrixXd centered = replicate_values.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(b);
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd covariance_eif(const Eigen::MatrixXd& per_trajectory) {
  const auto n = per_trajectory.rows();
  if (n < 2) throw ConfigurationError("influence-function covariance needs at least two rows");
  const Eigen::RowVectorXd mean = per_trajectory.colwise().mean();
  const Eigen::MatrixXd centered = per_trajectory.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) /
                        (static_cast<double>(n - 1) * static_cast<double>(n));
  return 0.5 * (cov + cov.transpose());
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigurationError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigurationError("percentile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  // The small offset keeps products such as 0.95 * 200 from rounding up a rank.
  const double rank = std::ceil(p * static_cast<double>(values.size()) - 1e-9);
  const auto index = static_cast<std::size_t>(std::clamp(rank - 1.0, 0.0, static_cast<double>(values.size() - 1)));
  return values[index];
}

Interval percentile_interval(std::span<const double> values, double ci_level) {
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigurationError("ci_level must lie in (0, 1)");
  std::vector<double> copy(values.begin(), values.end());
  return Interval{percentile_nearest_rank(copy, ci_level / 2.0),
                  percentile_nearest_rank(copy, 1.0 - ci_level / 2.0)};
}

Eigen::VectorXd bias_estimates(const Eigen::VectorXd& g, std::span<const double> anchor_replicates,
                               double ci_level) {
  const Interval ci = percentile_interval(anchor_replicates, ci_level);
  Eigen::VectorXd bias(g.size());
  for (Eigen::Index k = 0; k < g.size(); ++k) bias[k] = ci.distance(g[k]);
  return bias;
}

}  // namespace rltmle
