#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rltmle/mdp.hpp"

namespace rltmle {

/// B replicates of n indices drawn with replacement. Replicate b draws from
/// an engine seeded with derive_seed(seed, b).
std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t replicates,
                                                        std::uint64_t seed);

/// How often each of the n originals appears in one replicate.
std::vector<double> frequency_weights(std::span<const std::size_t> indices, std::size_t n);

/// Materialized resamples of whole trajectories.
std::vector<Dataset> bootstrap_resample(const Dataset& dataset, std::size_t replicates,
                                        std::uint64_t seed);

/// Covariance across bootstrap replicates (rows), normalized by B: it
/// already estimates the variance of the estimators themselves.
Eigen::MatrixXd covariance_bootstrap(const Eigen::MatrixXd& replicate_values);

/// Sample covariance (n - 1 normalization) of per-trajectory rows, divided
/// by n so that it estimates the covariance of the sample means.
Eigen::MatrixXd covariance_eif(const Eigen::MatrixXd& per_trajectory);

/// Nearest-rank percentile: the ceil(p * B)-th smallest value (1-based).
double percentile_nearest_rank(std::vector<double> values, double p);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double distance(double x) const noexcept {
    if (x < lower) return lower - x;
    if (x > upper) return x - upper;
    return 0.0;
  }
};

/// Two-sided percentile interval leaving ci_level / 2 in each tail.
Interval percentile_interval(std::span<const double> values, double ci_level);

/// Distance from each g_k to the percentile interval of `anchor_replicates`.
Eigen::VectorXd bias_estimates(const Eigen::VectorXd& g, std::span<const double> anchor_replicates,
                               double ci_level);

}  // namespace rltmle
