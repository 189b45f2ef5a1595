#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rltmle/bootstrap.hpp"
#include "rltmle/logged_batch.hpp"
#include "rltmle/mdp.hpp"
#include "rltmle/q_stack.hpp"
#include "rltmle/simplex_qp.hpp"

namespace rltmle {

/// Self-normalized importance weights w_t^{(i)} for t = 0..T, where row 0 is
/// the uniform 1/n weight that multiplies V̂_1.
struct StabilizedWeights {
  std::size_t n = 0;
  std::size_t horizon = 0;
  std::vector<double> w;  // [t * n + i], t = 0..T
  /// degenerate[t] is set when every ratio at step t (1-based) is zero.
  std::vector<bool> degenerate;

  double at(std::size_t t, std::size_t i) const { return w[t * n + i]; }
  bool any_degenerate() const;
};

/// `frequency` optionally repeats trajectory i frequency[i] times (bootstrap
/// replicates); empty means once each.
StabilizedWeights stabilized_weights(const LoggedBatch& batch, std::span<const double> frequency = {});

/// V̂_1(s_1) = Σ_a π_e(a|s_1) Q̂_1(s_1, a).
double dm_estimate(const QStack& q, const StochasticPolicy& pi_e, std::size_t initial_row);

/// Weighted doubly robust estimate. Steps whose weights are degenerate
/// contribute no correction, leaving the model term in place.
double wdr_estimate(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                    std::span<const double> frequency = {});
double wdr_estimate(const Dataset& dataset, const QStack& q, const StochasticPolicy& pi_e,
                    const StochasticPolicy& pi_b);

/// Off-policy j-step returns for j = 0..T. Entries are scaled by n so that
/// the column means are the estimates g_j (g_0 = DM, g_T = WDR).
struct PartialReturnMatrix {
  std::size_t n = 0;
  std::size_t horizon = 0;
  Eigen::MatrixXd g;  // n × (T + 1)

  Eigen::VectorXd column_means() const { return g.colwise().mean().transpose(); }
};

PartialReturnMatrix partial_returns(const LoggedBatch& batch, const QStack& q,
                                    const StochasticPolicy& pi_e);

struct MagicOptions {
  std::size_t bootstrap = 200;
  double ci_level = 0.1;
  std::uint64_t seed = 0;
  QpOptions qp{};
};

struct MagicResult {
  double estimate = 0.0;
  Eigen::VectorXd g;
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd omega_hat;
  Eigen::VectorXd b_hat;
  Interval ci;
  QpResult qp;
};

/// Convex combination of the j-step returns minimizing estimated MSE, with
/// bias measured as distance to a bootstrap percentile interval of WDR.
MagicResult magic_estimate(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                           const MagicOptions& options);

struct ImportanceSamplingEstimates {
  double is = 0.0;
  double pdis = 0.0;
  double wis = 0.0;
  double cwpdis = 0.0;
};

ImportanceSamplingEstimates is_family(const LoggedBatch& batch, const DiscountSpec& discount);

}  // namespace rltmle
