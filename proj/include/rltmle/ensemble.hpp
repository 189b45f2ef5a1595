#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rltmle/bootstrap.hpp"
#include "rltmle/logged_batch.hpp"
#include "rltmle/ltmle.hpp"
#include "rltmle/simplex_qp.hpp"

namespace rltmle {

/// α ∈ {0, 0.5, 1} × τ ∈ {0, ⌈T/4⌉, ⌈T/2⌉, T} × λ ∈ {0, 0.01}, deduplicated.
/// Every τ = 0 triple is the same estimator and appears once as (1, 0, 0);
/// (1, T, 0) is last.
std::vector<RegularizationTriple> default_regularization_grid(std::size_t horizon);

struct EnsembleOptions {
  /// Empty means default_regularization_grid. The last triple must be (1, T, 0).
  std::vector<RegularizationTriple> triples;
  std::size_t bootstrap = 200;
  double ci_level = 0.1;
  std::uint64_t seed = 0;
  LtmleConfig ltmle{};
  QpOptions qp{};
  /// OpenMP threads for the bootstrap grid; 0 keeps the runtime default.
  int workers = 0;
};

struct EstimatorBank {
  std::vector<RegularizationTriple> triples;
  Eigen::VectorXd g;
  /// n × K influence values (first variant only).
  Eigen::MatrixXd per_trajectory_eifs;
  /// B × K for the bootstrap variant; B × 1 (g_K only) for the other.
  Eigen::MatrixXd bootstrap_values;
  std::vector<SecondStageFit> fits;
};

struct EnsembleSolution {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd omega_hat;
  Eigen::VectorXd b_hat;
  double objective_value = 0.0;
  Interval ci;
  QpResult qp;
};

struct RltmleResult {
  double estimate = 0.0;
  EnsembleSolution solution;
  EstimatorBank bank;
};

/// Ω̂ from per-trajectory influence values; bias from the bootstrap of g_K.
RltmleResult rltmle1(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                     const EnsembleOptions& options);

/// Ω̂ and bias both from the bootstrap over the whole bank.
RltmleResult rltmle2(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                     const EnsembleOptions& options);

RltmleResult rltmle1(const Dataset& dataset, const QStack& q, const StochasticPolicy& pi_e,
                     const StochasticPolicy& pi_b, const EnsembleOptions& options);
RltmleResult rltmle2(const Dataset& dataset, const QStack& q, const StochasticPolicy& pi_e,
                     const StochasticPolicy& pi_b, const EnsembleOptions& options);

/// B × K table of kernel estimates on bootstrap replicates, replicate b
/// drawn with derive_seed(seed, b). Every α in `triples` must already be
/// prepared on the kernel. Cells run in parallel and land in fixed slots,
/// so the table does not depend on the thread count.
Eigen::MatrixXd bootstrap_bank(const LtmleKernel& kernel, const std::vector<RegularizationTriple>& triples,
                               std::size_t replicates, std::uint64_t seed, int workers = 0);

namespace reference {

/// Single-threaded bootstrap_bank, kept as the reference for the parallel one.
Eigen::MatrixXd bootstrap_bank_serial(const LtmleKernel& kernel,
                                      const std::vector<RegularizationTriple>& triples,
                                      std::size_t replicates, std::uint64_t seed);

}  // namespace reference

}  // namespace rltmle
