#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace rltmle {

struct QpOptions {
  std::size_t max_iterations = 10000;
};

struct QpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Scale-free projected-gradient residual ‖x - P(x - ∇f(x)/L)‖∞.
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// xᵀΩx + (xᵀb)².
double simplex_qp_objective(const Eigen::MatrixXd& omega, const Eigen::VectorXd& bias,
                            const Eigen::VectorXd& x);

/// Euclidean projection onto {x >= 0, Σx = 1} (sort-based).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// Symmetrizes and clamps negative eigenvalues to zero.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& m);

double simplex_kkt_residual(const Eigen::MatrixXd& omega, const Eigen::VectorXd& bias,
                            const Eigen::VectorXd& x);

/// Minimizes xᵀΩx + (xᵀb)² over the probability simplex with a primal
/// active-set method. Ω is repaired with nearest_psd first. If the active
/// set is still changing after max_iterations the best feasible iterate is
/// returned with converged == false.
QpResult solve_simplex_qp(const Eigen::MatrixXd& omega, const Eigen::VectorXd& bias,
                          const QpOptions& options = {});

}  // namespace rltmle
