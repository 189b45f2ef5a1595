#include "rltmle/simplex_qp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "rltmle/errors.hpp"

namespace rltmle {

namespace {

constexpr double kStepTolerance = 1e-13;
constexpr double kMultiplierTolerance = 1e-12;

}  // namespace

double simplex_qp_objective(const Eigen::MatrixXd& omega, const Eigen::VectorXd& bias,
                            const Eigen::VectorXd& x) {
  const double b = bias.dot(x);
  return x.dot(omega * x) + b * b;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd repaired = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (repaired + repaired.transpose());
}

double simplex_kkt_residual(const Eigen::MatrixXd& omega, const Eigen::VectorXd& bias,
                            const Eigen::VectorXd& x) {
  const Eigen::MatrixXd m = 0.5 * (omega + omega.transpose()) + bias * bias.transpose();
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return (x - project_to_simplex(x)).lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd step = x - (m * x) / scale;
  return (x - project_to_simplex(step)).lpNorm<Eigen::Infinity>();
}

QpResult solve_simplex_qp(const Eigen::MatrixXd& omega, const Eigen::VectorXd& bias,
                          const QpOptions& options) {
  const Eigen::Index k = omega.rows();
  if (k == 0 || omega.cols() != k || bias.size() != k)
    throw ConfigurationError("QP dimensions disagree");
  if (!omega.allFinite() || !bias.allFinite()) throw ConfigurationError("QP inputs must be finite");

  const Eigen::MatrixXd repaired = nearest_psd(omega);
  Eigen::MatrixXd m = repaired + bias * bias.transpose();
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale > 0.0) m /= scale;

  QpResult result;
  result.x = Eigen::VectorXd::Zero(k);
  Eigen::Index start = 0;
  m.diagonal().minCoeff(&start);
  result.x[start] = 1.0;
  std::vector<bool> free(static_cast<std::size_t>(k), false);
  free[static_cast<std::size_t>(start)] = true;

  for (; result.iterations < options.max_iterations; ++result.iterations) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < k; ++i)
      if (free[static_cast<std::size_t>(i)]) support.push_back(i);
    const auto s = static_cast<Eigen::Index>(support.size());

    // Equality-constrained subproblem on the support: stationarity plus Σx = 1.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
    for (Eigen::Index a = 0; a < s; ++a) {
      for (Eigen::Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * m(support[a], support[b]);
      kkt(a, s) = 1.0;
      kkt(s, a) = 1.0;
    }
    rhs[s] = 1.0;
    const Eigen::VectorXd solution = kkt.completeOrthogonalDecomposition().solve(rhs);

    Eigen::VectorXd direction(s);
    for (Eigen::Index a = 0; a < s; ++a) direction[a] = solution[a] - result.x[support[a]];

    if (direction.lpNorm<Eigen::Infinity>() <= kStepTolerance) {
      const Eigen::VectorXd gradient = 2.0 * m * result.x;
      double level = 0.0;
      for (Eigen::Index i : support) level += gradient[i];
      level /= static_cast<double>(s);
      Eigen::Index entering = -1;
      double most_negative = -kMultiplierTolerance;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (free[static_cast<std::size_t>(i)]) continue;
        const double multiplier = gradient[i] - level;
        if (multiplier < most_negative) {
          most_negative = multiplier;
          entering = i;
        }
      }
      if (entering < 0) {
        result.converged = true;
        break;
      }
      free[static_cast<std::size_t>(entering)] = true;
      continue;
    }

    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < s; ++a) {
      if (direction[a] < 0.0) {
        const double limit = -result.x[support[a]] / direction[a];
        if (limit < step) {
          step = limit;
          blocking = support[a];
        }
      }
    }
    for (Eigen::Index a = 0; a < s; ++a) result.x[support[a]] += step * direction[a];
    if (blocking >= 0) {
      result.x[blocking] = 0.0;
      free[static_cast<std::size_t>(blocking)] = false;
    }
  }

  result.x = result.x.cwiseMax(0.0);
  result.x /= result.x.sum();
  result.objective = simplex_qp_objective(repaired, bias, result.x);
  result.kkt_residual = simplex_kkt_residual(repaired, bias, result.x);
  return result;
}

}  // namespace rltmle
