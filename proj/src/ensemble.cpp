#include "rltmle/ensemble.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rltmle/errors.hpp"

namespace rltmle {

namespace {

std::vector<RegularizationTriple> resolve_triples(const EnsembleOptions& options, std::size_t horizon) {
  std::vector<RegularizationTriple> triples =
      options.triples.empty() ? default_regularization_grid(horizon) : options.triples;
  for (const auto& triple : triples) validate(triple, horizon);
  if (!(triples.back() == unregularized(horizon)))
    throw ConfigurationError("the last regularization triple must be the unregularized (1, T, 0)");
  return triples;
}

std::vector<std::vector<double>> replicate_frequencies(std::size_t n, std::size_t replicates,
                                                       std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  out.reserve(replicates);
  for (const auto& draw : bootstrap_indices(n, replicates, seed)) out.push_back(frequency_weights(draw, n));
  return out;
}

struct BankStart {
  LtmleKernel kernel;
  EstimatorBank bank;
};

BankStart build_bank(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                     const EnsembleOptions& options, bool with_eif) {
  if (options.bootstrap < 2) throw ConfigurationError("the ensemble needs at least two bootstrap replicates");
  BankStart start{LtmleKernel(batch, q, pi_e, options.ltmle), {}};
  EstimatorBank& bank = start.bank;
  bank.triples = resolve_triples(options, batch.horizon);
  for (const auto& triple : bank.triples) start.kernel.prepare_alpha(triple.alpha);

  const auto k = static_cast<Eigen::Index>(bank.triples.size());
  bank.g.resize(k);
  if (with_eif) bank.per_trajectory_eifs.resize(static_cast<Eigen::Index>(batch.n), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    LtmleResult run = start.kernel.run(bank.triples[static_cast<std::size_t>(j)], {}, with_eif);
    bank.g[j] = run.estimate;
    if (with_eif)
      for (std::size_t i = 0; i < batch.n; ++i)
        bank.per_trajectory_eifs(static_cast<Eigen::Index>(i), j) = run.eif_values[i];
    bank.fits.push_back(std::move(run.fit));
  }
  return start;
}

RltmleResult finish(EstimatorBank bank, Eigen::MatrixXd omega, const EnsembleOptions& options) {
  RltmleResult result;
  const Eigen::Index k = bank.g.size();
  const Eigen::VectorXd anchor_column = bank.bootstrap_values.col(bank.bootstrap_values.cols() - 1);
  const std::vector<double> anchor(anchor_column.data(), anchor_column.data() + anchor_column.size());

  EnsembleSolution& solution = result.solution;
  solution.ci = percentile_interval(anchor, options.ci_level);
  solution.b_hat = bias_estimates(bank.g, anchor, options.ci_level);
  solution.omega_hat = k > 0 ? std::move(omega) : Eigen::MatrixXd();
  solution.qp = solve_simplex_qp(solution.omega_hat, solution.b_hat, options.qp);
  solution.x_hat = solution.qp.x;
  solution.objective_value = solution.qp.objective;

  // Convex combination; the clamp only removes rounding outside the hull.
  result.estimate = std::clamp(solution.x_hat.dot(bank.g), bank.g.minCoeff(), bank.g.maxCoeff());
  result.bank = std::move(bank);
  return result;
}

void fill_cell(const LtmleKernel& kernel, const std::vector<RegularizationTriple>& triples,
               const std::vector<std::vector<double>>& frequencies, Eigen::MatrixXd& out, std::size_t cell) {
  const std::size_t b = cell / triples.size();
  const std::size_t k = cell % triples.size();
  out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = kernel.estimate(triples[k], frequencies[b]);
}

}  // namespace

std::vector<RegularizationTriple> default_regularization_grid(std::size_t horizon) {
  const std::size_t quarter = (horizon + 3) / 4;
  const std::size_t half = (horizon + 1) / 2;
  std::vector<RegularizationTriple> grid;
  auto add = [&](RegularizationTriple triple) {
    if (triple.tau == 0) triple = {1.0, 0, 0.0};
    if (std::find(grid.begin(), grid.end(), triple) == grid.end()) grid.push_back(triple);
  };
  for (double alpha : {0.0, 0.5, 1.0})
    for (std::size_t tau : {std::size_t{0}, quarter, half, horizon})
      for (double lambda : {0.0, 0.01}) add({alpha, tau, lambda});
  const RegularizationTriple last = unregularized(horizon);
  grid.erase(std::remove(grid.begin(), grid.end(), last), grid.end());
  grid.push_back(last);
  return grid;
}

Eigen::MatrixXd bootstrap_bank(const LtmleKernel& kernel, const std::vector<RegularizationTriple>& triples,
                               std::size_t replicates, std::uint64_t seed, int workers) {
  const auto frequencies = replicate_frequencies(kernel.batch().n, replicates, seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(replicates), static_cast<Eigen::Index>(triples.size()));
  const auto cells = static_cast<std::ptrdiff_t>(replicates * triples.size());
#ifdef _OPENMP
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#else
  (void)workers;
#endif
  for (std::ptrdiff_t cell = 0; cell < cells; ++cell)
    fill_cell(kernel, triples, frequencies, out, static_cast<std::size_t>(cell));
  return out;
}

namespace reference {

Eigen::MatrixXd bootstrap_bank_serial(const LtmleKernel& kernel,
                                      const std::vector<RegularizationTriple>& triples,
                                      std::size_t replicates, std::uint64_t seed) {
  const auto frequencies = replicate_frequencies(kernel.batch().n, replicates, seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(replicates), static_cast<Eigen::Index>(triples.size()));
  for (std::size_t cell = 0; cell < replicates * triples.size(); ++cell)
    fill_cell(kernel, triples, frequencies, out, cell);
  return out;
}

}  // namespace reference

RltmleResult rltmle1(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                     const EnsembleOptions& options) {
  BankStart start = build_bank(batch, q, pi_e, options, true);
  EstimatorBank& bank = start.bank;
  bank.bootstrap_values = bootstrap_bank(start.kernel, {bank.triples.back()}, options.bootstrap,
                                         options.seed, options.workers);
  const auto k = bank.g.size();
  Eigen::MatrixXd omega =
      batch.n >= 2 ? covariance_eif(bank.per_trajectory_eifs) : Eigen::MatrixXd::Zero(k, k);
  return finish(std::move(bank), std::move(omega), options);
}

RltmleResult rltmle2(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
                     const EnsembleOptions& options) {
  BankStart start = build_bank(batch, q, pi_e, options, false);
  EstimatorBank& bank = start.bank;
  bank.bootstrap_values =
      bootstrap_bank(start.kernel, bank.triples, options.bootstrap, options.seed, options.workers);
  Eigen::MatrixXd omega = covariance_bootstrap(bank.bootstrap_values);
  return finish(std::move(bank), std::move(omega), options);
}

RltmleResult rltmle1(const Dataset& dataset, const QStack& q, const StochasticPolicy& pi_e,
                     const StochasticPolicy& pi_b, const EnsembleOptions& options) {
  return rltmle1(make_batch(dataset, q, pi_e, pi_b), q, pi_e, options);
}

RltmleResult rltmle2(const Dataset& dataset, const QStack& q, const StochasticPolicy& pi_e,
                     const StochasticPolicy& pi_b, const EnsembleOptions& options) {
  return rltmle2(make_batch(dataset, q, pi_e, pi_b), q, pi_e, options);
}

}  // namespace rltmle
