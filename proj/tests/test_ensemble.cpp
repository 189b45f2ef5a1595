#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rltmle/ensemble.hpp"
#include "rltmle/environments.hpp"
#include "rltmle/errors.hpp"
#include "rltmle/model_estimation.hpp"

using namespace rltmle;

namespace {

struct Case {
  EnvironmentSpec env;
  Dataset data;
  QStack q;
  LoggedBatch batch;
};

Case modelwin_case(std::size_t n, std::uint64_t seed, std::size_t horizon = 20) {
  auto env = make_modelwin(horizon);
  const DiscountSpec discount(1.0);
  Dataset fit = simulate(env.mdp, env.behavior, horizon, n, seed);
  Dataset data = simulate(env.mdp, env.behavior, horizon, n, seed + 1);
  QStack q = inject_bias(q_from_model(fit_empirical_model(fit, 2, env.mdp.reward_bounds()), env.evaluation, horizon, discount),
                         0.05, seed);
  LoggedBatch batch = make_batch(data, q, env.evaluation, env.behavior);
  return {std::move(env), std::move(data), std::move(q), std::move(batch)};
}

}  // namespace

TEST_CASE("default grid") {
  const auto grid = default_regularization_grid(20);
  CHECK(grid.back() == unregularized(20));
  CHECK(grid.front() == RegularizationTriple{1.0, 0, 0.0});
  CHECK(grid.size() == 19);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) CHECK(!(grid[i] == grid[j]));
  const auto tiny = default_regularization_grid(1);
  CHECK(tiny.back() == unregularized(1));
  CHECK(tiny.size() == 7);
}

TEST_CASE("single triple reduces to LTMLE") {
  const auto c = modelwin_case(200, 3, 8);
  EnsembleOptions options;
  options.triples = {unregularized(8)};
  options.bootstrap = 100;
  const double plain = LtmleKernel(c.batch, c.q, c.env.evaluation).estimate(unregularized(8));
  CHECK(rltmle1(c.batch, c.q, c.env.evaluation, options).estimate == plain);
  CHECK(rltmle2(c.batch, c.q, c.env.evaluation, options).estimate == plain);

  options.triples = {unregularized(8), unregularized(8), unregularized(8)};
  CHECK(rltmle2(c.batch, c.q, c.env.evaluation, options).estimate == doctest::Approx(plain).epsilon(1e-14));

  options.triples = {{0.5, 4, 0.01}};
  CHECK_THROWS_AS(rltmle2(c.batch, c.q, c.env.evaluation, options), ConfigurationError);
}

TEST_CASE("parallel bootstrap bank matches the serial reference") {
  const auto c = modelwin_case(150, 5, 10);
  const auto triples = default_regularization_grid(10);
  LtmleKernel kernel(c.batch, c.q, c.env.evaluation);
  for (const auto& t : triples) kernel.prepare_alpha(t.alpha);
  const Eigen::MatrixXd serial = reference::bootstrap_bank_serial(kernel, triples, 40, 11);
  for (int workers : {1, 2, 4}) CHECK(bootstrap_bank(kernel, triples, 40, 11, workers) == serial);
}

TEST_CASE("ensemble invariants") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto c = modelwin_case(100 + 50 * seed, seed, 10);
    EnsembleOptions options;
    options.seed = seed;
    for (const auto* name : {"rltmle1", "rltmle2"}) {
      const RltmleResult r = std::string(name) == "rltmle1" ? rltmle1(c.batch, c.q, c.env.evaluation, options)
                                                            : rltmle2(c.batch, c.q, c.env.evaluation, options);
      const auto& x = r.solution.x_hat;
      CHECK(x.minCoeff() >= -1e-12);
      CHECK(std::abs(x.sum() - 1.0) < 1e-10);
      CHECK(r.estimate >= r.bank.g.minCoeff());
      CHECK(r.estimate <= r.bank.g.maxCoeff());
      const auto& omega = r.solution.omega_hat;
      CHECK((omega - omega.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
      CHECK(eig.eigenvalues().minCoeff() > -1e-10);
      const auto k = r.bank.g.size();
      const double last = simplex_qp_objective(omega, r.solution.b_hat, Eigen::VectorXd::Unit(k, k - 1));
      CHECK(r.solution.objective_value <= last + 1e-12);
      CHECK(r.solution.qp.kkt_residual < 1e-8);
      CHECK(std::abs(r.estimate) <= c.q.delta[0]);
    }
  }
}

TEST_CASE("covariance estimates agree on scale") {
  // single draws are heavy-tailed at T = 20, so compare the median ratio
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 9; ++seed) {
    const auto c = modelwin_case(1000, 31 + 2 * seed, 20);
    EnsembleOptions options;
    options.seed = seed;
    options.triples = {unregularized(20)};
    const double eif = rltmle1(c.batch, c.q, c.env.evaluation, options).solution.omega_hat(0, 0);
    const double boot = rltmle2(c.batch, c.q, c.env.evaluation, options).solution.omega_hat(0, 0);
    ratios.push_back(eif / boot);
  }
  std::sort(ratios.begin(), ratios.end());
  CHECK(ratios[4] > 0.5);
  CHECK(ratios[4] < 2.0);
}

TEST_CASE("both ensembles land close together") {
  const auto c = modelwin_case(5000, 41, 20);
  EnsembleOptions options;
  options.seed = 3;
  options.bootstrap = 100;
  const RltmleResult one = rltmle1(c.batch, c.q, c.env.evaluation, options);
  const RltmleResult two = rltmle2(c.batch, c.q, c.env.evaluation, options);
  const auto anchor = two.bank.bootstrap_values.col(two.bank.bootstrap_values.cols() - 1);
  const double se = std::sqrt((anchor.array() - anchor.mean()).square().mean());
  CHECK(std::abs(one.estimate - two.estimate) < 3.0 * se);
}

TEST_CASE("degenerate influence values leave a finite answer") {
  // on-policy with constant rewards: every influence value is zero
  const TabularMDP flat(1, 2, {{{0, 0.5, 1.0}}, {{0, 0.5, 1.0}}}, 0, {0.0, 1.0}, {0});
  const auto pi = StochasticPolicy::stationary({{0.5, 0.5}});
  const Dataset d = simulate(flat, pi, 3, 30, 1);
  const QStack q = exact_q_functions(flat, pi, 3, DiscountSpec(1.0));
  const LoggedBatch batch = make_batch(d, q, pi, pi);
  EnsembleOptions options;
  options.bootstrap = 100;
  const RltmleResult r = rltmle1(batch, q, pi, options);
  CHECK(r.solution.omega_hat.cwiseAbs().maxCoeff() < 1e-20);
  CHECK(std::isfinite(r.estimate));
  CHECK(r.estimate == doctest::Approx(1.5));
}
