// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 1 7 8      run a subset
//
// CSV tables from the sweeps land in ./acceptance_output/.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rltmle/baseline.hpp"
#include "rltmle/bootstrap.hpp"
#include "rltmle/ensemble.hpp"
#include "rltmle/environments.hpp"
#include "rltmle/harness.hpp"
#include "rltmle/ltmle.hpp"
#include "rltmle/model_estimation.hpp"
#include "rltmle/random.hpp"
#include "rltmle/simplex_qp.hpp"

using namespace rltmle;

namespace {

constexpr std::uint64_t kMasterSeed = 20190601;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

const std::filesystem::path& output_dir() {
  static const std::filesystem::path dir = [] {
    std::filesystem::path p = "acceptance_output";
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

std::string csv_text(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  write_report_csv(summarize(records), out);
  return out.str();
}

void save(const std::string& name, const std::string& text) {
  std::ofstream(output_dir() / name) << text;
}

void print_table(const std::vector<ReportRow>& rows) {
  std::printf("    %-9s %6s %6s %12s %12s %12s\n", "estimator", "n", "scale", "mse", "mse_se", "bias");
  for (const auto& r : rows)
    std::printf("    %-9s %6zu %6.3f %12.5g %12.3g %12.4g\n", r.estimator.c_str(), r.n, r.scale, r.mse, r.mse_se,
                r.bias);
}

// ---------------------------------------------------------------------------

Verdict criterion_score_equations() {
  double worst = 0.0;
  std::size_t steps = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const std::uint64_t seed = derive_seed(kMasterSeed, k);
    const auto inst = oracle::random_instance(seed, 5);
    const std::size_t n = 2 + seed % 49;
    const Dataset d = simulate(inst.mdp, inst.behavior, inst.horizon, n, seed);
    const QStack q = inject_bias(exact_q_functions(inst.mdp, inst.evaluation, inst.horizon, DiscountSpec(1.0)),
                                 0.5, seed + 1);
    const auto r = ltmle_backward(d, q, inst.evaluation, inst.behavior, unregularized(inst.horizon));
    for (double s : r.fit.score_residuals) worst = std::max(worst, std::abs(s));
    steps += r.fit.score_residuals.size();
  }
  return {worst < 1e-8, fmt("100 instances, %.0f steps, max |score| = %.2e", static_cast<double>(steps), worst)};
}

Verdict criterion_oracle_identities() {
  double g0 = 0.0, gT = 0.0, tau0 = 0.0, dp = 0.0;
  LtmleConfig inactive;
  inactive.delta_schedule = [](std::size_t) { return 1e-12; };
  for (std::uint64_t k = 0; k < 200; ++k) {
    const std::uint64_t seed = derive_seed(kMasterSeed + 2, k);
    const auto inst = oracle::random_instance(seed, 6);
    const double gamma = k % 3 == 0 ? 0.9 : 1.0;
    const DiscountSpec discount(gamma);
    const std::size_t n = 2 + seed % 60;
    const Dataset d = simulate(inst.mdp, inst.behavior, inst.horizon, n, seed);
    const QStack exact = exact_q_functions(inst.mdp, inst.evaluation, inst.horizon, discount);
    const QStack q = inject_bias(exact, 0.3, seed + 1);
    const LoggedBatch batch = make_batch(d, q, inst.evaluation, inst.behavior);
    const double dm = dm_estimate(q, inst.evaluation, batch.initial_row);
    const auto g = partial_returns(batch, q, inst.evaluation).column_means();
    g0 = std::max(g0, std::abs(g[0] - dm));
    gT = std::max(gT, std::abs(g[g.size() - 1] - wdr_estimate(batch, q, inst.evaluation)));
    const double t0 = LtmleKernel(batch, q, inst.evaluation, inactive).estimate({1.0, 0, 0.0});
    tau0 = std::max(tau0, std::abs(t0 - dm));
    dp = std::max(dp, std::abs(dm_estimate(exact, inst.evaluation, 0) -
                               oracle::enumerate_value(inst.mdp, inst.evaluation, inst.horizon, gamma, 0)));
  }
  for (const auto& name : environment_names()) {
    const auto env = make_environment(name);
    const DiscountSpec discount(1.0);
    const QStack exact = exact_q_functions(env.mdp, env.evaluation, env.default_horizon, discount);
    const double truth = exact_policy_value(env.mdp, env.evaluation, env.default_horizon, discount);
    dp = std::max(dp, std::abs(dm_estimate(exact, env.evaluation, env.mdp.initial_state()) - truth));
  }
  const bool pass = g0 < 1e-12 && gT < 1e-12 && tau0 < 1e-10 && dp < 1e-10;
  return {pass, fmt("|g0-DM| %.1e, |gT-WDR| %.1e, |LTMLE(tau=0)-DM| %.1e, |exact DM-truth| %.1e", g0, gT, tau0, dp)};
}

Verdict criterion_unbiasedness() {
  ExperimentConfig config;
  config.environment = "modelwin";
  config.sample_sizes = {100};
  config.misspecification = {0.05};
  config.trials = 2000;
  config.estimators = {"wdr", "ltmle"};
  config.seed = kMasterSeed + 3;
  const auto records = run_experiment(config);
  save("criterion3.csv", csv_text(records));
  bool pass = true;
  std::string detail;
  for (const auto& key : config.estimators) {
    std::vector<double> est;
    double truth = 0.0;
    for (const auto& r : records)
      if (r.estimator == key && r.ok) est.push_back(r.estimate), truth = r.truth;
    double mean = 0.0, var = 0.0;
    for (double e : est) mean += e / static_cast<double>(est.size());
    for (double e : est) var += (e - mean) * (e - mean) / static_cast<double>(est.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(est.size()));
    const double z = (mean - truth) / se;
    pass = pass && std::abs(z) < 3.0 && est.size() == config.trials;
    detail += key + fmt(" mean %.4f vs truth %.4f (z = %.2f); ", mean, truth, z);
  }
  return {pass, detail};
}

Verdict criterion_rate() {
  ExperimentConfig config;
  config.environment = "modelwin";
  config.sample_sizes = {100, 200, 400, 800, 1600};
  config.misspecification = {0.05};
  config.trials = 500;
  config.estimators = {"ltmle", "wdr"};
  config.seed = kMasterSeed + 4;
  const auto records = run_experiment(config);
  const auto rows = summarize(records);
  save("criterion4.csv", csv_text(records));
  print_table(rows);
  // least-squares slope of log MSE on log n
  const auto slope_of = [&](const std::string& key) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (const auto& r : rows) {
      if (r.estimator != key) continue;
      const double x = std::log(static_cast<double>(r.n)), y = std::log(r.mse);
      sx += x, sy += y, sxx += x * x, sxy += x * y, m += 1;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
  };
  const double slope = slope_of("ltmle");
  return {std::abs(slope + 1.0) <= 0.3,
          fmt("log-log slope %.3f (target -1 +/- 0.3); WDR on the same data %.3f", slope, slope_of("wdr"))};
}

ExperimentConfig ordering_sweep_config(int workers) {
  ExperimentConfig config;
  config.environment = "modelwin";
  config.sample_sizes = {100, 500, 1000};
  config.misspecification = {0.05};
  config.trials = 63;
  config.estimators = {"is", "wdr", "dm", "magic", "ltmle", "cvltmle", "rltmle1", "rltmle2"};
  config.seed = kMasterSeed + 5;
  config.workers = workers;
  return config;
}

std::vector<TrialRecord> ordering_records;

Verdict criterion_ordering() {
  ordering_records = run_experiment(ordering_sweep_config(8));
  const std::string csv = csv_text(ordering_records);
  save("criterion5.csv", csv);
  const auto rows = summarize(ordering_records);
  print_table(rows);

  std::map<std::string, std::vector<double>> errors;  // at n = 1000, by trial
  for (const auto& r : ordering_records)
    if (r.n == 1000) errors[r.estimator].push_back(r.ok ? r.squared_error : NAN);
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  bool pass = true;
  std::string detail;
  const auto& mine = errors.at("rltmle2");
  for (const auto* other : {"wdr", "magic"}) {
    std::vector<double> diff;
    for (std::size_t i = 0; i < mine.size(); ++i) diff.push_back(errors.at(other)[i] - mine[i]);
    const double d = mean(diff);
    const double se = jackknife_se(diff, mean);
    const bool ok = std::isfinite(d) && d > -se;
    pass = pass && ok;
    detail += std::string("MSE(") + other + ") - MSE(rltmle2) = " + fmt("%.4g (SE %.2g)", d, se) +
              (d >= 0.0 ? " nominally better; " : " nominally worse; ");
  }
  std::vector<std::pair<double, std::string>> order;
  for (const auto& r : rows)
    if (r.n == 1000) order.emplace_back(r.mse, r.estimator);
  std::sort(order.begin(), order.end());
  detail += "order at n=1000:";
  for (const auto& [mse, key] : order) detail += " " + key;
  return {pass, detail};
}

Verdict criterion_modelfail_bias() {
  const auto env = make_modelfail();
  const DiscountSpec discount(1.0);
  const double truth = exact_policy_value(env.mdp, env.evaluation, 2, discount);
  const std::size_t n = 10000;
  const std::uint64_t seed = kMasterSeed + 6;
  const Dataset d = simulate(env.mdp, env.behavior, 2, n, seed);
  const Dataset model_split = d.slice(0, n / 2), target = d.slice(n / 2, n);
  const QStack q = q_from_model(fit_empirical_model(model_split, 2, env.mdp.reward_bounds()), env.evaluation, 2, discount);
  const LoggedBatch batch = make_batch(target, q, env.evaluation, env.behavior);
  const double dm = dm_estimate(q, env.evaluation, batch.initial_row);
  const double wdr = wdr_estimate(batch, q, env.evaluation);
  std::vector<double> reps;
  for (const auto& draw : bootstrap_indices(batch.n, 200, derive_seed(seed, 1)))
    reps.push_back(wdr_estimate(batch, q, env.evaluation, frequency_weights(draw, batch.n)));
  double mean = 0.0, var = 0.0;
  for (double r : reps) mean += r / 200.0;
  for (double r : reps) var += (r - mean) * (r - mean) / 200.0;
  const double se = std::sqrt(var);
  const bool pass = std::abs(dm - truth) > 5.0 * se && std::abs(wdr - truth) < 3.0 * se;
  return {pass, fmt("truth %.3f, DM %.4f, WDR %.4f, SE(WDR) %.4f", truth, dm, wdr, se)};
}

Verdict criterion_qp() {
  std::mt19937_64 rng(kMasterSeed + 7);
  std::normal_distribution<double> z;
  double worst_gap = -1.0, worst_kkt = 0.0, worst_simplex = 0.0;
  for (int k = 0; k < 50; ++k) {
    Eigen::MatrixXd a(3, 3);
    for (Eigen::Index i = 0; i < 9; ++i) a(i / 3, i % 3) = z(rng);
    Eigen::MatrixXd omega = a * a.transpose();
    if (k % 5 == 0) omega = a.col(0) * a.col(0).transpose();  // rank one
    Eigen::VectorXd b(3);
    for (Eigen::Index i = 0; i < 3; ++i) b[i] = k % 4 == 0 ? 0.0 : std::abs(z(rng));
    const QpResult r = solve_simplex_qp(omega, b);
    worst_gap = std::max(worst_gap, r.objective - oracle::grid_qp_minimum(omega, b, 1e-3));
    worst_kkt = std::max(worst_kkt, r.kkt_residual);
    worst_simplex = std::max({worst_simplex, std::abs(r.x.sum() - 1.0), std::max(0.0, -r.x.minCoeff())});
  }
  const bool pass = worst_gap < 1e-5 && worst_kkt < 1e-8 && worst_simplex < 1e-10;
  return {pass, fmt("max gap to grid %.2e, max KKT residual %.2e, max simplex violation %.1e", worst_gap, worst_kkt,
                    worst_simplex)};
}

Verdict criterion_invariants() {
  std::size_t outputs = 0, violations = 0;
  std::string first_violation;
  auto flag = [&](bool ok, const std::string& what) {
    ++outputs;
    if (!ok) {
      if (violations++ == 0) first_violation = what;
    }
  };
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const std::uint64_t seed = derive_seed(kMasterSeed + 8, k);
    auto inst = oracle::random_instance(seed, 5);
    std::mt19937_64 rng(seed);
    if (k % 3 == 0) {  // one-hot evaluation policy: many zero ratios
      std::vector<std::vector<double>> rows(inst.mdp.num_states(), std::vector<double>(inst.mdp.num_actions(), 0.0));
      for (auto& row : rows) row[rng() % row.size()] = 1.0;
      inst.evaluation = StochasticPolicy::stationary(rows);
    }
    const std::size_t n = 2 + rng() % 49;
    const double scale = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const DiscountSpec discount(k % 2 == 0 ? 1.0 : 0.8);
    const Dataset d = simulate(inst.mdp, inst.behavior, inst.horizon, n, seed);
    const QStack q = inject_bias(exact_q_functions(inst.mdp, inst.evaluation, inst.horizon, discount), scale, seed);
    const LoggedBatch batch = make_batch(d, q, inst.evaluation, inst.behavior);
    const double range = q.delta[0];
    const std::string tag = "dataset " + std::to_string(k);

    const auto is = is_family(batch, discount);
    for (double v : {is.is, is.pdis, is.wis, is.cwpdis}) flag(std::isfinite(v), tag + " IS family");
    flag(std::isfinite(dm_estimate(q, inst.evaluation, batch.initial_row)), tag + " dm");
    flag(std::isfinite(wdr_estimate(batch, q, inst.evaluation)), tag + " wdr");
    MagicOptions magic;
    magic.bootstrap = 100;
    magic.seed = seed;
    flag(std::isfinite(magic_estimate(batch, q, inst.evaluation, magic).estimate), tag + " magic");

    const double lt = LtmleKernel(batch, q, inst.evaluation).estimate(unregularized(inst.horizon));
    flag(std::isfinite(lt) && std::abs(lt) <= range, tag + " ltmle range");
    const InitialEstimator initial = [&](const Dataset& part) {
      return inject_bias(q_from_model(fit_empirical_model(part, inst.mdp.num_actions(), inst.mdp.reward_bounds()),
                                      inst.evaluation, inst.horizon, discount),
                         scale, seed);
    };
    const double cv = cv_ltmle(d, initial, inst.evaluation, inst.behavior, unregularized(inst.horizon)).estimate;
    flag(std::isfinite(cv) && std::abs(cv) <= range, tag + " cvltmle range");

    EnsembleOptions options;
    options.bootstrap = 100;
    options.seed = seed;
    options.workers = 1;
    for (int variant = 1; variant <= 2; ++variant) {
      const RltmleResult r = variant == 1 ? rltmle1(batch, q, inst.evaluation, options)
                                          : rltmle2(batch, q, inst.evaluation, options);
      flag(std::isfinite(r.estimate) && std::abs(r.estimate) <= range, tag + " rltmle range");
      flag(r.estimate >= r.bank.g.minCoeff() && r.estimate <= r.bank.g.maxCoeff(), tag + " rltmle hull");
      for (Eigen::Index j = 0; j < r.bank.g.size(); ++j)
        flag(std::isfinite(r.bank.g[j]) && std::abs(r.bank.g[j]) <= range, tag + " base estimator range");
    }
  }
  std::string detail = fmt("1000 datasets, %.0f checked outputs, %.0f violations", static_cast<double>(outputs),
                           static_cast<double>(violations));
  if (violations > 0) detail += " (first: " + first_violation + ")";
  return {violations == 0, detail};
}

Verdict criterion_determinism() {
  if (ordering_records.empty()) ordering_records = run_experiment(ordering_sweep_config(8));
  const std::string eight_first = csv_text(ordering_records);
  const std::string one = csv_text(run_experiment(ordering_sweep_config(1)));
  const std::string eight_again = csv_text(run_experiment(ordering_sweep_config(8)));
  save("criterion9_workers1.csv", one);
  save("criterion9_workers8.csv", eight_again);
  const bool pass = one == eight_first && eight_again == eight_first;
  return {pass, fmt("criterion-5 sweep CSV (%.0f bytes) identical across workers 8, 1, 8", static_cast<double>(one.size()))};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "score equations on random instances", 10, criterion_score_equations},
      {2, "oracle identities", 5, criterion_oracle_identities},
      {3, "unbiasedness Monte Carlo (ModelWin, n=100, 2000 trials)", 300, criterion_unbiasedness},
      {4, "LTMLE convergence rate (ModelWin)", 600, criterion_rate},
      {5, "RLTMLE 2 ordering at n=1000 (ModelWin, scale 0.05, 63 trials)", 1200, criterion_ordering},
      {6, "ModelFail asymptotic model bias at n=10^4", 120, criterion_modelfail_bias},
      {7, "simplex QP against grid oracle", 10, criterion_qp},
      {8, "range and convexity invariants on fuzzed data", 60, criterion_invariants},
      {9, "determinism across worker counts", 3600, criterion_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = Clock::now();
    Verdict outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    const bool in_time = elapsed <= c.budget_seconds;
    const bool pass = outcome.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d: %s -- %s [%.1fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, outcome.detail.c_str(),
                elapsed, in_time ? "" : ", over time budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
