#include "rltmle/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rltmle/baseline.hpp"
#include "rltmle/ensemble.hpp"
#include "rltmle/environments.hpp"
#include "rltmle/errors.hpp"
#include "rltmle/model_estimation.hpp"
#include "rltmle/random.hpp"

namespace rltmle {

namespace {

constexpr const char* kVersion = "0.1.0";

std::size_t resolved_horizon(const ExperimentConfig& config) {
  return make_environment(config.environment, config.horizon).default_horizon;
}

std::size_t targeting_size(const ExperimentConfig& config, std::size_t n) {
  if (config.exact_model) return n;
  return static_cast<std::size_t>(std::llround(config.split_fraction * static_cast<double>(n)));
}

/// Shortest round-trip text for a double.
std::string number(double v) { return json(v).dump(); }

struct TrialInputs {
  const ExperimentConfig& config;
  const EnvironmentSpec& env;
  std::size_t horizon;
  DiscountSpec discount;
  double truth;
  const QStack* exact_q;
};

class TrialRunner {
 public:
  TrialRunner(const TrialInputs& in, Dataset logged, double scale, std::size_t trial, std::uint64_t data_seed)
      : in_(in), n_(logged.size()), scale_(scale), trial_(trial), data_seed_(data_seed),
        dataset_(std::move(logged)) {
    bias_seed_ = derive_seed(data_seed_, label_hash("bias"));
    const std::size_t n = n_;
    const std::size_t targets = targeting_size(in.config, n);
    if (in.config.exact_model) {
      targeting_ = dataset_;
      q_ = initial(dataset_);
    } else {
      q_ = initial(dataset_.slice(0, n - targets));
      targeting_ = dataset_.slice(n - targets, n);
    }
    batch_ = make_batch(targeting_, q_, in.env.evaluation, in.env.behavior);
  }

  QStack initial(const Dataset& part) const {
    QStack q = in_.exact_q != nullptr
                   ? *in_.exact_q
                   : q_from_model(fit_empirical_model(part, in_.env.mdp.num_actions(),
                                                      in_.env.mdp.reward_bounds(), in_.config.smoothing),
                                  in_.env.evaluation, in_.horizon, in_.discount);
    return inject_bias(q, scale_, bias_seed_);
  }

  TrialRecord run(const std::string& key) {
    TrialRecord record;
    record.environment = in_.env.name;
    record.estimator = key;
    record.n = n_;
    record.scale = scale_;
    record.trial = trial_;
    record.truth = in_.truth;
    const auto start = std::chrono::steady_clock::now();
    try {
      record.estimate = estimate(key, record.diagnostics);
      if (!std::isfinite(record.estimate)) throw InvariantError("non-finite estimate");
      record.squared_error = (record.estimate - record.truth) * (record.estimate - record.truth);
    } catch (const std::exception& e) {
      record.ok = false;
      record.error = e.what();
      record.estimate = 0.0;
      record.squared_error = 0.0;
    }
    if (in_.config.record_timing)
      record.runtime_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return record;
  }

 private:
  LtmleConfig ltmle_config() const {
    LtmleConfig config;
    config.split_fraction = in_.config.split_fraction;
    config.folds = in_.config.folds;
    return config;
  }

  EnsembleOptions ensemble_options(const std::string& key) const {
    EnsembleOptions options;
    options.triples = in_.config.regularization_grid;
    options.bootstrap = in_.config.bootstrap;
    options.ci_level = in_.config.ci_level;
    options.seed = derive_seed(data_seed_, label_hash(key));
    options.ltmle = ltmle_config();
    options.workers = 1;
    return options;
  }

  double estimate(const std::string& key, json& diagnostics) {
    const StochasticPolicy& pi_e = in_.env.evaluation;
    if (key == "is" || key == "pdis" || key == "wis" || key == "cwpdis") {
      if (!is_) is_ = is_family(batch_, in_.discount);
      if (key == "is") return is_->is;
      if (key == "pdis") return is_->pdis;
      if (key == "wis") return is_->wis;
      return is_->cwpdis;
    }
    if (key == "dm") return dm_estimate(q_, pi_e, batch_.initial_row);
    if (key == "wdr") return wdr_estimate(batch_, q_, pi_e);
    if (key == "magic") {
      MagicOptions options;
      options.bootstrap = in_.config.bootstrap;
      options.ci_level = in_.config.ci_level;
      options.seed = derive_seed(data_seed_, label_hash(key));
      const MagicResult result = magic_estimate(batch_, q_, pi_e, options);
      diagnostics = to_json(result);
      return result.estimate;
    }
    if (key == "ltmle") {
      const LtmleKernel kernel(batch_, q_, pi_e, ltmle_config());
      const LtmleResult result = kernel.run(unregularized(in_.horizon), {}, false);
      diagnostics = {{"epsilon", result.fit.epsilon}, {"threshold", result.fit.threshold_used}};
      return result.estimate;
    }
    if (key == "cvltmle") {
      const CvLtmleResult result =
          cv_ltmle(dataset_, [this](const Dataset& part) { return initial(part); }, pi_e, in_.env.behavior,
                   unregularized(in_.horizon), ltmle_config());
      diagnostics = {{"epsilon", result.fit.epsilon}, {"fold_estimates", result.fold_estimates}};
      return result.estimate;
    }
    if (key == "rltmle1" || key == "rltmle2") {
      const RltmleResult result = key == "rltmle1" ? rltmle1(batch_, q_, pi_e, ensemble_options(key))
                                                   : rltmle2(batch_, q_, pi_e, ensemble_options(key));
      diagnostics = to_json(result);
      return result.estimate;
    }
    throw ConfigurationError("unknown estimator key: " + key);
  }

  const TrialInputs& in_;
  std::size_t n_;
  double scale_;
  std::size_t trial_;
  std::uint64_t data_seed_ = 0;
  std::uint64_t bias_seed_ = 0;
  Dataset dataset_;
  Dataset targeting_;
  QStack q_;
  LoggedBatch batch_;
  std::optional<ImportanceSamplingEstimates> is_;
};

template <typename T>
void read_field(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

const std::vector<std::string>& estimator_keys() {
  static const std::vector<std::string> keys{"is",   "pdis",  "wis",     "cwpdis",  "dm",     "wdr",
                                             "magic", "ltmle", "cvltmle", "rltmle1", "rltmle2"};
  return keys;
}

void ExperimentConfig::validate() const {
  const auto names = environment_names();
  if (std::find(names.begin(), names.end(), environment) == names.end())
    throw ConfigurationError("unknown environment: " + environment);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigurationError("gamma must lie in (0, 1]");
  if (trials < 1) throw ConfigurationError("trials must be at least 1");
  if (sample_sizes.empty()) throw ConfigurationError("sample_sizes must not be empty");
  if (misspecification.empty()) throw ConfigurationError("misspecification must not be empty");
  for (double s : misspecification)
    if (!(s >= 0.0)) throw ConfigurationError("misspecification scales must be non-negative");
  if (estimators.empty()) throw ConfigurationError("estimators must not be empty");
  for (const auto& key : estimators)
    if (std::find(estimator_keys().begin(), estimator_keys().end(), key) == estimator_keys().end())
      throw ConfigurationError("unknown estimator key: " + key);
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigurationError("split_fraction must lie in (0, 1)");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigurationError("ci_level must lie in (0, 1)");
  if (bootstrap < 2) throw ConfigurationError("bootstrap must be at least 2");
  if (folds < 2) throw ConfigurationError("folds must be at least 2");
  if (!(smoothing >= 0.0)) throw ConfigurationError("smoothing must be non-negative");
  for (std::size_t n : sample_sizes) {
    const std::size_t targets = targeting_size(*this, n);
    if (targets < 1 || (!exact_model && targets >= n))
      throw ConfigurationError("sample size " + std::to_string(n) + " leaves an empty split");
    if (n < folds && std::find(estimators.begin(), estimators.end(), "cvltmle") != estimators.end())
      throw ConfigurationError("sample size " + std::to_string(n) + " is smaller than the fold count");
  }
  const std::size_t h = resolved_horizon(*this);
  for (const auto& triple : regularization_grid) rltmle::validate(triple, h);
  if (!regularization_grid.empty() && !(regularization_grid.back() == unregularized(h)))
    throw ConfigurationError("the last regularization triple must be (1, T, 0)");
}

ExperimentConfig config_from_json(const json& j) {
  static const std::set<std::string> known{
      "environment", "horizon", "gamma",  "sample_sizes", "misspecification", "trials",
      "estimators",  "regularization_grid", "bootstrap", "ci_level", "seed", "output",
      "split_fraction", "smoothing", "folds", "workers", "exact_model", "record_timing"};
  if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw ConfigurationError("unknown config field: " + item.key());
  ExperimentConfig config;
  try {
    read_field(j, "environment", config.environment);
    read_field(j, "horizon", config.horizon);
    read_field(j, "gamma", config.gamma);
    read_field(j, "sample_sizes", config.sample_sizes);
    read_field(j, "misspecification", config.misspecification);
    read_field(j, "trials", config.trials);
    read_field(j, "estimators", config.estimators);
    read_field(j, "bootstrap", config.bootstrap);
    read_field(j, "ci_level", config.ci_level);
    read_field(j, "seed", config.seed);
    read_field(j, "output", config.output);
    read_field(j, "split_fraction", config.split_fraction);
    read_field(j, "smoothing", config.smoothing);
    read_field(j, "folds", config.folds);
    read_field(j, "workers", config.workers);
    read_field(j, "exact_model", config.exact_model);
    read_field(j, "record_timing", config.record_timing);
    if (j.contains("regularization_grid"))
      for (const auto& t : j.at("regularization_grid")) config.regularization_grid.push_back(triple_from_json(t));
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed config: ") + e.what());
  }
  return config;
}

json to_json(const ExperimentConfig& config) {
  json grid = json::array();
  for (const auto& t : config.regularization_grid) grid.push_back(to_json(t));
  return {{"environment", config.environment},
          {"horizon", config.horizon},
          {"gamma", config.gamma},
          {"sample_sizes", config.sample_sizes},
          {"misspecification", config.misspecification},
          {"trials", config.trials},
          {"estimators", config.estimators},
          {"regularization_grid", std::move(grid)},
          {"bootstrap", config.bootstrap},
          {"ci_level", config.ci_level},
          {"seed", config.seed},
          {"output", config.output},
          {"split_fraction", config.split_fraction},
          {"smoothing", config.smoothing},
          {"folds", config.folds},
          {"exact_model", config.exact_model},
          {"record_timing", config.record_timing}};
}

json to_json(const TrialRecord& r) {
  json j{{"env", r.environment}, {"estimator", r.estimator}, {"n", r.n},
         {"scale", r.scale},     {"trial", r.trial},         {"estimate", r.estimate},
         {"truth", r.truth},     {"squared_error", r.squared_error},
         {"runtime_ms", r.runtime_ms}, {"ok", r.ok}};
  if (!r.ok) j["error"] = r.error;
  if (!r.diagnostics.is_null()) j["diagnostics"] = r.diagnostics;
  return j;
}

TrialRecord record_from_json(const json& j) {
  TrialRecord r;
  r.environment = j.at("env").get<std::string>();
  r.estimator = j.at("estimator").get<std::string>();
  r.n = j.at("n").get<std::size_t>();
  r.scale = j.at("scale").get<double>();
  r.trial = j.at("trial").get<std::size_t>();
  r.estimate = j.at("estimate").get<double>();
  r.truth = j.at("truth").get<double>();
  r.squared_error = j.at("squared_error").get<double>();
  r.runtime_ms = j.value("runtime_ms", 0.0);
  r.ok = j.at("ok").get<bool>();
  r.error = j.value("error", std::string());
  if (j.contains("diagnostics")) r.diagnostics = j.at("diagnostics");
  return r;
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const EnvironmentSpec env = make_environment(config.environment, config.horizon);
  const std::size_t horizon = env.default_horizon;
  check_absolute_continuity(env.evaluation, env.behavior, horizon);
  const DiscountSpec discount(config.gamma);
  const double truth = exact_policy_value(env.mdp, env.evaluation, horizon, discount);
  const QStack exact = exact_q_functions(env.mdp, env.evaluation, horizon, discount);
  const TrialInputs inputs{config, env, horizon, discount, truth, config.exact_model ? &exact : nullptr};

  std::vector<std::tuple<std::size_t, double, std::size_t>> units;
  for (std::size_t n : config.sample_sizes)
    for (double scale : config.misspecification)
      for (std::size_t trial = 0; trial < config.trials; ++trial) units.emplace_back(n, scale, trial);

  std::vector<std::vector<TrialRecord>> slots(units.size());
  std::vector<std::exception_ptr> failures(units.size());
  const auto count = static_cast<std::ptrdiff_t>(units.size());
#ifdef _OPENMP
  const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (std::ptrdiff_t u = 0; u < count; ++u) {
    try {
      const auto& [n, scale, trial] = units[static_cast<std::size_t>(u)];
      const std::uint64_t data_seed = derive_seed(derive_seed(config.seed, n), trial);
      TrialRunner runner(inputs, simulate(env.mdp, env.behavior, horizon, n, data_seed), scale, trial, data_seed);
      for (const auto& key : config.estimators) slots[static_cast<std::size_t>(u)].push_back(runner.run(key));
    } catch (...) {
      failures[static_cast<std::size_t>(u)] = std::current_exception();
    }
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  std::vector<TrialRecord> records;
  records.reserve(units.size() * config.estimators.size());
  for (auto& slot : slots)
    for (auto& record : slot) records.push_back(std::move(record));
  return records;
}

std::vector<TrialRecord> run_on_dataset(const ExperimentConfig& config, const Dataset& dataset, double scale) {
  config.validate();
  const EnvironmentSpec env = make_environment(config.environment, config.horizon);
  const std::size_t horizon = env.default_horizon;
  if (dataset.horizon != horizon)
    throw ConfigurationError("dataset horizon " + std::to_string(dataset.horizon) + " differs from the environment's " +
                             std::to_string(horizon));
  const std::size_t targets = targeting_size(config, dataset.size());
  if (targets < 1 || (!config.exact_model && targets >= dataset.size()))
    throw ConfigurationError("dataset of " + std::to_string(dataset.size()) + " trajectories leaves an empty split");
  check_absolute_continuity(env.evaluation, env.behavior, horizon);
  const DiscountSpec discount(config.gamma);
  const double truth = exact_policy_value(env.mdp, env.evaluation, horizon, discount);
  const QStack exact = exact_q_functions(env.mdp, env.evaluation, horizon, discount);
  const TrialInputs inputs{config, env, horizon, discount, truth, config.exact_model ? &exact : nullptr};
  TrialRunner runner(inputs, dataset, scale, 0, config.seed);
  std::vector<TrialRecord> records;
  for (const auto& key : config.estimators) records.push_back(runner.run(key));
  return records;
}

void write_results(const ExperimentConfig& config, const std::vector<TrialRecord>& records, std::ostream& out) {
  out << json{{"config", to_json(config)}, {"version", kVersion}}.dump() << '\n';
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

ResultsFile read_results(std::istream& in) {
  ResultsFile file;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (line_number == 1 && j.contains("config")) {
        file.config = j.at("config");
        continue;
      }
      file.records.push_back(record_from_json(j));
    } catch (const json::exception& e) {
      throw ConfigurationError("results line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return file;
}

double jackknife_se(const std::vector<double>& values,
                    const std::function<double(const std::vector<double>&)>& statistic) {
  const std::size_t m = values.size();
  if (m < 2) return 0.0;
  std::vector<double> leave_one_out(m);
  std::vector<double> subsample(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(i), subsample.begin());
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(i) + 1, values.end(),
              subsample.begin() + static_cast<std::ptrdiff_t>(i));
    leave_one_out[i] = statistic(subsample);
  }
  double mean = 0.0;
  for (double v : leave_one_out) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : leave_one_out) ss += (v - mean) * (v - mean);
  return std::sqrt(static_cast<double>(m - 1) / static_cast<double>(m) * ss);
}

std::vector<ReportRow> summarize(const std::vector<TrialRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::size_t, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const TrialRecord*>> cells;
  for (const auto& r : records) {
    const Key key{r.environment, r.estimator, r.n, r.scale};
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }

  const auto mean = [](const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    return v.empty() ? 0.0 : total / static_cast<double>(v.size());
  };

  std::vector<ReportRow> rows;
  for (const Key& key : order) {
    ReportRow row;
    std::tie(row.environment, row.estimator, row.n, row.scale) = key;
    std::vector<double> errors, squared, runtimes;
    for (const TrialRecord* r : cells.at(key)) {
      if (!r->ok) {
        ++row.failures;
        continue;
      }
      errors.push_back(r->estimate - r->truth);
      squared.push_back(r->squared_error);
      runtimes.push_back(r->runtime_ms);
    }
    row.trials = squared.size();
    row.mse = mean(squared);
    row.mse_se = jackknife_se(squared, mean);
    row.bias = mean(errors);
    double var = 0.0;
    for (double e : errors) var += (e - row.bias) * (e - row.bias);
    row.variance = errors.empty() ? 0.0 : var / static_cast<double>(errors.size());
    row.mean_runtime_ms = mean(runtimes);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << "env,estimator,n,scale,trials,mse,mse_se,bias,variance,mean_runtime_ms\n";
  for (const auto& r : rows)
    out << r.environment << ',' << r.estimator << ',' << r.n << ',' << number(r.scale) << ',' << r.trials << ','
        << number(r.mse) << ',' << number(r.mse_se) << ',' << number(r.bias) << ',' << number(r.variance) << ','
        << number(r.mean_runtime_ms) << '\n';
}

json report_summary(const json& config, const std::vector<ReportRow>& rows) {
  json cells = json::array();
  for (const auto& r : rows)
    cells.push_back({{"env", r.environment},  {"estimator", r.estimator}, {"n", r.n},
                     {"scale", r.scale},      {"trials", r.trials},       {"failures", r.failures},
                     {"mse", r.mse},          {"mse_se", r.mse_se},       {"bias", r.bias},
                     {"variance", r.variance}, {"mean_runtime_ms", r.mean_runtime_ms}});
  return {{"version", kVersion}, {"config", config}, {"cells", std::move(cells)}};
}

void emit_report(const std::string& results_path, const std::string& prefix) {
  std::ifstream in(results_path);
  if (!in) throw ConfigurationError("cannot read results file: " + results_path);
  const ResultsFile file = read_results(in);
  const auto rows = summarize(file.records);
  std::ofstream csv(prefix + ".csv");
  std::ofstream summary(prefix + ".json");
  if (!csv || !summary) throw ConfigurationError("cannot write report files with prefix " + prefix);
  write_report_csv(rows, csv);
  summary << report_summary(file.config, rows).dump(2) << '\n';
}

}  // namespace rltmle
