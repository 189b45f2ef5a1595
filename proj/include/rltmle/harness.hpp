#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rltmle/ltmle.hpp"
#include "rltmle/serialization.hpp"

namespace rltmle {

/// Keys accepted in ExperimentConfig::estimators, in report order.
const std::vector<std::string>& estimator_keys();

/// A Monte Carlo sweep over sample sizes, misspecification scales and trials.
///
/// JSON fields share these names; `horizon` 0 keeps the environment default
/// and an empty `regularization_grid` uses default_regularization_grid.
struct ExperimentConfig {
  std::string environment = "modelwin";
  std::size_t horizon = 0;
  double gamma = 1.0;
  std::vector<std::size_t> sample_sizes{100};
  std::vector<double> misspecification{0.0};
  std::size_t trials = 1;
  std::vector<std::string> estimators{"dm", "wdr"};
  std::vector<RegularizationTriple> regularization_grid;
  std::size_t bootstrap = 200;
  double ci_level = 0.1;
  std::uint64_t seed = 0;
  std::string output;
  /// Fraction of each dataset used for targeting; the rest fits the model.
  double split_fraction = 0.5;
  double smoothing = 0.5;
  std::size_t folds = 2;
  int workers = 0;
  /// Use the exact Q-functions (plus injected noise) instead of a fitted model.
  bool exact_model = false;
  /// Wall time breaks byte-for-byte reproducibility, so it is opt-in.
  bool record_timing = false;

  /// Throws ConfigurationError for unknown keys, environments or bad ranges.
  void validate() const;
};

ExperimentConfig config_from_json(const json& j);
json to_json(const ExperimentConfig& config);

struct TrialRecord {
  std::string environment;
  std::string estimator;
  std::size_t n = 0;
  double scale = 0.0;
  std::size_t trial = 0;
  double estimate = 0.0;
  double truth = 0.0;
  double squared_error = 0.0;
  double runtime_ms = 0.0;
  bool ok = true;
  std::string error;
  json diagnostics;
};

json to_json(const TrialRecord& record);
TrialRecord record_from_json(const json& j);

/// Runs every (n, scale, trial) unit; records come back ordered by
/// (n, scale, trial, estimator) whatever the worker count. An estimator that
/// throws is recorded with ok = false and the sweep carries on.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& config);

/// Every configured estimator on one logged dataset, as a single trial
/// with data seed `config.seed`. The dataset is split like a simulated one.
std::vector<TrialRecord> run_on_dataset(const ExperimentConfig& config, const Dataset& dataset, double scale);

/// Config line followed by one record per line.
void write_results(const ExperimentConfig& config, const std::vector<TrialRecord>& records,
                   std::ostream& out);

struct ResultsFile {
  json config;
  std::vector<TrialRecord> records;
};

/// Throws ConfigurationError on malformed input.
ResultsFile read_results(std::istream& in);

/// Jackknife standard error of `statistic` over leave-one-out subsamples.
double jackknife_se(const std::vector<double>& values,
                    const std::function<double(const std::vector<double>&)>& statistic);

/// One (environment, estimator, n, scale) cell over its successful trials.
/// variance is the population variance, so bias² + variance = mse.
struct ReportRow {
  std::string environment;
  std::string estimator;
  std::size_t n = 0;
  double scale = 0.0;
  std::size_t trials = 0;
  double mse = 0.0;
  double mse_se = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mean_runtime_ms = 0.0;
  std::size_t failures = 0;
};

std::vector<ReportRow> summarize(const std::vector<TrialRecord>& records);

/// Header: env,estimator,n,scale,trials,mse,mse_se,bias,variance,mean_runtime_ms
void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out);
json report_summary(const json& config, const std::vector<ReportRow>& rows);

/// Reads a results file and writes `<prefix>.csv` and `<prefix>.json`.
void emit_report(const std::string& results_path, const std::string& prefix);

}  // namespace rltmle
