#pragma once

// Longitudinal targeted maximum likelihood for finite-horizon tabular MDPs.
//
// Each Q̂_t is mapped into [0, 1] by (Q̂_t + Δ_t) / 2Δ_t, clamped to
// [δ_n, 1 - δ_n], and fluctuated along the one-parameter logistic model
// σ(σ⁻¹(Q̃_t) + ε_t). The ε_t are fitted backward in t by importance-weighted
// logistic likelihood, with the normalized one-step return
// (R_t + γ V̂_{t+1}(ε_{t+1}) + Δ_t) / 2Δ_t as outcome. The fluctuated V̂_1 at
// the start state is the estimate; it always lies in [-Δ_1, Δ_1].

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rltmle/logged_batch.hpp"
#include "rltmle/mdp.hpp"
#include "rltmle/q_stack.hpp"

namespace rltmle {

/// (α softening, τ partial horizon, λ penalty); (1, T, 0) is plain LTMLE.
struct RegularizationTriple {
  double alpha = 1.0;
  std::size_t tau = 0;
  double lambda = 0.0;

  friend bool operator==(const RegularizationTriple&, const RegularizationTriple&) = default;
};

inline RegularizationTriple unregularized(std::size_t horizon) { return {1.0, horizon, 0.0}; }

/// Throws ConfigurationError unless α ∈ [0,1], τ ≤ T and λ ≥ 0.
void validate(const RegularizationTriple& triple, std::size_t horizon);

/// δ_n = min(0.01, n^{-1/2} / 4).
double default_delta_schedule(std::size_t n);

struct LtmleConfig {
  std::function<double(std::size_t)> delta_schedule = default_delta_schedule;
  /// Fraction of trajectories held out for targeting when splitting.
  double split_fraction = 0.5;
  /// Number of folds for the cross-validated variant.
  std::size_t folds = 2;
  double tolerance = 1e-10;
  std::size_t max_iterations = 200;
  double epsilon_bound = 20.0;
};

// Elementwise maps of the second-stage model.

/// (q + Δ) / 2Δ. Throws InvariantError for entries outside [-Δ, Δ].
std::vector<double> normalize_q(std::span<const double> q, double delta);
/// 2Δ (q̃ - 1/2).
std::vector<double> denormalize_q(std::span<const double> q_tilde, double delta);
/// Clamp to [δ, 1 - δ]; requires 0 < δ < 1/2.
std::vector<double> threshold(std::span<const double> q_tilde, double delta);
/// σ(σ⁻¹(q) + ε); entries must lie strictly inside (0, 1).
std::vector<double> perturb(std::span<const double> q_tilde, double epsilon);

double logistic(double x) noexcept;
double logit(double p) noexcept;

struct SoftenedWeights {
  std::vector<double> weights;
  bool degenerate = false;
};

/// x_k^α / Σ_l x_l^α with 0^0 = 1. All-zero input yields zeros and the
/// degenerate flag.
SoftenedWeights soften(std::span<const double> x, double alpha);

struct EpsilonFit {
  double epsilon = 0.0;
  /// Σ_i w_i (σ(σ⁻¹(q̃_i) + ε) - ũ_i) at the returned ε.
  double score = 0.0;
  std::size_t iterations = 0;
  bool degenerate = false;
  /// The optimum lies beyond ±epsilon_bound (e.g. every outcome is 0 or 1).
  bool at_bound = false;
};

/// Minimizes -Σ_i w_i [ũ_i log p_i + (1 - ũ_i) log(1 - p_i)] + λ|ε| with
/// p_i = σ(σ⁻¹(q̃_i) + ε). Zero total weight gives ε = 0 and the degenerate
/// flag. Throws SolverError if the tolerance is not met in max_iterations.
EpsilonFit fit_epsilon(std::span<const double> weights, std::span<const double> u_tilde,
                       std::span<const double> q_tilde, double lambda, const LtmleConfig& config = {});

/// Same objective with observations grouped by their offset: group g has
/// total weight weights[g] and logit offset offsets[g]; `weighted_outcome`
/// is Σ_i w_i ũ_i over all observations.
EpsilonFit fit_epsilon_grouped(std::span<const double> weights, std::span<const double> offsets,
                               double weighted_outcome, double lambda, const LtmleConfig& config);

struct SecondStageFit {
  std::vector<double> epsilon;
  std::vector<double> score_residuals;
  double threshold_used = 0.0;
  std::vector<bool> degenerate;
  std::vector<bool> at_bound;
};

struct LtmleResult {
  double estimate = 0.0;
  SecondStageFit fit;
  /// Per-trajectory influence-function values (empty if not requested).
  std::vector<double> eif_values;
  /// Q̂_t^δ(ε_t), already rescaled to [-Δ_t, Δ_t].
  QStack perturbed;
};

/// Backward targeting bound to one logged batch and one initial estimator.
///
/// The constructor caches the thresholded logits; powered ratios ρ^α are
/// cached per α through prepare_alpha(), which must happen before run() is
/// called concurrently. run() itself is const and thread-safe.
class LtmleKernel {
 public:
  LtmleKernel(const LoggedBatch& batch, const QStack& q, const StochasticPolicy& pi_e,
              LtmleConfig config = {});

  void prepare_alpha(double alpha);

  /// `frequency` repeats trajectory i frequency[i] times; empty means once.
  LtmleResult run(const RegularizationTriple& reg, std::span<const double> frequency = {},
                  bool with_eif = true) const;

  /// Estimate only; skips influence values and diagnostics.
  double estimate(const RegularizationTriple& reg, std::span<const double> frequency = {}) const;

  const LoggedBatch& batch() const noexcept { return *batch_; }
  std::size_t horizon() const noexcept { return batch_->horizon; }

 private:
  struct Workspace;
  double backward(const RegularizationTriple& reg, std::span<const double> frequency,
                  Workspace& work) const;
  std::span<const double> powered_ratios(double alpha, std::vector<double>& scratch) const;

  const LoggedBatch* batch_;
  const QStack* q_;
  const StochasticPolicy* pi_e_;
  LtmleConfig config_;
  std::vector<double> alphas_;
  std::vector<std::vector<double>> powered_;  // [alpha index][t * n + i]
};

/// Runs backward targeting on a targeting split with an initial estimator fitted
/// elsewhere.
LtmleResult ltmle_backward(const Dataset& targeting, const QStack& q, const StochasticPolicy& pi_e,
                           const StochasticPolicy& pi_b, const RegularizationTriple& reg,
                           const LtmleConfig& config = {});

/// Σ_t γ^t ρ_{1:t+1} (r_t + γ V̂_{t+1}(s_{t+1}) - Q̂_t(s_t, a_t)) with V̂_{T+1} = 0.
double eif_evaluate(const Trajectory& trajectory, std::span<const std::size_t> observation_map,
                    const QStack& q_perturbed, const StochasticPolicy& pi_e,
                    const StochasticPolicy& pi_b);

using InitialEstimator = std::function<QStack(const Dataset&)>;

struct CvLtmleResult {
  double estimate = 0.0;
  SecondStageFit fit;
  std::vector<double> fold_estimates;
};

/// Cross-validated LTMLE: Q̂ is refit on each training fold, and a single
/// ε_t per step minimizes the held-out likelihood pooled over folds (each
/// test fold's softened weights sum to 1/V). Folds are contiguous blocks.
/// Throws ConfigurationError when a training or test fold would be empty.
CvLtmleResult cv_ltmle(const Dataset& dataset, const InitialEstimator& initial,
                       const StochasticPolicy& pi_e, const StochasticPolicy& pi_b,
                       const RegularizationTriple& reg, const LtmleConfig& config = {});

}  // namespace rltmle
