#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cvar/mdp.hpp"
#include "cvar/policy.hpp"
#include "cvar/risk.hpp"
#include "cvar/saddle.hpp"
#include "cvar/stochastic_approx.hpp"

namespace cvar {

struct GradientEstimate {
  Eigen::VectorXd g_theta;
  double g_nu = 0.0;
  double g_lambda = 0.0;
  std::size_t batch_size = 0;
};

/// Sample-average gradients of L(theta, nu, lambda) from a batch:
///   g_nu     = lambda - lambda / (1 - alpha) * sum_j w_j 1{D_j >= nu}
///   g_theta  = sum_j w_j score_j D_j + lambda / (1 - alpha) * sum_j w_j score_j (D_j - nu) 1{D_j >= nu}
///   g_lambda = nu - beta + 1 / (1 - alpha) * sum_j w_j (D_j - nu) 1{D_j >= nu}
/// Empty `weights` means w_j = 1 / N. Passing exact trajectory probabilities
/// as weights gives the expectation of the estimator.
GradientEstimate estimate_batch_gradients(std::span<const double> losses, std::span<const Eigen::VectorXd> scores,
                                          std::span<const double> weights, const SaddleIterate& iterate,
                                          const RiskSpec& risk);

GradientEstimate estimate_batch_gradients(std::span<const Trajectory> batch, const SaddleIterate& iterate,
                                          const RiskSpec& risk);

struct PgSettings {
  RiskSpec risk;
  TimescaleStack schedules;  // zeta_1 (lambda), zeta_2 (theta), zeta_3 (nu)
  double theta_bound = 60.0;
  double c_max = 4000.0;
  std::size_t batch = 100;
  std::size_t warmup = 100;
  double lambda0 = 1.0;
  bool risk_neutral = false;  // lambda frozen at 0
  std::size_t horizon_cap = 1000;
  std::size_t threads = 0;  // 0: default_thread_count()
  TrainingLimits limits;

  void validate() const;
};

/// Appendix-style defaults for the optimal stopping experiment.
PgSettings default_pg_settings();

struct PgStepInfo {
  GradientEstimate gradient;
  double mean_batch_loss = 0.0;
};

/// One iteration: N rollouts with substreams (seed, train, i, j), then the
/// nu, theta and lambda updates from the same batch, each projected.
SaddleIterate pg_iteration(const SaddleIterate& iterate, const PgSettings& settings, const ProjectionSets& sets,
                           const Environment& env, const BoltzmannPolicy& policy, std::uint64_t seed,
                           PgStepInfo* info = nullptr);

/// Applies the three projected updates for a given gradient.
SaddleIterate apply_pg_update(const SaddleIterate& iterate, const GradientEstimate& g, const TimescaleStack& schedules,
                              const ProjectionSets& sets, bool risk_neutral);

/// nu_0 = VaR_alpha of `warmup` rollouts under theta.
double warm_start_nu(const Environment& env, const BoltzmannPolicy& policy, const Eigen::VectorXd& theta,
                     const PgSettings& settings, std::uint64_t seed);

/// Algorithm 1 outer loop with the lambda_max doubling controller.
TrainingOutcome pg_train(const Environment& env, const BoltzmannPolicy& policy, const PgSettings& settings,
                         std::uint64_t seed);

}  // namespace cvar
