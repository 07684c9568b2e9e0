#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "cvar/stochastic_approx.hpp"

namespace cvar {

/// (theta, nu, lambda) with the index of the last completed update.
struct SaddleIterate {
  Eigen::VectorXd theta;
  double nu = 0.0;
  double lambda = 0.0;
  std::size_t iteration = 0;
};

/// One row of the training history.
struct IterationRecord {
  std::size_t iter;
  double nu;
  double lambda;
  double theta_norm;
  double mean_batch_loss;
  double lambda_max;
};

/// Limits of the outer training loop. `iterations` is the budget of one round;
/// every doubling of lambda_max opens a new round, and `max_iterations` caps
/// the total.
struct TrainingLimits {
  std::size_t iterations = 1000;
  std::size_t max_iterations = 10000;
  ConvergenceSettings convergence;
};

struct TrainingOutcome {
  SaddleIterate final;
  bool converged = false;
  double lambda_max = 0.0;
  std::size_t doublings = 0;
  std::vector<IterationRecord> history;
};

}  // namespace cvar
