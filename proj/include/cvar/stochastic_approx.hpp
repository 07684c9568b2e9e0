#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace cvar {

/// zeta(i) = coefficient / i^exponent for i >= 1. Robbins-Monro conditions
/// (sum zeta = inf, sum zeta^2 < inf) hold for exponent in (0.5, 1].
struct StepSchedule {
  double coefficient = 1.0;
  double exponent = 1.0;

  void validate() const;
  double operator()(std::size_t i) const;
};

/// Throws InputError for i == 0.
double step(const StepSchedule& schedule, std::size_t i);

/// SPSA perturbation Delta_k = coefficient / k^exponent. The exponent may be
/// any nonnegative value.
struct PerturbationSchedule {
  double coefficient = 0.5;
  double exponent = 0.1;

  void validate() const;
  double operator()(std::size_t k) const;
};

double spsa_delta(std::size_t k, const PerturbationSchedule& schedule);

/// Step sizes ordered slowest first: zeta_1 (lambda), zeta_2 (theta),
/// zeta_3 (nu) and optionally zeta_4 (critic), plus the SPSA perturbation.
struct TimescaleStack {
  std::vector<StepSchedule> rates;
  PerturbationSchedule perturbation;

  /// Each schedule is valid, every slower schedule decays strictly faster than
  /// the next one (zeta_j = o(zeta_{j+1})), and, with `uses_perturbation`,
  /// sum (zeta_2 / Delta)^2 < inf, i.e. 2 (p_2 - p_Delta) > 1.
  void validate(bool uses_perturbation) const;

  double zeta(std::size_t which, std::size_t i) const { return rates.at(which - 1)(i); }
};

/// Closed interval; projection is clamping.
struct Interval {
  double lo;
  double hi;

  double project(double x) const;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Axis-aligned box; Euclidean projection is coordinate-wise clamping.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box uniform(std::size_t dim, double lo, double hi);
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x) const;
};

double project(double x, const Interval& set);
Eigen::VectorXd project(const Eigen::VectorXd& x, const Box& set);

/// Theta box, N = [-C_max / (1 - gamma), C_max / (1 - gamma)] and [0, lambda_max].
struct ProjectionSets {
  Box theta;
  Interval nu;
  Interval lambda;

  static ProjectionSets make(std::size_t theta_dim, double theta_bound, double c_max, double gamma,
                             double lambda_max);
};

enum class CapDecision { kContinue, kDouble, kAccept };

/// DOUBLE when the trailing `window` lambda values all lie within `margin`
/// (relative) of lambda_max; ACCEPT when that is not the case and the
/// parameter-change test passed; CONTINUE otherwise or with a short history.
CapDecision lambda_max_controller(std::span<const double> lambda_history, double lambda_max, double margin,
                                  std::size_t window, bool parameters_converged);

struct ConvergenceSettings {
  std::size_t window = 50;
  double tolerance = 1e-4;
  double margin = 0.01;
};

/// Sliding window over (theta, nu, lambda) snapshots.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(ConvergenceSettings settings);

  void observe(const Eigen::VectorXd& theta, double nu, double lambda);
  void reset();
  std::size_t size() const { return snapshots_.size(); }

  /// max over coordinates of (max - min over the window) / max(1, |latest|).
  double max_relative_change() const;
  CapDecision decide(double lambda_max) const;

 private:
  ConvergenceSettings settings_;
  std::deque<Eigen::VectorXd> snapshots_;
};

}  // namespace cvar
