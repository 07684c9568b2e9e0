#include "cvar/stochastic_approx.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvar/errors.hpp"

namespace cvar {

void StepSchedule::validate() const {
  if (!(coefficient > 0.0) || !std::isfinite(coefficient)) throw InputError("step coefficient must be positive");
  if (!(exponent > 0.5 && exponent <= 1.0)) {
    throw InputError("step exponent must lie in (0.5, 1], got " + std::to_string(exponent));
  }
}

double StepSchedule::operator()(std::size_t i) const {
  if (i == 0) throw InputError("step index starts at 1");
  return coefficient / std::pow(static_cast<double>(i), exponent);
}

double step(const StepSchedule& schedule, std::size_t i) { return schedule(i); }

void PerturbationSchedule::validate() const {
  if (!(coefficient > 0.0) || !std::isfinite(coefficient)) throw InputError("SPSA coefficient must be positive");
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw InputError("SPSA exponent must be nonnegative");
}

double PerturbationSchedule::operator()(std::size_t k) const {
  if (k == 0) throw InputError("perturbation index starts at 1");
  return coefficient / std::pow(static_cast<double>(k), exponent);
}

double spsa_delta(std::size_t k, const PerturbationSchedule& schedule) { return schedule(k); }

void TimescaleStack::validate(bool uses_perturbation) const {
  if (rates.size() < 3) throw InputError("a timescale stack needs at least three schedules");
  for (const StepSchedule& s : rates) s.validate();
  for (std::size_t j = 0; j + 1 < rates.size(); ++j) {
    if (!(rates[j].exponent > rates[j + 1].exponent)) {
      throw InputError("schedule " + std::to_string(j + 1) + " must decay strictly faster than schedule " +
                       std::to_string(j + 2));
    }
  }
  if (uses_perturbation) {
    perturbation.validate();
    if (!(2.0 * (rates[1].exponent - perturbation.exponent) > 1.0)) {
      throw InputError("sum (zeta_2 / Delta)^2 diverges: need 2 (p2 - pDelta) > 1");
    }
  }
}

double Interval::project(double x) const { return std::clamp(x, lo, hi); }

Box Box::uniform(std::size_t dim, double lo, double hi) {
  if (!(lo <= hi)) throw InputError("box bounds must satisfy lo <= hi");
  const auto n = static_cast<Eigen::Index>(dim);
  return {Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi)};
}

Eigen::VectorXd Box::project(const Eigen::VectorXd& x) const {
  if (x.size() != lo.size()) throw InputError("box projection: dimension mismatch");
  return x.cwiseMax(lo).cwiseMin(hi);
}

bool Box::contains(const Eigen::VectorXd& x) const {
  return x.size() == lo.size() && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

double project(double x, const Interval& set) { return set.project(x); }

Eigen::VectorXd project(const Eigen::VectorXd& x, const Box& set) { return set.project(x); }

ProjectionSets ProjectionSets::make(std::size_t theta_dim, double theta_bound, double c_max, double gamma,
                                    double lambda_max) {
  if (!(theta_bound > 0.0)) throw InputError("theta bound must be positive");
  if (!(c_max > 0.0)) throw InputError("C_max must be positive");
  if (!(lambda_max > 0.0)) throw InputError("lambda_max must be positive");
  const double nu_bound = c_max / (1.0 - gamma);
  return {Box::uniform(theta_dim, -theta_bound, theta_bound), {-nu_bound, nu_bound}, {0.0, lambda_max}};
}

CapDecision lambda_max_controller(std::span<const double> lambda_history, double lambda_max, double margin,
                                  std::size_t window, bool parameters_converged) {
  if (window < 2) throw InputError("controller window must be at least 2");
  if (lambda_history.size() < window) return CapDecision::kContinue;
  const double threshold = (1.0 - margin) * lambda_max;
  const auto recent = lambda_history.subspan(lambda_history.size() - window);
  const bool pinned = std::all_of(recent.begin(), recent.end(), [&](double l) { return l >= threshold; });
  if (pinned) return CapDecision::kDouble;
  return parameters_converged ? CapDecision::kAccept : CapDecision::kContinue;
}

ConvergenceMonitor::ConvergenceMonitor(ConvergenceSettings settings) : settings_(settings) {
  if (settings_.window < 2) throw InputError("convergence window must be at least 2");
  if (!(settings_.tolerance > 0.0)) throw InputError("convergence tolerance must be positive");
  if (!(settings_.margin >= 0.0 && settings_.margin < 1.0)) throw InputError("cap margin must lie in [0, 1)");
}

void ConvergenceMonitor::observe(const Eigen::VectorXd& theta, double nu, double lambda) {
  Eigen::VectorXd snap(theta.size() + 2);
  snap << theta, nu, lambda;
  snapshots_.push_back(std::move(snap));
  if (snapshots_.size() > settings_.window) snapshots_.pop_front();
}

void ConvergenceMonitor::reset() { snapshots_.clear(); }

double ConvergenceMonitor::max_relative_change() const {
  if (snapshots_.empty()) return 0.0;
  Eigen::VectorXd lo = snapshots_.front();
  Eigen::VectorXd hi = snapshots_.front();
  for (const auto& s : snapshots_) {
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  const Eigen::ArrayXd scale = snapshots_.back().array().abs().max(1.0);
  return ((hi - lo).array() / scale).maxCoeff();
}

CapDecision ConvergenceMonitor::decide(double lambda_max) const {
  std::vector<double> lambdas;
  lambdas.reserve(snapshots_.size());
  for (const auto& s : snapshots_) lambdas.push_back(s[s.size() - 1]);
  const bool full = snapshots_.size() >= settings_.window;
  return lambda_max_controller(lambdas, lambda_max, settings_.margin, settings_.window,
                               full && max_relative_change() < settings_.tolerance);
}

}  // namespace cvar
