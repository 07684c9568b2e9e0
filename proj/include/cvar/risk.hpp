#pragma once

#include <span>
#include <vector>

namespace cvar {

/// Finitely supported loss distribution. Weights default to uniform.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> samples);
  EmpiricalDistribution(std::vector<double> samples, std::vector<double> weights);

  std::span<const double> samples() const { return samples_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return samples_.size(); }

  double mean() const;
  /// Population variance (weights sum to one, so no Bessel correction).
  double variance() const;
  double min() const;
  double max() const;

 private:
  std::vector<double> samples_;
  std::vector<double> weights_;
};

/// Confidence level, loss tolerance, multiplier cap and discount of a
/// mean-CVaR problem.
struct RiskSpec {
  double alpha = 0.9;
  double beta = 1.9;
  double lambda_max = 1000.0;
  double gamma = 0.95;

  /// Throws InputError unless 0 < alpha < 1, lambda_max > 0, 0 < gamma < 1.
  void validate() const;
};

/// VaR_alpha(Z) = min { z : F(z) >= alpha }.
double value_at_risk(const EmpiricalDistribution& dist, double alpha);

/// H_alpha(Z, nu) = nu + E[(Z - nu)^+] / (1 - alpha).
double h_alpha(const EmpiricalDistribution& dist, double nu, double alpha);

/// CVaR_alpha(Z) = min_nu H_alpha(Z, nu). The function is piecewise linear and
/// convex in nu with kinks at the samples, so the minimum is taken over the
/// distinct sample values; atoms at the VaR are handled without special cases.
double cvar(const EmpiricalDistribution& dist, double alpha);

/// Minimum of h_alpha over an explicit grid of nu values. Independent
/// brute-force cross-check for cvar().
double cvar_oracle(const EmpiricalDistribution& dist, double alpha, std::span<const double> grid);

/// P(Z >= threshold).
double tail_probability(const EmpiricalDistribution& dist, double threshold);

}  // namespace cvar
