#include "cvar/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cvar/errors.hpp"

namespace cvar {
namespace {

constexpr double kWeightSumTolerance = 1e-12;
// Slack on the cumulative-weight comparison in VaR so that e.g. ten weights of
// 0.1 still reach F = 0.9 at the ninth sample despite rounding.
constexpr double kCdfSlack = 1e-12;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InputError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

struct Atom {
  double value;
  double weight;
};

// Distinct sample values in increasing order with their aggregated weight.
std::vector<Atom> sorted_atoms(const EmpiricalDistribution& dist) {
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  const auto samples = dist.samples();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
  std::vector<Atom> atoms;
  for (std::size_t idx : order) {
    const double z = samples[idx];
    const double w = dist.weights()[idx];
    if (!atoms.empty() && atoms.back().value == z) {
      atoms.back().weight += w;
    } else {
      atoms.push_back({z, w});
    }
  }
  return atoms;
}

}  // namespace

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw InputError("empirical distribution needs at least one sample");
  weights_.assign(samples_.size(), 1.0 / static_cast<double>(samples_.size()));
  for (double z : samples_) {
    if (!std::isfinite(z)) throw InputError("empirical distribution samples must be finite");
  }
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples, std::vector<double> weights)
    : samples_(std::move(samples)), weights_(std::move(weights)) {
  if (samples_.empty()) throw InputError("empirical distribution needs at least one sample");
  if (weights_.size() != samples_.size()) {
    throw InputError("weights and samples must have the same length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) throw InputError("empirical distribution samples must be finite");
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw InputError("weights must be finite and nonnegative");
    }
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw InputError("weights must sum to 1, got " + std::to_string(total));
  }
}

double EmpiricalDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) m += weights_[i] * samples_[i];
  return m;
}

double EmpiricalDistribution::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const double d = samples_[i] - m;
    v += weights_[i] * d * d;
  }
  return v;
}

double EmpiricalDistribution::min() const { return *std::min_element(samples_.begin(), samples_.end()); }

double EmpiricalDistribution::max() const { return *std::max_element(samples_.begin(), samples_.end()); }

void RiskSpec::validate() const {
  check_alpha(alpha);
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) throw InputError("lambda_max must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
  if (!std::isfinite(beta)) throw InputError("beta must be finite");
}

double value_at_risk(const EmpiricalDistribution& dist, double alpha) {
  check_alpha(alpha);
  const auto atoms = sorted_atoms(dist);
  double cdf = 0.0;
  for (const Atom& atom : atoms) {
    cdf += atom.weight;
    if (cdf >= alpha - kCdfSlack) return atom.value;
  }
  return atoms.back().value;
}

double h_alpha(const EmpiricalDistribution& dist, double nu, double alpha) {
  check_alpha(alpha);
  double excess = 0.0;
  const auto samples = dist.samples();
  const auto weights = dist.weights();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    excess += weights[i] * std::max(samples[i] - nu, 0.0);
  }
  return nu + excess / (1.0 - alpha);
}

double cvar(const EmpiricalDistribution& dist, double alpha) {
  check_alpha(alpha);
  const auto atoms = sorted_atoms(dist);
  const std::size_t m = atoms.size();

  // Suffix sums give E[(Z - z_j)^+] = sum_{i>j} w_i z_i - z_j sum_{i>j} w_i.
  std::vector<double> tail_weight(m + 1, 0.0);
  std::vector<double> tail_moment(m + 1, 0.0);
  for (std::size_t j = m; j-- > 0;) {
    tail_weight[j] = tail_weight[j + 1] + atoms[j].weight;
    tail_moment[j] = tail_moment[j + 1] + atoms[j].weight * atoms[j].value;
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    const double z = atoms[j].value;
    const double excess = std::max(tail_moment[j + 1] - z * tail_weight[j + 1], 0.0);
    best = std::min(best, z + excess / (1.0 - alpha));
  }
  return best;
}

double cvar_oracle(const EmpiricalDistribution& dist, double alpha, std::span<const double> grid) {
  if (grid.empty()) throw InputError("cvar_oracle needs a non-empty grid");
  double best = std::numeric_limits<double>::infinity();
  for (double nu : grid) best = std::min(best, h_alpha(dist, nu, alpha));
  return best;
}

double tail_probability(const EmpiricalDistribution& dist, double threshold) {
  double p = 0.0;
  const auto samples = dist.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] >= threshold) p += dist.weights()[i];
  }
  return p;
}

}  // namespace cvar
