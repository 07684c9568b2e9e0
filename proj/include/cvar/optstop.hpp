#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cvar/mdp.hpp"
#include "cvar/risk.hpp"

namespace cvar {

struct OptStopParams {
  double c0 = 1.0;
  double holding_cost = 0.1;  // p_h
  std::size_t horizon = 20;   // T
  double up_factor = 1.5;     // f_u
  double down_factor = 0.8;   // f_d
  double up_probability = 0.65;

  void validate() const;
};

/// Buyer facing a multiplicatively moving price. State coords are
/// (c, k, ups): the price, the step index and the number of up moves so far;
/// the price is recomputed from (k, ups) so equal nodes compare equal.
/// ACCEPT, or any action at k = T, pays c and terminates; WAIT pays p_h.
class OptimalStopping final : public Environment {
 public:
  static constexpr std::size_t kAccept = 0;
  static constexpr std::size_t kWait = 1;

  explicit OptimalStopping(OptStopParams params);

  const OptStopParams& params() const { return params_; }
  double price(std::size_t k, std::size_t ups) const;

  EnvState initial_state() const override;
  std::size_t num_actions() const override { return 2; }
  std::vector<Outcome> outcomes(const EnvState& state, std::size_t action) const override;

  /// (log-price scaled to [0, 1] over the reachable range, k / T).
  std::size_t feature_input_dim() const override { return 2; }
  void feature_input(const EnvState& state, std::vector<double>& out) const override;

  /// p_h sum_{k<T} gamma^k + c0 f_u^T
  std::optional<double> loss_bound(double gamma) const override;
  std::string describe() const override;

 private:
  OptStopParams params_;
};

/// Action probabilities as a function of the state.
using StatePolicy = std::function<Eigen::VectorXd(const EnvState&)>;

/// Exact distribution of the discounted loss over all price paths. Refuses
/// horizons above `max_horizon`.
EmpiricalDistribution enumerate_loss_distribution(const OptimalStopping& env, const StatePolicy& policy,
                                                  double gamma, std::size_t max_horizon = 16);

}  // namespace cvar
