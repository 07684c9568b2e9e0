#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <utility>

#include "cvar/critic.hpp"
#include "cvar/mdp.hpp"
#include "cvar/policy.hpp"
#include "cvar/risk.hpp"
#include "cvar/saddle.hpp"
#include "cvar/stochastic_approx.hpp"

namespace cvar {

enum class AcVariant { kSpsaIncremental, kSemiTrajectory, kAlternativeTwoCritic };

/// Step used by the end-of-episode nu update of the semi-trajectory variant.
enum class SemiNuStep { kZeta2, kZeta3 };

struct AcIterate {
  Eigen::VectorXd theta;
  double nu = 0.0;
  double lambda = 0.0;
  Eigen::VectorXd v;
  Eigen::VectorXd u;  // empty unless the two-critic variant runs
  std::size_t step = 0;
  std::size_t episode = 0;
};

/// lambda + v'[phi(x0, nu + Delta) - phi(x0, nu - Delta)] / (2 Delta)
double spsa_nu_gradient(double lambda, double value_plus, double value_minus, double delta);

/// lambda (1 + v'[phi+ - phi-] / (2 (1 - alpha) Delta))
double spsa_nu_gradient_alternative(double lambda, double value_plus, double value_minus, double delta,
                                    double alpha);

/// Projected SPSA step on nu using the critic at the initial augmented state.
double spsa_nu_update(const AcIterate& iterate, const CriticFeatureMap& features, const EnvState& x0,
                      const RiskSpec& risk, double delta, double step, const Interval& nu_set, AcVariant variant);

/// theta - step / (1 - gamma) * grad_log * signal, projected onto the box.
Eigen::VectorXd ac_theta_update(const Eigen::VectorXd& theta, double signal, const Eigen::VectorXd& grad_log,
                                double step, double gamma, const Box& theta_set);

/// epsilon + lambda / (1 - alpha) * delta
double alternative_theta_signal(double epsilon, double delta, double lambda, double alpha);

/// nu - beta + gamma^k / (1 - alpha) * 1{terminal} (-s)^+ with k the
/// within-episode step index.
double ac_lambda_gradient_incremental(double nu, std::size_t k, bool terminal, double s, const RiskSpec& risk);

/// nu - beta + v'phi(x_k, s_k) / (1 - alpha)
double ac_lambda_gradient_alternative(double nu, double critic_value, const RiskSpec& risk);

double ac_lambda_update_incremental(double lambda, double nu, std::size_t k, bool terminal, double s,
                                    const RiskSpec& risk, double step, const Interval& lambda_set);

/// lambda - lambda / (1 - alpha) * 1{s_T <= 0}
double semi_nu_gradient(double lambda, double terminal_budget, double alpha);

/// End-of-episode (nu, lambda) updates of the semi-trajectory variant; both
/// use the values from before the call.
std::pair<double, double> semi_trajectory_updates(double nu, double lambda, double terminal_budget,
                                                  std::size_t horizon, const RiskSpec& risk, double nu_step,
                                                  double lambda_step, const ProjectionSets& sets);

struct AcSettings {
  RiskSpec risk;
  TimescaleStack schedules;  // zeta_1 .. zeta_4 and Delta
  AcVariant variant = AcVariant::kSpsaIncremental;
  SemiNuStep semi_nu_step = SemiNuStep::kZeta2;
  double theta_bound = 60.0;
  double c_max = 4000.0;
  double lambda0 = 1.0;
  bool risk_neutral = false;  // lambda frozen at 0
  BudgetScale scale;
  std::size_t critic_centers = 4;
  double critic_width = 1.0;
  std::size_t warmup = 100;
  std::size_t horizon_cap = 1000;
  std::size_t threads = 0;
  TrainingLimits limits;  // counted in episodes

  void validate() const;
};

AcSettings default_ac_settings();

struct AcOutcome {
  TrainingOutcome training;
  AcIterate final;
};

/// Actor-critic training on the augmented MDP built from `env`. The policy
/// takes the augmented input (base input, normalized s). Episode i draws from
/// substream (seed, train, i) and starts at (x0, nu).
AcOutcome ac_train(const Environment& env, const BoltzmannPolicy& policy, const AcSettings& settings,
                   std::uint64_t seed);

}  // namespace cvar
