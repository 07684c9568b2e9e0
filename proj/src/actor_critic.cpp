#include "cvar/actor_critic.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cvar/errors.hpp"
#include "cvar/parallel.hpp"
#include "cvar/rng.hpp"

namespace cvar {

double spsa_nu_gradient(double lambda, double value_plus, double value_minus, double delta) {
  if (!(delta > 0.0)) throw InputError("SPSA perturbation must be positive");
  return lambda + (value_plus - value_minus) / (2.0 * delta);
}

double spsa_nu_gradient_alternative(double lambda, double value_plus, double value_minus, double delta,
                                    double alpha) {
  if (!(delta > 0.0)) throw InputError("SPSA perturbation must be positive");
  return lambda * (1.0 + (value_plus - value_minus) / (2.0 * (1.0 - alpha) * delta));
}

double spsa_nu_update(const AcIterate& iterate, const CriticFeatureMap& features, const EnvState& x0,
                      const RiskSpec& risk, double delta, double step, const Interval& nu_set, AcVariant variant) {
  const double plus = iterate.v.dot(features(AugmentedState{x0, iterate.nu + delta}));
  const double minus = iterate.v.dot(features(AugmentedState{x0, iterate.nu - delta}));
  const double g = variant == AcVariant::kAlternativeTwoCritic
                       ? spsa_nu_gradient_alternative(iterate.lambda, plus, minus, delta, risk.alpha)
                       : spsa_nu_gradient(iterate.lambda, plus, minus, delta);
  return nu_set.project(iterate.nu - step * g);
}

Eigen::VectorXd ac_theta_update(const Eigen::VectorXd& theta, double signal, const Eigen::VectorXd& grad_log,
                                double step, double gamma, const Box& theta_set) {
  return theta_set.project(theta - (step / (1.0 - gamma) * signal) * grad_log);
}

double alternative_theta_signal(double epsilon, double delta, double lambda, double alpha) {
  return epsilon + lambda / (1.0 - alpha) * delta;
}

double ac_lambda_gradient_incremental(double nu, std::size_t k, bool terminal, double s, const RiskSpec& risk) {
  double g = nu - risk.beta;
  if (terminal) {
    g += std::pow(risk.gamma, static_cast<double>(k)) / (1.0 - risk.alpha) * std::max(-s, 0.0);
  }
  return g;
}

double ac_lambda_gradient_alternative(double nu, double critic_value, const RiskSpec& risk) {
  return nu - risk.beta + critic_value / (1.0 - risk.alpha);
}

double ac_lambda_update_incremental(double lambda, double nu, std::size_t k, bool terminal, double s,
                                    const RiskSpec& risk, double step, const Interval& lambda_set) {
  return lambda_set.project(lambda + step * ac_lambda_gradient_incremental(nu, k, terminal, s, risk));
}

double semi_nu_gradient(double lambda, double terminal_budget, double alpha) {
  return lambda - (terminal_budget <= 0.0 ? lambda / (1.0 - alpha) : 0.0);
}

std::pair<double, double> semi_trajectory_updates(double nu, double lambda, double terminal_budget,
                                                  std::size_t horizon, const RiskSpec& risk, double nu_step,
                                                  double lambda_step, const ProjectionSets& sets) {
  const double next_nu = sets.nu.project(nu - nu_step * semi_nu_gradient(lambda, terminal_budget, risk.alpha));
  const double g_lambda = ac_lambda_gradient_incremental(nu, horizon, true, terminal_budget, risk);
  const double next_lambda = sets.lambda.project(lambda + lambda_step * g_lambda);
  return {next_nu, next_lambda};
}

void AcSettings::validate() const {
  risk.validate();
  if (schedules.rates.size() != 4) throw InputError("actor-critic needs four step schedules");
  schedules.validate(variant != AcVariant::kSemiTrajectory);
  if (!(lambda0 >= 0.0 && lambda0 <= risk.lambda_max)) throw InputError("lambda0 must lie in [0, lambda_max]");
  if (critic_centers == 0) throw InputError("critic.centers must be positive");
  if (warmup == 0) throw InputError("warmup must be positive");
  if (horizon_cap == 0) throw InputError("horizon cap must be positive");
  if (limits.iterations == 0) throw InputError("train.iterations must be positive");
  if (limits.max_iterations < limits.iterations) throw InputError("train.max_iterations below train.iterations");
  if (!scale.ignore && !(scale.s_max > scale.s_min)) throw InputError("features.s_max must exceed features.s_min");
  (void)ProjectionSets::make(1, theta_bound, c_max, risk.gamma, risk.lambda_max);
}

AcSettings default_ac_settings() {
  AcSettings s;
  s.risk = {0.9, 2.5, 1000.0, 0.95};
  s.schedules.rates = {{1.0, 1.0}, {1.0, 0.85}, {0.5, 0.7}, {0.5, 0.55}};
  s.schedules.perturbation = {0.5, 0.1};
  return s;
}

namespace {

double warm_start(const AugmentedEnvironment& env, const BoltzmannPolicy& policy, const Eigen::VectorXd& theta,
                  const AcSettings& settings, std::uint64_t seed) {
  std::vector<double> losses(settings.warmup);
  const std::size_t threads = settings.threads == 0 ? default_thread_count() : settings.threads;
  parallel_for(settings.warmup, threads, [&](std::size_t j) {
    Rng rng(substream_seed(seed, kTagWarmup, 0, j));
    losses[j] = rollout_augmented(env, policy, theta, 0.0, rng, settings.horizon_cap).loss;
  });
  return value_at_risk(EmpiricalDistribution(std::move(losses)), settings.risk.alpha);
}

}  // namespace

AcOutcome ac_train(const Environment& base, const BoltzmannPolicy& policy, const AcSettings& settings,
                   std::uint64_t seed) {
  settings.validate();
  const RiskSpec& risk = settings.risk;
  const bool alternative = settings.variant == AcVariant::kAlternativeTwoCritic;
  const bool semi = settings.variant == AcVariant::kSemiTrajectory;
  const AugmentedCostMode mode = alternative ? AugmentedCostMode::kZeroed : AugmentedCostMode::kStandard;

  double lambda_max = risk.lambda_max;
  ProjectionSets sets =
      ProjectionSets::make(policy.dimension(), settings.theta_bound, settings.c_max, risk.gamma, lambda_max);
  const double lambda0 = settings.risk_neutral ? 0.0 : settings.lambda0;
  AugmentedEnvironment env(base, lambda0, risk.alpha, risk.gamma, mode, settings.scale);
  if (env.policy_input_dim() != policy.input_dim()) {
    throw InputError("actor-critic policy must take the augmented input");
  }
  const AugmentedRbfCritic phi_map(env, settings.critic_centers, settings.critic_width);
  std::optional<BaseRbfCritic> f_map;
  if (alternative) f_map.emplace(base, settings.critic_centers, settings.critic_width);

  AcIterate it;
  it.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dimension()));
  it.nu = sets.nu.project(warm_start(env, policy, it.theta, settings, seed));
  it.lambda = lambda0;
  it.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(phi_map.dimension()));
  if (f_map) it.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f_map->dimension()));

  const EnvState x0 = base.initial_state();
  const TimescaleStack& z = settings.schedules;
  const double gamma = risk.gamma;

  AcOutcome out;
  ConvergenceMonitor monitor(settings.limits.convergence);
  std::size_t round_end = settings.limits.iterations;
  BoltzmannPolicy::Evaluation eval;
  std::vector<double> input;
  Eigen::VectorXd grad_log(static_cast<Eigen::Index>(policy.dimension()));

  while (it.episode < round_end) {
    const std::size_t i = ++it.episode;
    Rng rng(substream_seed(seed, kTagTrain, i));
    if (!settings.risk_neutral && !alternative) env.set_lambda(it.lambda);
    std::optional<AugmentedState> state = env.initial_state(it.nu);
    double loss = 0.0;
    double discount = 1.0;
    std::size_t t = 0;
    std::optional<double> terminal_budget;

    while (state) {
      const bool terminal = state->env.terminal;
      if (!terminal && t >= settings.horizon_cap) break;
      const std::size_t k = ++it.step;
      const std::size_t idx = semi ? i : k;

      std::size_t action = 0;
      if (!terminal) {
        env.policy_input(*state, input);
        policy.evaluate(it.theta, input, eval);
        action = rng.categorical(
            std::span<const double>(eval.probs.data(), static_cast<std::size_t>(eval.probs.size())));
        grad_log.setZero();
        policy.accumulate_grad_log(eval, action, grad_log);
      } else {
        terminal_budget = state->s;
      }
      AugmentedOutcome step = env.step(*state, action, rng);
      loss += discount * step.raw_cost;

      const Eigen::VectorXd phi = phi_map(*state);
      const Eigen::VectorXd phi_next = phi_map(step.next);
      const double delta = td_error(it.v, phi, phi_next, step.cost, gamma);
      double signal = delta;
      double epsilon = 0.0;
      Eigen::VectorXd f;
      if (f_map) {
        f = (*f_map)(*state);
        epsilon = td_error(it.u, f, (*f_map)(step.next), step.raw_cost, gamma);
        signal = alternative_theta_signal(epsilon, delta, it.lambda, risk.alpha);
      }

      // Actor updates read the pre-step values.
      double nu = it.nu;
      double lambda = it.lambda;
      if (!semi) {
        nu = spsa_nu_update(it, phi_map, x0, risk, spsa_delta(k, z.perturbation), z.zeta(3, k), sets.nu,
                            settings.variant);
        if (!settings.risk_neutral) {
          const double g = alternative ? ac_lambda_gradient_alternative(it.nu, it.v.dot(phi), risk)
                                       : ac_lambda_gradient_incremental(it.nu, t, terminal, state->s, risk);
          lambda = sets.lambda.project(it.lambda + z.zeta(1, k) * g);
        }
      }
      if (!terminal) it.theta = ac_theta_update(it.theta, signal, grad_log, z.zeta(2, idx), gamma, sets.theta);
      const double critic_step = z.zeta(4, idx);
      it.v += (critic_step * delta) * phi;
      if (f_map) it.u += (critic_step * epsilon) * f;
      it.nu = nu;
      it.lambda = lambda;
      if (!settings.risk_neutral && !alternative) env.set_lambda(it.lambda);

      if (!it.v.allFinite() || (f_map && !it.u.allFinite())) throw NumericError("critic weights diverged");
      if (!terminal) {
        discount *= gamma;
        ++t;
      }
      state = std::move(step.next);
    }

    if (semi && terminal_budget) {
      const double nu_step = settings.semi_nu_step == SemiNuStep::kZeta2 ? z.zeta(2, i) : z.zeta(3, i);
      const double lambda_step = settings.risk_neutral ? 0.0 : z.zeta(1, i);
      const auto [nu, lambda] =
          semi_trajectory_updates(it.nu, it.lambda, *terminal_budget, t, risk, nu_step, lambda_step, sets);
      it.nu = nu;
      it.lambda = settings.risk_neutral ? 0.0 : lambda;
    }

    out.training.history.push_back({i, it.nu, it.lambda, it.theta.norm(), loss, lambda_max});
    monitor.observe(it.theta, it.nu, it.lambda);
    const CapDecision decision = monitor.decide(lambda_max);
    if (decision == CapDecision::kAccept) {
      out.training.converged = true;
      break;
    }
    if (decision == CapDecision::kDouble) {
      lambda_max *= 2.0;
      sets.lambda.hi = lambda_max;
      ++out.training.doublings;
      monitor.reset();
      round_end = std::min(it.episode + settings.limits.iterations, settings.limits.max_iterations);
    }
  }

  out.training.final = {it.theta, it.nu, it.lambda, it.episode};
  out.training.lambda_max = lambda_max;
  out.final = std::move(it);
  return out;
}

}  // namespace cvar
