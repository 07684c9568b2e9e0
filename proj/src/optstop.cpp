#include "cvar/optstop.hpp"

#include <cmath>
#include <cstdio>

#include "cvar/errors.hpp"

namespace cvar {

void OptStopParams::validate() const {
  if (!(c0 > 0.0)) throw InputError("env.c0 must be positive");
  if (!(holding_cost >= 0.0)) throw InputError("env.p_h must be nonnegative");
  if (horizon == 0) throw InputError("env.T must be positive");
  if (!(up_factor > 1.0)) throw InputError("env.f_u must exceed 1");
  if (!(down_factor > 0.0 && down_factor < 1.0)) throw InputError("env.f_d must lie in (0, 1)");
  if (!(up_probability > 0.0 && up_probability < 1.0)) throw InputError("env.p must lie in (0, 1)");
}

OptimalStopping::OptimalStopping(OptStopParams params) : params_(params) { params_.validate(); }

double OptimalStopping::price(std::size_t k, std::size_t ups) const {
  return params_.c0 * std::pow(params_.up_factor, static_cast<double>(ups)) *
         std::pow(params_.down_factor, static_cast<double>(k - ups));
}

EnvState OptimalStopping::initial_state() const { return {{params_.c0, 0.0, 0.0}, false}; }

std::vector<Outcome> OptimalStopping::outcomes(const EnvState& state, std::size_t action) const {
  if (state.terminal) throw ContractError("optimal stopping: action at a terminal state");
  if (action > kWait) throw InputError("optimal stopping: unknown action");
  const double c = state.coords.at(0);
  const auto k = static_cast<std::size_t>(state.coords.at(1));
  const auto ups = static_cast<std::size_t>(state.coords.at(2));
  if (action == kAccept || k >= params_.horizon) {
    return {{1.0, EnvState{state.coords, true}, c}};
  }
  const double kn = static_cast<double>(k + 1);
  return {
      {params_.up_probability, EnvState{{price(k + 1, ups + 1), kn, static_cast<double>(ups + 1)}, false},
       params_.holding_cost},
      {1.0 - params_.up_probability, EnvState{{price(k + 1, ups), kn, static_cast<double>(ups)}, false},
       params_.holding_cost},
  };
}

void OptimalStopping::feature_input(const EnvState& state, std::vector<double>& out) const {
  const double T = static_cast<double>(params_.horizon);
  const double log_down = std::log(params_.down_factor);
  const double span = T * (std::log(params_.up_factor) - log_down);
  out.resize(2);
  out[0] = (std::log(state.coords.at(0) / params_.c0) - T * log_down) / span;
  out[1] = state.coords.at(1) / T;
}

std::optional<double> OptimalStopping::loss_bound(double gamma) const {
  double holding = 0.0;
  double g = 1.0;
  for (std::size_t k = 0; k < params_.horizon; ++k) {
    holding += g * params_.holding_cost;
    g *= gamma;
  }
  return holding + params_.c0 * std::pow(params_.up_factor, static_cast<double>(params_.horizon));
}

std::string OptimalStopping::describe() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "optstop c0=%.17g p_h=%.17g T=%zu f_u=%.17g f_d=%.17g p=%.17g", params_.c0,
                params_.holding_cost, params_.horizon, params_.up_factor, params_.down_factor,
                params_.up_probability);
  return buf;
}

namespace {

struct PathWalker {
  const OptimalStopping& env;
  const StatePolicy& policy;
  double gamma;
  std::vector<double> losses;
  std::vector<double> weights;

  void walk(const EnvState& state, double probability, double loss, double discount) {
    const Eigen::VectorXd probs = policy(state);
    if (probs.size() != 2) throw InputError("optimal stopping policy must give two probabilities");
    for (std::size_t a = 0; a < 2; ++a) {
      const double pa = probs[static_cast<Eigen::Index>(a)];
      if (pa <= 0.0) continue;
      for (const Outcome& o : env.outcomes(state, a)) {
        const double p = probability * pa * o.probability;
        const double d = loss + discount * o.cost;
        if (o.next.terminal) {
          losses.push_back(d);
          weights.push_back(p);
        } else {
          walk(o.next, p, d, discount * gamma);
        }
      }
    }
  }
};

}  // namespace

EmpiricalDistribution enumerate_loss_distribution(const OptimalStopping& env, const StatePolicy& policy,
                                                  double gamma, std::size_t max_horizon) {
  if (env.params().horizon > max_horizon) {
    throw InputError("horizon " + std::to_string(env.params().horizon) + " is too large to enumerate (limit " +
                     std::to_string(max_horizon) + ")");
  }
  PathWalker walker{env, policy, gamma, {}, {}};
  walker.walk(env.initial_state(), 1.0, 0.0, 1.0);
  return EmpiricalDistribution(std::move(walker.losses), std::move(walker.weights));
}

}  // namespace cvar
