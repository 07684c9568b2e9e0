#include "cvar/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "cvar/errors.hpp"

namespace cvar {
namespace {

constexpr double kProbabilityTolerance = 1e-12;

void check_cost(double cost) {
  if (!std::isfinite(cost)) throw SimulationError("environment produced a non-finite cost");
}

}  // namespace

// ---------------------------------------------------------------------------
// Environment

Transition Environment::sample(const EnvState& state, std::size_t action, Rng& rng) const {
  auto outs = outcomes(state, action);
  if (outs.empty()) throw SimulationError("environment returned no outcomes");
  std::size_t pick = 0;
  if (outs.size() > 1) {
    std::vector<double> probs(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i) probs[i] = outs[i].probability;
    pick = rng.categorical(probs);
  }
  check_cost(outs[pick].cost);
  return {std::move(outs[pick].next), outs[pick].cost};
}

TabularEnvironment::TabularEnvironment(std::size_t num_states, std::size_t num_actions, std::size_t initial_state,
                                       std::vector<bool> terminal)
    : num_actions_(num_actions), initial_(initial_state), terminal_(std::move(terminal)) {
  if (num_states == 0 || num_actions == 0) throw InputError("tabular MDP needs states and actions");
  if (terminal_.size() != num_states) throw InputError("terminal flags must cover every state");
  if (initial_state >= num_states) throw InputError("initial state out of range");
  table_.assign(num_states, std::vector<std::vector<Entry>>(num_actions));
}

void TabularEnvironment::add_outcome(std::size_t state, std::size_t action, std::size_t next, double probability,
                                     double cost) {
  if (state >= num_states() || next >= num_states() || action >= num_actions_) {
    throw InputError("tabular outcome index out of range");
  }
  if (!(probability > 0.0 && probability <= 1.0)) throw InputError("outcome probability must be in (0, 1]");
  if (!std::isfinite(cost)) throw InputError("outcome cost must be finite");
  table_[state][action].push_back({next, probability, cost});
}

void TabularEnvironment::validate() const {
  for (std::size_t x = 0; x < num_states(); ++x) {
    if (terminal_[x]) continue;
    for (std::size_t a = 0; a < num_actions_; ++a) {
      double total = 0.0;
      for (const Entry& e : table_[x][a]) total += e.probability;
      if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw InputError("outcome probabilities of state " + std::to_string(x) + ", action " + std::to_string(a) +
                         " sum to " + std::to_string(total));
      }
    }
  }
}

EnvState TabularEnvironment::state(std::size_t index) const {
  if (index >= num_states()) throw InputError("state index out of range");
  return {{static_cast<double>(index)}, terminal_[index]};
}

std::size_t TabularEnvironment::index_of(const EnvState& state) const {
  if (state.coords.size() != 1) throw InputError("not a tabular state");
  const auto index = static_cast<std::size_t>(state.coords[0]);
  if (index >= num_states()) throw InputError("tabular state index out of range");
  return index;
}

std::vector<Outcome> TabularEnvironment::outcomes(const EnvState& s, std::size_t action) const {
  const std::size_t x = index_of(s);
  if (terminal_[x]) throw ContractError("cannot act in a terminal state");
  if (action >= num_actions_) throw InputError("action out of range");
  std::vector<Outcome> outs;
  outs.reserve(table_[x][action].size());
  for (const Entry& e : table_[x][action]) outs.push_back({e.probability, state(e.next), e.cost});
  return outs;
}

void TabularEnvironment::feature_input(const EnvState& s, std::vector<double>& out) const {
  out.assign(num_states(), 0.0);
  out[index_of(s)] = 1.0;
}

std::string TabularEnvironment::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "tabular(states=" << num_states() << ",actions=" << num_actions_ << ",initial=" << initial_;
  for (std::size_t x = 0; x < num_states(); ++x) {
    for (std::size_t a = 0; a < num_actions_; ++a) {
      for (const Entry& e : table_[x][a]) os << ';' << x << ',' << a << ',' << e.next << ',' << e.probability << ',' << e.cost;
    }
  }
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// Rollouts

double discounted_sum(const std::vector<double>& costs, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double c : costs) {
    total += discount * c;
    discount *= gamma;
  }
  return total;
}

Trajectory rollout(const Environment& env, const BoltzmannPolicy& policy, const Eigen::VectorXd& theta,
                   const EnvState& initial, double gamma, Rng& rng, std::size_t horizon_cap) {
  if (horizon_cap == 0) throw InputError("horizon cap must be at least 1");
  Trajectory traj;
  traj.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dimension()));
  BoltzmannPolicy::Evaluation eval;
  EnvState state = initial;
  double discount = 1.0;
  while (!state.terminal) {
    if (traj.steps.size() >= horizon_cap) {
      traj.truncated = true;
      break;
    }
    Step step;
    env.feature_input(state, step.input);
    policy.evaluate(theta, step.input, eval);
    step.action = rng.categorical(std::span<const double>(eval.probs.data(), static_cast<std::size_t>(eval.probs.size())));
    policy.accumulate_grad_log(eval, step.action, traj.score);
    Transition next = env.sample(state, step.action, rng);
    step.cost = next.cost;
    traj.loss += discount * next.cost;
    discount *= gamma;
    step.state = std::move(state);
    traj.steps.push_back(std::move(step));
    state = std::move(next.next);
  }
  traj.final_state = std::move(state);
  return traj;
}

Eigen::VectorXd trajectory_score(const Trajectory& trajectory, const BoltzmannPolicy& policy,
                                 const Eigen::VectorXd& theta) {
  Eigen::VectorXd score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dimension()));
  BoltzmannPolicy::Evaluation eval;
  for (const Step& step : trajectory.steps) {
    policy.evaluate(theta, step.input, eval);
    policy.accumulate_grad_log(eval, step.action, score);
  }
  return score;
}

namespace {

struct EnumerationContext {
  const Environment& env;
  const BoltzmannPolicy& policy;
  const Eigen::VectorXd& theta;
  double gamma;
  std::size_t max_steps;
  std::size_t max_trajectories;
  std::vector<WeightedTrajectory>& out;
};

void enumerate_from(EnumerationContext& ctx, const EnvState& state, double probability, Trajectory& partial,
                    double discount) {
  if (state.terminal) {
    if (ctx.out.size() >= ctx.max_trajectories) {
      throw InputError("trajectory enumeration exceeds budget of " + std::to_string(ctx.max_trajectories));
    }
    Trajectory done = partial;
    done.final_state = state;
    ctx.out.push_back({probability, std::move(done)});
    return;
  }
  if (partial.steps.size() >= ctx.max_steps) {
    throw InputError("trajectory enumeration exceeds " + std::to_string(ctx.max_steps) + " steps");
  }
  std::vector<double> input;
  ctx.env.feature_input(state, input);
  BoltzmannPolicy::Evaluation eval;
  ctx.policy.evaluate(ctx.theta, input, eval);
  for (std::size_t a = 0; a < ctx.policy.num_actions(); ++a) {
    const double pa = eval.probs[static_cast<Eigen::Index>(a)];
    if (pa == 0.0) continue;
    for (const Outcome& o : ctx.env.outcomes(state, a)) {
      check_cost(o.cost);
      const Eigen::VectorXd saved_score = partial.score;
      const double saved_loss = partial.loss;
      ctx.policy.accumulate_grad_log(eval, a, partial.score);
      partial.loss += discount * o.cost;
      partial.steps.push_back({state, input, a, o.cost});
      enumerate_from(ctx, o.next, probability * pa * o.probability, partial, discount * ctx.gamma);
      partial.steps.pop_back();
      partial.loss = saved_loss;
      partial.score = saved_score;
    }
  }
}

}  // namespace

std::vector<WeightedTrajectory> enumerate_trajectories(const Environment& env, const BoltzmannPolicy& policy,
                                                       const Eigen::VectorXd& theta, double gamma,
                                                       std::size_t max_steps, std::size_t max_trajectories) {
  std::vector<WeightedTrajectory> out;
  EnumerationContext ctx{env, policy, theta, gamma, max_steps, max_trajectories, out};
  Trajectory partial;
  partial.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dimension()));
  enumerate_from(ctx, env.initial_state(), 1.0, partial, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Augmented MDP

double BudgetScale::normalize(double s) const {
  if (ignore) return 0.0;
  return std::clamp((s - s_min) / (s_max - s_min), 0.0, 1.0);
}

AugmentedEnvironment::AugmentedEnvironment(const Environment& base, double lambda, double alpha, double gamma,
                                           AugmentedCostMode mode, BudgetScale scale)
    : base_(&base), lambda_(lambda), alpha_(alpha), gamma_(gamma), mode_(mode), scale_(scale) {
  if (!(lambda >= 0.0)) throw InputError("lambda must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
  if (!scale.ignore && !(scale.s_max > scale.s_min)) throw InputError("budget scale needs s_max > s_min");
}

void AugmentedEnvironment::set_lambda(double lambda) {
  if (!(lambda >= 0.0)) throw InputError("lambda must be nonnegative");
  lambda_ = lambda;
}

double AugmentedEnvironment::terminal_cost(double s) const {
  const double shortfall = std::max(-s, 0.0) / (1.0 - alpha_);
  return mode_ == AugmentedCostMode::kStandard ? lambda_ * shortfall : shortfall;
}

std::vector<AugmentedOutcome> AugmentedEnvironment::outcomes(const AugmentedState& state, std::size_t action) const {
  if (state.env.terminal) return {{1.0, std::nullopt, terminal_cost(state.s), 0.0}};
  std::vector<AugmentedOutcome> outs;
  for (Outcome& o : base_->outcomes(state.env, action)) {
    check_cost(o.cost);
    const double cost = mode_ == AugmentedCostMode::kStandard ? o.cost : 0.0;
    outs.push_back({o.probability, AugmentedState{std::move(o.next), next_budget(state.s, o.cost)}, cost, o.cost});
  }
  return outs;
}

AugmentedOutcome AugmentedEnvironment::step(const AugmentedState& state, std::size_t action, Rng& rng) const {
  if (state.env.terminal) return {1.0, std::nullopt, terminal_cost(state.s), 0.0};
  Transition t = base_->sample(state.env, action, rng);
  const double cost = mode_ == AugmentedCostMode::kStandard ? t.cost : 0.0;
  return {1.0, AugmentedState{std::move(t.next), next_budget(state.s, t.cost)}, cost, t.cost};
}

void AugmentedEnvironment::policy_input(const AugmentedState& state, std::vector<double>& out) const {
  base_->feature_input(state.env, out);
  out.push_back(scale_.normalize(state.s));
}

AugmentedEnvironment augment(const Environment& env, double lambda, double alpha, double gamma,
                             AugmentedCostMode mode, BudgetScale scale) {
  return AugmentedEnvironment(env, lambda, alpha, gamma, mode, scale);
}

AugmentedTrajectory rollout_augmented(const AugmentedEnvironment& env, const BoltzmannPolicy& policy,
                                      const Eigen::VectorXd& theta, double s0, Rng& rng,
                                      std::size_t horizon_cap) {
  if (horizon_cap == 0) throw InputError("horizon cap must be at least 1");
  AugmentedTrajectory traj;
  traj.s0 = s0;
  traj.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dimension()));
  BoltzmannPolicy::Evaluation eval;
  std::vector<double> input;
  std::optional<AugmentedState> state = env.initial_state(s0);
  double discount = 1.0;
  while (state) {
    if (state->env.terminal) {
      const double cost = env.terminal_cost(state->s);
      traj.augmented_return += discount * cost;
      traj.steps.push_back({std::move(*state), std::nullopt, 0.0, cost});
      break;
    }
    if (traj.env_steps >= horizon_cap) {
      traj.truncated = true;
      break;
    }
    env.policy_input(*state, input);
    policy.evaluate(theta, input, eval);
    const std::size_t action =
        rng.categorical(std::span<const double>(eval.probs.data(), static_cast<std::size_t>(eval.probs.size())));
    policy.accumulate_grad_log(eval, action, traj.score);
    AugmentedOutcome out = env.step(*state, action, rng);
    traj.loss += discount * out.raw_cost;
    traj.augmented_return += discount * out.cost;
    discount *= env.gamma();
    ++traj.env_steps;
    traj.steps.push_back({std::move(*state), action, out.raw_cost, out.cost});
    state = std::move(out.next);
  }
  return traj;
}

namespace {

struct AugmentedEnumerationContext {
  const AugmentedEnvironment& env;
  const BoltzmannPolicy& policy;
  const Eigen::VectorXd& theta;
  std::size_t max_steps;
  std::size_t max_trajectories;
  std::vector<WeightedAugmentedTrajectory>& out;
};

void enumerate_augmented_from(AugmentedEnumerationContext& ctx, const AugmentedState& state, double probability,
                              AugmentedTrajectory& partial, double discount) {
  if (state.env.terminal) {
    if (ctx.out.size() >= ctx.max_trajectories) {
      throw InputError("trajectory enumeration exceeds budget of " + std::to_string(ctx.max_trajectories));
    }
    AugmentedTrajectory done = partial;
    const double cost = ctx.env.terminal_cost(state.s);
    done.augmented_return += discount * cost;
    done.steps.push_back({state, std::nullopt, 0.0, cost});
    ctx.out.push_back({probability, std::move(done)});
    return;
  }
  if (partial.env_steps >= ctx.max_steps) {
    throw InputError("trajectory enumeration exceeds " + std::to_string(ctx.max_steps) + " steps");
  }
  std::vector<double> input;
  ctx.env.policy_input(state, input);
  BoltzmannPolicy::Evaluation eval;
  ctx.policy.evaluate(ctx.theta, input, eval);
  for (std::size_t a = 0; a < ctx.policy.num_actions(); ++a) {
    const double pa = eval.probs[static_cast<Eigen::Index>(a)];
    if (pa == 0.0) continue;
    for (const AugmentedOutcome& o : ctx.env.outcomes(state, a)) {
      AugmentedTrajectory saved = partial;
      ctx.policy.accumulate_grad_log(eval, a, partial.score);
      partial.loss += discount * o.raw_cost;
      partial.augmented_return += discount * o.cost;
      ++partial.env_steps;
      partial.steps.push_back({state, a, o.raw_cost, o.cost});
      enumerate_augmented_from(ctx, *o.next, probability * pa * o.probability, partial,
                               discount * ctx.env.gamma());
      partial = std::move(saved);
    }
  }
}

}  // namespace

std::vector<WeightedAugmentedTrajectory> enumerate_augmented_trajectories(
    const AugmentedEnvironment& env, const BoltzmannPolicy& policy, const Eigen::VectorXd& theta, double s0,
    std::size_t max_steps, std::size_t max_trajectories) {
  std::vector<WeightedAugmentedTrajectory> out;
  AugmentedEnumerationContext ctx{env, policy, theta, max_steps, max_trajectories, out};
  AugmentedTrajectory partial;
  partial.s0 = s0;
  partial.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dimension()));
  enumerate_augmented_from(ctx, env.initial_state(s0), 1.0, partial, 1.0);
  return out;
}

std::pair<double, double> augmented_loss_identity_check(const AugmentedTrajectory& trajectory, double s0,
                                                        double lambda, double alpha, double gamma) {
  std::vector<double> augmented_costs;
  std::vector<double> raw_costs;
  for (const AugmentedStep& step : trajectory.steps) {
    augmented_costs.push_back(step.cost);
    if (step.action) raw_costs.push_back(step.raw_cost);
  }
  const double lhs = discounted_sum(augmented_costs, gamma);
  const double loss = discounted_sum(raw_costs, gamma);
  const double rhs = loss + lambda / (1.0 - alpha) * std::max(loss - s0, 0.0);
  return {lhs, rhs};
}

}  // namespace cvar
