#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvar/policy.hpp"
#include "cvar/rng.hpp"

namespace cvar {

/// Environment state: an environment-defined coordinate payload plus a
/// terminal flag. After a terminal state the process sits in a zero-cost sink.
struct EnvState {
  std::vector<double> coords;
  bool terminal = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct Outcome {
  double probability;
  EnvState next;
  double cost;
};

struct Transition {
  EnvState next;
  double cost;
};

/// Finite-action, finite-branching MDP. Costs are charged on transitions; the
/// terminal state itself costs nothing.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvState initial_state() const = 0;
  virtual std::size_t num_actions() const = 0;

  /// All successors of (state, action) with their probabilities and costs.
  /// Throws ContractError when `state` is terminal.
  virtual std::vector<Outcome> outcomes(const EnvState& state, std::size_t action) const = 0;

  /// Normalized coordinates fed to feature maps.
  virtual std::size_t feature_input_dim() const = 0;
  virtual void feature_input(const EnvState& state, std::vector<double>& out) const = 0;

  /// Analytic upper bound on the discounted loss, if the environment has one.
  virtual std::optional<double> loss_bound(double /*gamma*/) const { return std::nullopt; }

  /// Stable textual identity used to check that reports are comparable.
  virtual std::string describe() const = 0;

  /// Samples one successor. Throws SimulationError on a non-finite cost.
  Transition sample(const EnvState& state, std::size_t action, Rng& rng) const;
};

/// Explicit finite MDP given by outcome tables. State i has coords {i} and
/// one-hot feature input.
class TabularEnvironment final : public Environment {
 public:
  TabularEnvironment(std::size_t num_states, std::size_t num_actions, std::size_t initial_state,
                     std::vector<bool> terminal);

  void add_outcome(std::size_t state, std::size_t action, std::size_t next, double probability, double cost);

  /// Checks that every non-terminal (state, action) has outcome probabilities
  /// summing to one.
  void validate() const;

  EnvState state(std::size_t index) const;
  std::size_t num_states() const { return terminal_.size(); }

  EnvState initial_state() const override { return state(initial_); }
  std::size_t num_actions() const override { return num_actions_; }
  std::vector<Outcome> outcomes(const EnvState& state, std::size_t action) const override;
  std::size_t feature_input_dim() const override { return terminal_.size(); }
  void feature_input(const EnvState& state, std::vector<double>& out) const override;
  std::string describe() const override;

 private:
  struct Entry {
    std::size_t next;
    double probability;
    double cost;
  };
  std::size_t index_of(const EnvState& state) const;

  std::size_t num_actions_;
  std::size_t initial_;
  std::vector<bool> terminal_;
  std::vector<std::vector<std::vector<Entry>>> table_;  // [state][action] -> outcomes
};

struct Step {
  EnvState state;
  std::vector<double> input;  // policy feature input at `state`
  std::size_t action;
  double cost;
};

/// One episode from the initial state until termination or the horizon cap.
struct Trajectory {
  std::vector<Step> steps;
  EnvState final_state;
  double loss = 0.0;        // D = sum_k gamma^k cost_k
  Eigen::VectorXd score;    // sum_k grad log mu(a_k | x_k; theta)
  bool truncated = false;   // horizon cap reached before a terminal state

  std::size_t length() const { return steps.size(); }
};

/// Discounted sum of a cost sequence, accumulated front to back.
double discounted_sum(const std::vector<double>& costs, double gamma);

/// Simulates one episode with actions drawn from the Boltzmann policy.
Trajectory rollout(const Environment& env, const BoltzmannPolicy& policy, const Eigen::VectorXd& theta,
                   const EnvState& initial, double gamma, Rng& rng, std::size_t horizon_cap);

/// Recomputes the score of a trajectory from its recorded feature inputs.
Eigen::VectorXd trajectory_score(const Trajectory& trajectory, const BoltzmannPolicy& policy,
                                 const Eigen::VectorXd& theta);

struct WeightedTrajectory {
  double probability;
  Trajectory trajectory;
};

/// Every trajectory from the initial state with its exact probability under
/// the policy. Throws InputError when more than `max_trajectories` would be
/// produced or an episode exceeds `max_steps`.
std::vector<WeightedTrajectory> enumerate_trajectories(const Environment& env, const BoltzmannPolicy& policy,
                                                       const Eigen::VectorXd& theta, double gamma,
                                                       std::size_t max_steps, std::size_t max_trajectories);

// ---------------------------------------------------------------------------
// Augmented MDP over (x, s)

/// STANDARD: interior cost C(x, a), terminal cost lambda (-s)^+ / (1 - alpha).
/// ZEROED: interior cost 0, terminal cost (-s)^+ / (1 - alpha).
enum class AugmentedCostMode { kStandard, kZeroed };

struct AugmentedState {
  EnvState env;
  double s = 0.0;  // remaining loss budget
};

/// Affine map of s onto [0, 1] (clamped) for feature inputs. With `ignore`,
/// the budget coordinate is fed as a constant 0.
struct BudgetScale {
  double s_min = -2.0;
  double s_max = 6.0;
  bool ignore = false;

  double normalize(double s) const;
};

struct AugmentedOutcome {
  double probability;
  std::optional<AugmentedState> next;  // nullopt: the zero-cost sink
  double cost;                          // augmented cost C-bar
  double raw_cost;                      // cost in the original MDP
};

/// Wraps an environment (held by reference) into the augmented MDP. The
/// budget follows s' = (s - C(x, a)) / gamma on every environment transition;
/// a terminal x is visited once, charges the terminal cost and moves to the
/// sink. No action is taken at terminal states.
class AugmentedEnvironment {
 public:
  AugmentedEnvironment(const Environment& base, double lambda, double alpha, double gamma, AugmentedCostMode mode,
                       BudgetScale scale = {});

  const Environment& base() const { return *base_; }
  double lambda() const { return lambda_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  AugmentedCostMode mode() const { return mode_; }
  const BudgetScale& scale() const { return scale_; }
  void set_lambda(double lambda);

  AugmentedState initial_state(double s0) const { return {base_->initial_state(), s0}; }
  double next_budget(double s, double cost) const { return (s - cost) / gamma_; }
  double terminal_cost(double s) const;

  /// Outcomes of `action` at a non-terminal state, or the single
  /// terminal-cost transition into the sink when `state.env.terminal`.
  std::vector<AugmentedOutcome> outcomes(const AugmentedState& state, std::size_t action) const;
  AugmentedOutcome step(const AugmentedState& state, std::size_t action, Rng& rng) const;

  /// Base feature input followed by the normalized budget.
  std::size_t policy_input_dim() const { return base_->feature_input_dim() + 1; }
  void policy_input(const AugmentedState& state, std::vector<double>& out) const;

 private:
  const Environment* base_;
  double lambda_;
  double alpha_;
  double gamma_;
  AugmentedCostMode mode_;
  BudgetScale scale_;
};

AugmentedEnvironment augment(const Environment& env, double lambda, double alpha, double gamma,
                             AugmentedCostMode mode, BudgetScale scale = {});

struct AugmentedStep {
  AugmentedState state;
  std::optional<std::size_t> action;  // empty on the terminal step
  double raw_cost;
  double cost;
};

/// Episode of the augmented MDP. When it terminates naturally the last step
/// is the terminal visit (x_T, s_T) that charges the terminal cost.
struct AugmentedTrajectory {
  std::vector<AugmentedStep> steps;
  double s0 = 0.0;
  double loss = 0.0;              // D from the raw costs
  double augmented_return = 0.0;  // sum_k gamma^k C-bar_k including the terminal visit
  std::size_t env_steps = 0;      // T
  bool truncated = false;
  Eigen::VectorXd score;

  /// s at the terminal visit; only meaningful when !truncated.
  double terminal_budget() const { return steps.back().state.s; }
};

AugmentedTrajectory rollout_augmented(const AugmentedEnvironment& env, const BoltzmannPolicy& policy,
                                      const Eigen::VectorXd& theta, double s0, Rng& rng,
                                      std::size_t horizon_cap);

struct WeightedAugmentedTrajectory {
  double probability;
  AugmentedTrajectory trajectory;
};

std::vector<WeightedAugmentedTrajectory> enumerate_augmented_trajectories(
    const AugmentedEnvironment& env, const BoltzmannPolicy& policy, const Eigen::VectorXd& theta, double s0,
    std::size_t max_steps, std::size_t max_trajectories);

/// Both sides of the augmented-loss identity for a naturally terminated
/// STANDARD-mode trajectory:
///   lhs = sum_{k<T} gamma^k C(x_k, a_k) + gamma^T C-bar(x_T, s_T)   (from the augmented costs)
///   rhs = D + lambda / (1 - alpha) (D - s0)^+                         (from the raw costs)
std::pair<double, double> augmented_loss_identity_check(const AugmentedTrajectory& trajectory, double s0,
                                                        double lambda, double alpha, double gamma);

}  // namespace cvar
