#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <vector>

#include "cvar/mdp.hpp"
#include "cvar/policy.hpp"
#include "cvar/rng.hpp"

namespace cvar {

/// Linear critic features phi(x, s) on augmented states. The sink has the
/// zero feature vector.
class CriticFeatureMap {
 public:
  virtual ~CriticFeatureMap() = default;
  virtual std::size_t dimension() const = 0;
  virtual void evaluate(const AugmentedState& state, Eigen::VectorXd& out) const = 0;

  Eigen::VectorXd operator()(const AugmentedState& state) const;
  Eigen::VectorXd operator()(const std::optional<AugmentedState>& state) const;
};

/// Two blocks: an RBF grid over the policy input (base input, normalized s)
/// that is active at non-terminal states, and a 1-D RBF over normalized s that
/// is active at terminal states. Holds `env` by reference.
class AugmentedRbfCritic final : public CriticFeatureMap {
 public:
  AugmentedRbfCritic(const AugmentedEnvironment& env, std::size_t centers_per_dim, double width_scale = 1.0);
  std::size_t dimension() const override { return interior_.dimension() + terminal_.dimension(); }
  void evaluate(const AugmentedState& state, Eigen::VectorXd& out) const override;

 private:
  const AugmentedEnvironment* env_;
  RbfFeatures interior_;
  RbfFeatures terminal_;
  mutable std::vector<double> input_;
};

/// Features over the base state only, zero at terminal states. Used for the
/// value function of the original MDP.
class BaseRbfCritic final : public CriticFeatureMap {
 public:
  BaseRbfCritic(const Environment& env, std::size_t centers_per_dim, double width_scale = 1.0);
  std::size_t dimension() const override { return rbf_.dimension(); }
  void evaluate(const AugmentedState& state, Eigen::VectorXd& out) const override;

 private:
  const Environment* env_;
  RbfFeatures rbf_;
  mutable std::vector<double> input_;
};

/// delta = cost + gamma v'phi_next - v'phi.
double td_error(const Eigen::VectorXd& v, const Eigen::VectorXd& phi, const Eigen::VectorXd& phi_next, double cost,
                double gamma);

/// v + step * delta * phi.
Eigen::VectorXd td_update(const Eigen::VectorXd& v, const Eigen::VectorXd& phi, double delta, double step);

/// Weighted sums for A = E[phi (phi - gamma phi')^T], b = E[phi cost].
struct LstdSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double total_weight = 0.0;
  std::size_t samples = 0;

  explicit LstdSystem(std::size_t dim);
  Eigen::MatrixXd normalized_A() const;
  Eigen::VectorXd normalized_b() const;
};

void accumulate_lstd(LstdSystem& system, const Eigen::VectorXd& phi, const Eigen::VectorXd& phi_next, double cost,
                     double gamma, double weight = 1.0);

/// Solves A v = b. Throws SolverError (with the estimated condition number)
/// when A is singular or worse conditioned than `max_condition`.
Eigen::VectorXd lstd_solve(const LstdSystem& system, double max_condition = 1e12);

/// One transition drawn from the gamma-discounted occupation measure: walk
/// from (x0, s0) under the policy, stopping with probability 1 - gamma before
/// each move. `state` is empty when the walk reached the sink.
struct OccupationSample {
  std::optional<AugmentedState> state;
  std::optional<std::size_t> action;
  double cost = 0.0;
  std::optional<AugmentedState> next;
};

OccupationSample sample_occupation(const AugmentedEnvironment& env, const BoltzmannPolicy& policy,
                                   const Eigen::VectorXd& theta, double s0, Rng& rng, std::size_t horizon_cap);

// ---------------------------------------------------------------------------
// Exact tools on finite augmented chains

/// Uniform s-grid; successors snap to the nearest point (clamped).
struct BudgetGrid {
  double lo;
  double hi;
  std::size_t points;

  double snap(double s) const;
};

/// The policy-averaged Markov chain over reachable augmented states.
struct AugmentedChain {
  struct Edge {
    std::size_t next;  // kSink for the sink
    double probability;
    double cost;
  };
  static constexpr std::size_t kSink = static_cast<std::size_t>(-1);

  std::vector<AugmentedState> states;
  std::vector<std::vector<Edge>> edges;
  std::size_t initial = 0;
  std::optional<BudgetGrid> grid;

  std::size_t size() const { return states.size(); }
  /// Throws InputError for a state that is not in the chain.
  std::size_t index_of(const AugmentedState& state) const;

  using Key = std::tuple<bool, std::vector<double>, double>;
  std::map<Key, std::size_t> index;
};

/// Breadth-first construction from (x0, s0). Throws InputError when more than
/// `max_states` states are reachable.
AugmentedChain build_augmented_chain(const AugmentedEnvironment& env, const BoltzmannPolicy& policy,
                                     const Eigen::VectorXd& theta, double s0, std::optional<BudgetGrid> grid,
                                     std::size_t max_states);

/// Policy evaluation by Jacobi sweeps until the largest change is below `tol`.
Eigen::VectorXd value_iteration(const AugmentedChain& chain, double gamma, double tol = 1e-12,
                                std::size_t max_sweeps = 1000000);

/// pi_gamma(z) = (1 - gamma) sum_k gamma^k P(z_k = z) over chain states.
Eigen::VectorXd occupation_measure(const AugmentedChain& chain, double gamma);

/// A and b with expectations taken exactly under the occupation measure.
LstdSystem exact_lstd_system(const AugmentedChain& chain, const CriticFeatureMap& features, double gamma);

/// One-hot features over the states of a chain.
class TabularChainFeatures final : public CriticFeatureMap {
 public:
  explicit TabularChainFeatures(const AugmentedChain& chain) : chain_(&chain) {}
  std::size_t dimension() const override { return chain_->size(); }
  void evaluate(const AugmentedState& state, Eigen::VectorXd& out) const override;

 private:
  const AugmentedChain* chain_;
};

/// Samples a successor edge of chain state `index`.
const AugmentedChain::Edge& sample_edge(const AugmentedChain& chain, std::size_t index, Rng& rng);

}  // namespace cvar
