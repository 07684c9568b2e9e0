#include "cvar/critic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "cvar/errors.hpp"

namespace cvar {

Eigen::VectorXd CriticFeatureMap::operator()(const AugmentedState& state) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(dimension()));
  evaluate(state, out);
  return out;
}

Eigen::VectorXd CriticFeatureMap::operator()(const std::optional<AugmentedState>& state) const {
  if (!state) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension()));
  return (*this)(*state);
}

AugmentedRbfCritic::AugmentedRbfCritic(const AugmentedEnvironment& env, std::size_t centers_per_dim,
                                       double width_scale)
    : env_(&env),
      interior_(env.policy_input_dim(), centers_per_dim, width_scale),
      terminal_(1, centers_per_dim, width_scale) {}

void AugmentedRbfCritic::evaluate(const AugmentedState& state, Eigen::VectorXd& out) const {
  out.setZero(static_cast<Eigen::Index>(dimension()));
  const std::size_t n_in = interior_.dimension();
  if (state.env.terminal) {
    const double s = env_->scale().normalize(state.s);
    terminal_.evaluate(std::span<const double>(&s, 1), std::span<double>(out.data() + n_in, terminal_.dimension()));
  } else {
    env_->policy_input(state, input_);
    interior_.evaluate(input_, std::span<double>(out.data(), n_in));
  }
}

BaseRbfCritic::BaseRbfCritic(const Environment& env, std::size_t centers_per_dim, double width_scale)
    : env_(&env), rbf_(env.feature_input_dim(), centers_per_dim, width_scale) {}

void BaseRbfCritic::evaluate(const AugmentedState& state, Eigen::VectorXd& out) const {
  out.setZero(static_cast<Eigen::Index>(dimension()));
  if (state.env.terminal) return;
  env_->feature_input(state.env, input_);
  rbf_.evaluate(input_, std::span<double>(out.data(), rbf_.dimension()));
}

double td_error(const Eigen::VectorXd& v, const Eigen::VectorXd& phi, const Eigen::VectorXd& phi_next, double cost,
                double gamma) {
  if (v.size() != phi.size() || v.size() != phi_next.size()) throw InputError("td_error: dimension mismatch");
  return cost + gamma * v.dot(phi_next) - v.dot(phi);
}

Eigen::VectorXd td_update(const Eigen::VectorXd& v, const Eigen::VectorXd& phi, double delta, double step) {
  if (!(step > 0.0)) throw InputError("critic step must be positive");
  if (v.size() != phi.size()) throw InputError("td_update: dimension mismatch");
  return v + (step * delta) * phi;
}

LstdSystem::LstdSystem(std::size_t dim)
    : A(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      b(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}

Eigen::MatrixXd LstdSystem::normalized_A() const { return total_weight > 0.0 ? A / total_weight : A; }

Eigen::VectorXd LstdSystem::normalized_b() const { return total_weight > 0.0 ? b / total_weight : b; }

void accumulate_lstd(LstdSystem& system, const Eigen::VectorXd& phi, const Eigen::VectorXd& phi_next, double cost,
                     double gamma, double weight) {
  if (phi.size() != system.b.size() || phi_next.size() != system.b.size()) {
    throw InputError("accumulate_lstd: dimension mismatch");
  }
  if (!(weight >= 0.0)) throw InputError("LSTD sample weight must be nonnegative");
  system.A.noalias() += weight * phi * (phi - gamma * phi_next).transpose();
  system.b += (weight * cost) * phi;
  system.total_weight += weight;
  ++system.samples;
}

Eigen::VectorXd lstd_solve(const LstdSystem& system, double max_condition) {
  Eigen::MatrixXd A = system.normalized_A();
  Eigen::VectorXd b = system.normalized_b();
  if (A.rows() == 0) throw InputError("empty LSTD system");
  if (!A.allFinite() || !b.allFinite()) throw NumericError("non-finite LSTD system");
  // Equilibrate rows then columns: rarely visited states and barely excited
  // features give tiny rows/columns without making the solution any worse.
  const Eigen::VectorXd row_scale = A.cwiseAbs().rowwise().maxCoeff();
  if ((row_scale.array() <= 0.0).any()) {
    throw SolverError("LSTD matrix is singular or ill-conditioned", std::numeric_limits<double>::infinity());
  }
  A = row_scale.cwiseInverse().asDiagonal() * A;
  b = b.cwiseQuotient(row_scale);
  const Eigen::VectorXd col_scale = A.cwiseAbs().colwise().maxCoeff().transpose().cwiseInverse();
  if (!col_scale.allFinite()) {
    throw SolverError("LSTD matrix is singular or ill-conditioned", std::numeric_limits<double>::infinity());
  }
  A = A * col_scale.asDiagonal();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rcond = lu.rcond();
  const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(condition <= max_condition)) {
    throw SolverError("LSTD matrix is singular or ill-conditioned", condition);
  }
  const Eigen::VectorXd y = lu.solve(b);
  if (!y.allFinite() || (A * y - b).norm() > 1e-8 * (1.0 + b.norm())) {
    throw SolverError("LSTD solve did not meet the residual tolerance", condition);
  }
  const Eigen::VectorXd v = col_scale.cwiseProduct(y);
  return v;
}

OccupationSample sample_occupation(const AugmentedEnvironment& env, const BoltzmannPolicy& policy,
                                   const Eigen::VectorXd& theta, double s0, Rng& rng, std::size_t horizon_cap) {
  BoltzmannPolicy::Evaluation eval;
  std::vector<double> input;
  std::optional<AugmentedState> state = env.initial_state(s0);
  std::size_t steps = 0;
  for (;;) {
    OccupationSample sample;
    if (!state) return sample;
    std::optional<std::size_t> action;
    if (!state->env.terminal) {
      env.policy_input(*state, input);
      policy.evaluate(theta, input, eval);
      action = rng.categorical(
          std::span<const double>(eval.probs.data(), static_cast<std::size_t>(eval.probs.size())));
    }
    AugmentedOutcome out = env.step(*state, action.value_or(0), rng);
    const bool stop = rng.uniform() >= env.gamma();
    if (stop || ++steps > horizon_cap) {
      sample.state = std::move(state);
      sample.action = action;
      sample.cost = out.cost;
      sample.next = std::move(out.next);
      return sample;
    }
    state = std::move(out.next);
  }
}

double BudgetGrid::snap(double s) const {
  if (points < 2 || !(hi > lo)) throw InputError("budget grid needs two points and hi > lo");
  const double step = (hi - lo) / static_cast<double>(points - 1);
  const double k = std::clamp(std::round((s - lo) / step), 0.0, static_cast<double>(points - 1));
  return lo + k * step;
}

std::size_t AugmentedChain::index_of(const AugmentedState& state) const {
  const double s = grid ? grid->snap(state.s) : state.s;
  const auto it = index.find(Key{state.env.terminal, state.env.coords, s});
  if (it == index.end()) throw InputError("augmented state is not part of the chain");
  return it->second;
}

AugmentedChain build_augmented_chain(const AugmentedEnvironment& env, const BoltzmannPolicy& policy,
                                     const Eigen::VectorXd& theta, double s0, std::optional<BudgetGrid> grid,
                                     std::size_t max_states) {
  AugmentedChain chain;
  chain.grid = grid;
  std::deque<std::size_t> queue;
  auto intern = [&](AugmentedState st) {
    if (grid) st.s = grid->snap(st.s);
    AugmentedChain::Key key{st.env.terminal, st.env.coords, st.s};
    const auto it = chain.index.find(key);
    if (it != chain.index.end()) return it->second;
    if (chain.states.size() >= max_states) {
      throw InputError("augmented chain exceeds " + std::to_string(max_states) + " states");
    }
    const std::size_t id = chain.states.size();
    chain.index.emplace(std::move(key), id);
    chain.states.push_back(std::move(st));
    chain.edges.emplace_back();
    queue.push_back(id);
    return id;
  };
  chain.initial = intern(env.initial_state(s0));

  std::vector<double> input;
  while (!queue.empty()) {
    const std::size_t id = queue.front();
    queue.pop_front();
    const AugmentedState state = chain.states[id];
    std::vector<AugmentedChain::Edge> edges;
    if (state.env.terminal) {
      edges.push_back({AugmentedChain::kSink, 1.0, env.terminal_cost(state.s)});
    } else {
      env.policy_input(state, input);
      const Eigen::VectorXd probs = policy.probabilities(theta, input);
      for (std::size_t a = 0; a < env.base().num_actions(); ++a) {
        const double pa = probs[static_cast<Eigen::Index>(a)];
        if (pa == 0.0) continue;
        for (AugmentedOutcome& o : env.outcomes(state, a)) {
          const std::size_t next = o.next ? intern(std::move(*o.next)) : AugmentedChain::kSink;
          edges.push_back({next, pa * o.probability, o.cost});
        }
      }
    }
    chain.edges[id] = std::move(edges);
  }
  return chain;
}

Eigen::VectorXd value_iteration(const AugmentedChain& chain, double gamma, double tol, std::size_t max_sweeps) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd next(n);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double total = 0.0;
      for (const auto& e : chain.edges[static_cast<std::size_t>(i)]) {
        const double tail = e.next == AugmentedChain::kSink ? 0.0 : v[static_cast<Eigen::Index>(e.next)];
        total += e.probability * (e.cost + gamma * tail);
      }
      next[i] = total;
    }
    const double change = (next - v).cwiseAbs().maxCoeff();
    v.swap(next);
    if (change < tol) return v;
  }
  throw SolverError("value iteration did not converge", 0.0);
}

Eigen::VectorXd occupation_measure(const AugmentedChain& chain, double gamma) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  // (I - gamma P^T) d = (1 - gamma) e_initial
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& e : chain.edges[static_cast<std::size_t>(i)]) {
      if (e.next != AugmentedChain::kSink) M(static_cast<Eigen::Index>(e.next), i) -= gamma * e.probability;
    }
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[static_cast<Eigen::Index>(chain.initial)] = 1.0 - gamma;
  return M.partialPivLu().solve(rhs);
}

LstdSystem exact_lstd_system(const AugmentedChain& chain, const CriticFeatureMap& features, double gamma) {
  const Eigen::VectorXd d = occupation_measure(chain, gamma);
  LstdSystem system(features.dimension());
  const auto dim = static_cast<Eigen::Index>(features.dimension());
  Eigen::VectorXd phi(dim);
  Eigen::VectorXd phi_next(dim);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    features.evaluate(chain.states[i], phi);
    Eigen::VectorXd expected_next = Eigen::VectorXd::Zero(dim);
    double expected_cost = 0.0;
    for (const auto& e : chain.edges[i]) {
      expected_cost += e.probability * e.cost;
      if (e.next == AugmentedChain::kSink) continue;
      features.evaluate(chain.states[e.next], phi_next);
      expected_next += e.probability * phi_next;
    }
    accumulate_lstd(system, phi, expected_next, expected_cost, gamma, d[static_cast<Eigen::Index>(i)]);
  }
  return system;
}

void TabularChainFeatures::evaluate(const AugmentedState& state, Eigen::VectorXd& out) const {
  out.setZero(static_cast<Eigen::Index>(dimension()));
  out[static_cast<Eigen::Index>(chain_->index_of(state))] = 1.0;
}

const AugmentedChain::Edge& sample_edge(const AugmentedChain& chain, std::size_t index, Rng& rng) {
  const auto& edges = chain.edges.at(index);
  std::vector<double> probs;
  probs.reserve(edges.size());
  for (const auto& e : edges) probs.push_back(e.probability);
  return edges[rng.categorical(probs)];
}

}  // namespace cvar
