#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "cvar/mdp.hpp"
#include "cvar/policy.hpp"

namespace toy {

// Two decisions, then termination. State 3 is terminal.
//   state 0: a0 -> 1 (cost 1, p .5) | 2 (cost 2, p .5);   a1 -> 3 (cost 1.5)
//   state 1: a0 -> 3 (cost 0, p .7) | 3 (cost 3, p .3);   a1 -> 3 (cost 1)
//   state 2: a0 -> 3 (cost .5, p .6) | 3 (cost 4, p .4);  a1 -> 2 (cost .25, p .5) | 3 (cost 2, p .5)
// State 2 under a1 may loop, so trajectories are cut by the enumeration depth.
inline cvar::TabularEnvironment make_env(bool looping = false) {
  cvar::TabularEnvironment env(4, 2, 0, {false, false, false, true});
  env.add_outcome(0, 0, 1, 0.5, 1.0);
  env.add_outcome(0, 0, 2, 0.5, 2.0);
  env.add_outcome(0, 1, 3, 1.0, 1.5);
  env.add_outcome(1, 0, 3, 0.7, 0.0);
  env.add_outcome(1, 0, 3, 0.3, 3.0);
  env.add_outcome(1, 1, 3, 1.0, 1.0);
  env.add_outcome(2, 0, 3, 0.6, 0.5);
  env.add_outcome(2, 0, 3, 0.4, 4.0);
  if (looping) {
    env.add_outcome(2, 1, 2, 0.5, 0.25);
    env.add_outcome(2, 1, 3, 0.5, 2.0);
  } else {
    env.add_outcome(2, 1, 3, 1.0, 2.0);
  }
  env.validate();
  return env;
}

inline cvar::BoltzmannPolicy make_policy(std::size_t input_dim) {
  return cvar::BoltzmannPolicy(std::make_shared<cvar::LinearFeatures>(input_dim), 2);
}

inline Eigen::VectorXd random_theta(std::size_t dim, std::uint64_t seed, double scale = 1.0) {
  cvar::Rng rng(seed);
  Eigen::VectorXd t(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

// Independent softmax over a linear policy with features (1, input): block a
// of theta scores action a.
inline std::vector<double> softmax_probs(const Eigen::VectorXd& theta, const std::vector<double>& input) {
  const std::size_t block = input.size() + 1;
  std::vector<double> logits(2);
  for (std::size_t a = 0; a < 2; ++a) {
    double z = theta[static_cast<Eigen::Index>(a * block)];
    for (std::size_t j = 0; j < input.size(); ++j) z += theta[static_cast<Eigen::Index>(a * block + 1 + j)] * input[j];
    logits[a] = z;
  }
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

struct Path {
  double probability;
  double loss;
  Eigen::VectorXd score;  // d/dtheta log P(path), by the closed form of the linear softmax
  std::vector<double> costs;
  std::size_t length;
};

// Depth-first enumeration written independently of the library's
// enumerator. Paths still running at `max_depth` are dropped, so the caller
// must pick a depth at which the remaining mass is negligible or zero.
inline std::vector<Path> enumerate(const cvar::Environment& env, const Eigen::VectorXd& theta, double gamma,
                                   std::size_t max_depth) {
  std::vector<Path> out;
  const std::size_t block = env.feature_input_dim() + 1;
  std::function<void(const cvar::EnvState&, Path, double)> walk = [&](const cvar::EnvState& x, Path p, double disc) {
    if (x.terminal) {
      out.push_back(p);
      return;
    }
    if (p.length >= max_depth) return;
    std::vector<double> input;
    env.feature_input(x, input);
    const std::vector<double> mu = softmax_probs(theta, input);
    for (std::size_t a = 0; a < 2; ++a) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
      for (std::size_t b = 0; b < 2; ++b) {
        const double coeff = (a == b ? 1.0 : 0.0) - mu[b];
        g[static_cast<Eigen::Index>(b * block)] += coeff;
        for (std::size_t j = 0; j < input.size(); ++j) {
          g[static_cast<Eigen::Index>(b * block + 1 + j)] += coeff * input[j];
        }
      }
      for (const cvar::Outcome& o : env.outcomes(x, a)) {
        Path q = p;
        q.probability *= mu[a] * o.probability;
        q.loss += disc * o.cost;
        q.score += g;
        q.costs.push_back(o.cost);
        ++q.length;
        walk(o.next, q, disc * gamma);
      }
    }
  };
  walk(env.initial_state(), Path{1.0, 0.0, Eigen::VectorXd::Zero(theta.size()), {}, 0}, 1.0);
  return out;
}

// L(theta, nu, lambda) = E[D] + lambda (nu + E[(D - nu)^+] / (1 - alpha) - beta)
inline double lagrangian(const std::vector<Path>& paths, double nu, double lambda, double alpha, double beta) {
  double mean = 0.0;
  double excess = 0.0;
  for (const Path& p : paths) {
    mean += p.probability * p.loss;
    excess += p.probability * std::max(p.loss - nu, 0.0);
  }
  return mean + lambda * (nu + excess / (1.0 - alpha) - beta);
}

}  // namespace toy
