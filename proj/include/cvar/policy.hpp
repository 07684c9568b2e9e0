#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

namespace cvar {

/// Maps a normalized state description to a real feature vector.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual void evaluate(std::span<const double> input, std::span<double> out) const = 0;

  Eigen::VectorXd operator()(std::span<const double> input) const;
};

/// Constant bias followed by Gaussian bumps on a uniform grid of centers over
/// [0, 1]^d. Width is the center spacing times `width_scale`.
class RbfFeatures final : public FeatureMap {
 public:
  RbfFeatures(std::size_t input_dim, std::size_t centers_per_dim, double width_scale = 1.0);

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t dimension() const override { return 1 + num_centers_; }
  void evaluate(std::span<const double> input, std::span<double> out) const override;

  std::size_t centers_per_dim() const { return centers_per_dim_; }
  double width() const { return width_; }

 private:
  std::size_t input_dim_;
  std::size_t centers_per_dim_;
  std::size_t num_centers_;
  double width_;
  std::vector<double> grid_;  // 1-D center positions, shared by every axis
};

/// Bias followed by the raw inputs. With one-hot inputs this gives a tabular
/// (per-state) parameterization.
class LinearFeatures final : public FeatureMap {
 public:
  explicit LinearFeatures(std::size_t input_dim) : input_dim_(input_dim) {}

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t dimension() const override { return 1 + input_dim_; }
  void evaluate(std::span<const double> input, std::span<double> out) const override;

 private:
  std::size_t input_dim_;
};

/// mu(a | x; theta) = exp(theta' phi(x, a)) / sum_b exp(theta' phi(x, b)) for
/// explicit per-action features (one row per action). Max-subtracted.
Eigen::VectorXd action_probabilities(const Eigen::VectorXd& theta, const Eigen::MatrixXd& action_features);

/// grad_theta log mu(a | x; theta) = phi(x, a) - sum_b mu(b | x) phi(x, b).
Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& theta, const Eigen::MatrixXd& action_features,
                              std::size_t action);

/// Boltzmann policy whose action features replicate the state features in one
/// block per action: phi(x, a) = e_a (x) psi(x). theta has dimension
/// num_actions * psi.dimension().
class BoltzmannPolicy {
 public:
  BoltzmannPolicy(std::shared_ptr<const FeatureMap> state_features, std::size_t num_actions);

  std::size_t num_actions() const { return num_actions_; }
  std::size_t dimension() const { return num_actions_ * block_; }
  std::size_t input_dim() const { return features_->input_dim(); }
  const FeatureMap& state_features() const { return *features_; }

  /// Full per-action feature matrix (rows = actions).
  Eigen::MatrixXd action_features(std::span<const double> input) const;

  Eigen::VectorXd probabilities(const Eigen::VectorXd& theta, std::span<const double> input) const;

  Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& theta, std::span<const double> input,
                                std::size_t action) const;

  /// Allocation-free variants for the rollout loop: evaluate() fills psi and
  /// the action probabilities, accumulate_grad_log() adds grad log mu(action).
  struct Evaluation {
    Eigen::VectorXd psi;
    Eigen::VectorXd probs;
  };
  void evaluate(const Eigen::VectorXd& theta, std::span<const double> input, Evaluation& out) const;
  void accumulate_grad_log(const Evaluation& eval, std::size_t action, Eigen::VectorXd& score) const;

 private:
  std::shared_ptr<const FeatureMap> features_;
  std::size_t num_actions_;
  std::size_t block_;
};

}  // namespace cvar
