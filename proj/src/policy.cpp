#include "cvar/policy.hpp"

#include <cmath>
#include <string>

#include "cvar/errors.hpp"

namespace cvar {
namespace {

// Softmax with max-subtraction; throws if anything is non-finite.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw InputError("policy needs at least one action");
  const double top = logits.maxCoeff();
  if (!std::isfinite(top)) throw NumericError("non-finite policy logits");
  Eigen::VectorXd p = (logits.array() - top).exp().matrix();
  const double z = p.sum();
  if (!std::isfinite(z) || !(z > 0.0)) throw NumericError("non-finite policy normalizer");
  return p / z;
}

}  // namespace

Eigen::VectorXd FeatureMap::operator()(std::span<const double> input) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(dimension()));
  evaluate(input, std::span<double>(out.data(), dimension()));
  return out;
}

RbfFeatures::RbfFeatures(std::size_t input_dim, std::size_t centers_per_dim, double width_scale)
    : input_dim_(input_dim), centers_per_dim_(centers_per_dim) {
  if (input_dim == 0) throw InputError("RBF input dimension must be positive");
  if (centers_per_dim == 0) throw InputError("RBF needs at least one center per dimension");
  if (!(width_scale > 0.0)) throw InputError("RBF width scale must be positive");
  num_centers_ = 1;
  for (std::size_t d = 0; d < input_dim; ++d) num_centers_ *= centers_per_dim;
  if (centers_per_dim == 1) {
    grid_ = {0.5};
    width_ = width_scale;
  } else {
    const double spacing = 1.0 / static_cast<double>(centers_per_dim - 1);
    for (std::size_t i = 0; i < centers_per_dim; ++i) grid_.push_back(static_cast<double>(i) * spacing);
    width_ = spacing * width_scale;
  }
}

void RbfFeatures::evaluate(std::span<const double> input, std::span<double> out) const {
  if (input.size() != input_dim_) {
    throw InputError("RBF expected input of dimension " + std::to_string(input_dim_) + ", got " +
                     std::to_string(input.size()));
  }
  // Separable Gaussian: the product over axes of per-axis bumps.
  const double inv_two_var = 1.0 / (2.0 * width_ * width_);
  std::vector<double> axis(input_dim_ * centers_per_dim_);
  for (std::size_t d = 0; d < input_dim_; ++d) {
    for (std::size_t c = 0; c < centers_per_dim_; ++c) {
      const double diff = input[d] - grid_[c];
      axis[d * centers_per_dim_ + c] = std::exp(-diff * diff * inv_two_var);
    }
  }
  out[0] = 1.0;
  for (std::size_t j = 0; j < num_centers_; ++j) {
    std::size_t rest = j;
    double value = 1.0;
    for (std::size_t d = 0; d < input_dim_; ++d) {
      value *= axis[d * centers_per_dim_ + rest % centers_per_dim_];
      rest /= centers_per_dim_;
    }
    out[1 + j] = value;
  }
}

void LinearFeatures::evaluate(std::span<const double> input, std::span<double> out) const {
  if (input.size() != input_dim_) throw InputError("linear features: input dimension mismatch");
  out[0] = 1.0;
  for (std::size_t i = 0; i < input_dim_; ++i) out[1 + i] = input[i];
}

Eigen::VectorXd action_probabilities(const Eigen::VectorXd& theta, const Eigen::MatrixXd& action_features) {
  if (action_features.cols() != theta.size()) throw InputError("feature/parameter dimension mismatch");
  if (!action_features.allFinite()) throw InputError("action features must be finite");
  return softmax(action_features * theta);
}

Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& theta, const Eigen::MatrixXd& action_features,
                              std::size_t action) {
  if (action >= static_cast<std::size_t>(action_features.rows())) throw InputError("action out of range");
  const Eigen::VectorXd probs = action_probabilities(theta, action_features);
  return action_features.row(static_cast<Eigen::Index>(action)).transpose() -
         action_features.transpose() * probs;
}

BoltzmannPolicy::BoltzmannPolicy(std::shared_ptr<const FeatureMap> state_features, std::size_t num_actions)
    : features_(std::move(state_features)), num_actions_(num_actions) {
  if (!features_) throw InputError("policy needs a feature map");
  if (num_actions_ == 0) throw InputError("policy needs at least one action");
  block_ = features_->dimension();
}

Eigen::MatrixXd BoltzmannPolicy::action_features(std::span<const double> input) const {
  const Eigen::VectorXd psi = (*features_)(input);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_actions_),
                                              static_cast<Eigen::Index>(dimension()));
  for (std::size_t a = 0; a < num_actions_; ++a) {
    phi.block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a * block_), 1,
              static_cast<Eigen::Index>(block_)) = psi.transpose();
  }
  return phi;
}

void BoltzmannPolicy::evaluate(const Eigen::VectorXd& theta, std::span<const double> input,
                               Evaluation& out) const {
  if (static_cast<std::size_t>(theta.size()) != dimension()) {
    throw InputError("policy parameter has dimension " + std::to_string(theta.size()) + ", expected " +
                     std::to_string(dimension()));
  }
  out.psi.resize(static_cast<Eigen::Index>(block_));
  features_->evaluate(input, std::span<double>(out.psi.data(), block_));
  if (!out.psi.allFinite()) throw NumericError("non-finite state features");
  Eigen::VectorXd logits(static_cast<Eigen::Index>(num_actions_));
  for (std::size_t a = 0; a < num_actions_; ++a) {
    logits[static_cast<Eigen::Index>(a)] =
        theta.segment(static_cast<Eigen::Index>(a * block_), static_cast<Eigen::Index>(block_)).dot(out.psi);
  }
  out.probs = softmax(logits);
}

void BoltzmannPolicy::accumulate_grad_log(const Evaluation& eval, std::size_t action,
                                          Eigen::VectorXd& score) const {
  // (e_action - mu) (x) psi
  for (std::size_t a = 0; a < num_actions_; ++a) {
    const double coeff = (a == action ? 1.0 : 0.0) - eval.probs[static_cast<Eigen::Index>(a)];
    score.segment(static_cast<Eigen::Index>(a * block_), static_cast<Eigen::Index>(block_)) += coeff * eval.psi;
  }
}

Eigen::VectorXd BoltzmannPolicy::probabilities(const Eigen::VectorXd& theta, std::span<const double> input) const {
  Evaluation eval;
  evaluate(theta, input, eval);
  return eval.probs;
}

Eigen::VectorXd BoltzmannPolicy::grad_log_prob(const Eigen::VectorXd& theta, std::span<const double> input,
                                               std::size_t action) const {
  if (action >= num_actions_) throw InputError("action out of range");
  Evaluation eval;
  evaluate(theta, input, eval);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension()));
  accumulate_grad_log(eval, action, g);
  return g;
}

}  // namespace cvar
