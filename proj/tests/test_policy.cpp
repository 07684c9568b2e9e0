#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "cvar/errors.hpp"
#include "cvar/mdp.hpp"
#include "cvar/policy.hpp"
#include "cvar/rng.hpp"
#include "cvar/stochastic_approx.hpp"

TEST_SUITE("policy") {
  TEST_CASE("action probabilities examples") {
    Eigen::MatrixXd phi(2, 2);
    phi << 1, 0, 0, 1;
    const Eigen::VectorXd p0 = cvar::action_probabilities(Eigen::VectorXd::Zero(2), phi);
    CHECK(p0[0] == 0.5);
    CHECK(p0[1] == 0.5);

    Eigen::VectorXd theta(2);
    theta << std::log(2.0), 0.0;
    const Eigen::VectorXd p1 = cvar::action_probabilities(theta, phi);
    CHECK(p1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(p1[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    Eigen::MatrixXd single(1, 2);
    single << 0.3, -2.0;
    CHECK(cvar::action_probabilities(theta, single)[0] == 1.0);
  }

  TEST_CASE("softmax survives huge logits") {
    Eigen::MatrixXd phi(2, 1);
    phi << 1000.0, -1000.0;
    Eigen::VectorXd theta(1);
    theta << 5.0;
    const Eigen::VectorXd p = cvar::action_probabilities(theta, phi);
    CHECK(p.allFinite());
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    phi(0, 0) = INFINITY;
    CHECK_THROWS(cvar::action_probabilities(theta, phi));
  }

  TEST_CASE("grad log prob examples") {
    Eigen::MatrixXd phi(2, 2);
    phi << 1, 0, 0, 1;
    const Eigen::VectorXd g = cvar::grad_log_prob(Eigen::VectorXd::Zero(2), phi, 0);
    CHECK(g[0] == 0.5);
    CHECK(g[1] == -0.5);
    Eigen::MatrixXd single(1, 3);
    single << 1, 2, 3;
    CHECK(cvar::grad_log_prob(Eigen::VectorXd::Ones(3), single, 0).norm() == 0.0);
  }

  TEST_CASE("grad log prob matches finite differences and averages to zero") {
    cvar::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::Index actions = 2 + static_cast<Eigen::Index>(rng.uniform() * 3);
      const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng.uniform() * 4);
      Eigen::MatrixXd phi(actions, dim);
      Eigen::VectorXd theta(dim);
      for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = 2 * rng.uniform() - 1;
      for (Eigen::Index i = 0; i < dim; ++i) theta[i] = 2 * rng.uniform() - 1;
      const Eigen::VectorXd p = cvar::action_probabilities(theta, phi);
      Eigen::VectorXd weighted = Eigen::VectorXd::Zero(dim);
      for (Eigen::Index a = 0; a < actions; ++a) {
        const Eigen::VectorXd g = cvar::grad_log_prob(theta, phi, static_cast<std::size_t>(a));
        weighted += p[a] * g;
        const double h = 1e-5;
        for (Eigen::Index j = 0; j < dim; ++j) {
          Eigen::VectorXd tp = theta;
          Eigen::VectorXd tm = theta;
          tp[j] += h;
          tm[j] -= h;
          const double fd = (std::log(cvar::action_probabilities(tp, phi)[a]) -
                             std::log(cvar::action_probabilities(tm, phi)[a])) /
                            (2 * h);
          CHECK(std::abs(fd - g[j]) <= 1e-6 * std::max(1.0, std::abs(g[j])));
        }
      }
      CHECK(weighted.norm() <= 1e-12);
    }
  }

  TEST_CASE("probabilities are shift invariant") {
    cvar::Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd phi(3, 4);
      Eigen::VectorXd theta(4);
      Eigen::VectorXd shift(4);
      for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = 2 * rng.uniform() - 1;
      for (Eigen::Index i = 0; i < 4; ++i) {
        theta[i] = 2 * rng.uniform() - 1;
        shift[i] = 4 * rng.uniform() - 2;
      }
      Eigen::MatrixXd shifted = phi;
      shifted.rowwise() += shift.transpose();
      const Eigen::VectorXd a = cvar::action_probabilities(theta, phi);
      const Eigen::VectorXd b = cvar::action_probabilities(theta, shifted);
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  TEST_CASE("trajectory score examples") {
    // One state with two actions and features (1, 0) / (0, 1): a linear
    // policy on a constant input reproduces that layout.
    auto features = std::make_shared<cvar::LinearFeatures>(0);
    const cvar::BoltzmannPolicy policy(features, 2);
    CHECK(policy.dimension() == 2);
    cvar::Trajectory t;
    t.steps.push_back({cvar::EnvState{{0.0}, false}, {}, 0, 1.0});
    t.steps.push_back({cvar::EnvState{{0.0}, false}, {}, 0, 1.0});
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd s = cvar::trajectory_score(t, policy, theta);
    CHECK(s[0] == 1.0);
    CHECK(s[1] == -1.0);
    t.steps.pop_back();
    CHECK((cvar::trajectory_score(t, policy, theta) - policy.grad_log_prob(theta, {}, 0)).norm() == 0.0);

    const cvar::BoltzmannPolicy one(features, 1);
    t.steps.push_back(t.steps.back());
    CHECK(cvar::trajectory_score(t, one, Eigen::VectorXd::Ones(1)).norm() == 0.0);
  }

  TEST_CASE("boltzmann policy agrees with the explicit feature matrix") {
    auto features = std::make_shared<cvar::RbfFeatures>(2, 3);
    const cvar::BoltzmannPolicy policy(features, 2);
    CHECK(policy.dimension() == 2 * (1 + 9));
    cvar::Rng rng(1);
    Eigen::VectorXd theta(static_cast<Eigen::Index>(policy.dimension()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = 2 * rng.uniform() - 1;
    const std::vector<double> input{0.3, 0.8};
    const Eigen::MatrixXd phi = policy.action_features(input);
    CHECK((policy.probabilities(theta, input) - cvar::action_probabilities(theta, phi)).norm() <= 1e-15);
    CHECK((policy.grad_log_prob(theta, input, 1) - cvar::grad_log_prob(theta, phi, 1)).norm() <= 1e-14);
  }

  TEST_CASE("rbf layout") {
    const cvar::RbfFeatures rbf(2, 4);
    CHECK(rbf.dimension() == 17);
    const Eigen::VectorXd f = rbf(std::vector<double>{0.0, 1.0});
    CHECK(f[0] == 1.0);
    CHECK(f.maxCoeff() == doctest::Approx(1.0));
    CHECK((f.array() > 0.0).all());
    CHECK_THROWS_AS(rbf(std::vector<double>{0.5}), cvar::InputError);
    const cvar::RbfFeatures single(1, 1);
    CHECK(single(std::vector<double>{0.5})[1] == 1.0);
  }

  TEST_CASE("theta projection clamps and is idempotent") {
    const cvar::Box box = cvar::Box::uniform(2, -60, 60);
    Eigen::VectorXd x(2);
    x << -100, 100;
    const Eigen::VectorXd p = box.project(x);
    CHECK(p[0] == -60);
    CHECK(p[1] == 60);
    CHECK(box.project(p) == p);
  }
}
