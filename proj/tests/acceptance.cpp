// Acceptance checks. `acceptance --criterion N` runs one, no argument runs all.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cvar/actor_critic.hpp"
#include "cvar/critic.hpp"
#include "cvar/harness.hpp"
#include "cvar/mdp.hpp"
#include "cvar/pg.hpp"
#include "cvar/risk.hpp"
#include "cvar/rng.hpp"
#include "toy.hpp"

namespace {

struct Result {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 ---------------------------------------------------------------------------

Result cvar_identity() {
  cvar::Rng rng(1);
  const std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t atoms = 1 + static_cast<std::size_t>(rng.uniform() * 20);
    std::vector<double> xs(atoms);
    std::vector<double> ws(atoms);
    double total = 0.0;
    for (std::size_t i = 0; i < atoms; ++i) {
      xs[i] = 10.0 * rng.uniform() - 2.0;
      ws[i] = 0.05 + rng.uniform();
      total += ws[i];
    }
    for (double& w : ws) w /= total;
    const double alpha = alphas[static_cast<std::size_t>(rng.uniform() * alphas.size())];
    const cvar::EmpiricalDistribution dist(xs, ws);
    std::vector<double> grid;
    for (double nu = -2.0; nu <= 8.0 + 1e-9; nu += 1e-3) grid.push_back(nu);
    const double gap = std::abs(cvar::cvar(dist, alpha) - cvar::cvar_oracle(dist, alpha, grid));
    const double tol = 1e-2 / (1.0 - alpha);
    worst = std::max(worst, gap / tol);
  }
  const double hand = cvar::cvar(cvar::EmpiricalDistribution({1, 2, 3, 4}), 0.75);
  return {worst <= 1.0 && hand == 4.0,
          "worst gap/tolerance " + fmt("%.3g", worst) + ", hand case " + fmt("%.17g", hand)};
}

// 2 ---------------------------------------------------------------------------

cvar::TabularEnvironment random_env(cvar::Rng& rng, std::size_t layers) {
  std::vector<bool> terminal(layers + 1, false);
  terminal[layers] = true;
  cvar::TabularEnvironment env(layers + 1, 2, 0, terminal);
  for (std::size_t s = 0; s < layers; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      const double p = 0.1 + 0.8 * rng.uniform();
      env.add_outcome(s, a, s + 1, p, 3.0 * rng.uniform());
      env.add_outcome(s, a, std::min(s + 2, layers), 1.0 - p, 3.0 * rng.uniform());
    }
  }
  env.validate();
  return env;
}

Result augmented_identity() {
  cvar::Rng gen(2);
  double worst = 0.0;
  std::size_t count = 0;
  for (int e = 0; e < 100; ++e) {
    const auto env = random_env(gen, 2 + static_cast<std::size_t>(gen.uniform() * 8));
    for (int j = 0; j < 100; ++j) {
      const double lambda = 10.0 * gen.uniform();
      const double alpha = 0.01 + 0.98 * gen.uniform();
      const double gamma = 0.3 + 0.69 * gen.uniform();
      const double s0 = 8.0 * gen.uniform() - 2.0;
      const auto aug = cvar::augment(env, lambda, alpha, gamma, cvar::AugmentedCostMode::kStandard);
      const auto policy = toy::make_policy(aug.policy_input_dim());
      const Eigen::VectorXd theta = toy::random_theta(policy.dimension(), gen.next_u64(), 2.0);
      cvar::Rng rng(gen.next_u64());
      const auto t = cvar::rollout_augmented(aug, policy, theta, s0, rng, 1000);
      if (t.truncated) continue;
      const auto [lhs, rhs] = cvar::augmented_loss_identity_check(t, s0, lambda, alpha, gamma);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
      ++count;
    }
  }
  return {count == 10000 && worst <= 1e-9,
          std::to_string(count) + " trajectories, worst relative gap " + fmt("%.3g", worst)};
}

// 3 ---------------------------------------------------------------------------

Result gradient_unbiasedness() {
  const auto env = toy::make_env(false);
  const cvar::RiskSpec risk{0.7, 2.5, 100.0, 0.9};
  double closed_gap = 0.0;
  double fd_gap = 0.0;
  std::size_t paths_max = 0;
  auto L = [&](const Eigen::VectorXd& th, double nu, double lambda) {
    return toy::lagrangian(toy::enumerate(env, th, risk.gamma, 10), nu, lambda, risk.alpha, risk.beta);
  };
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::VectorXd theta = toy::random_theta(10, 100 + trial, 1.5);
    const auto paths = toy::enumerate(env, theta, risk.gamma, 10);
    paths_max = std::max(paths_max, paths.size());
    const double nu = 2.1 + 0.012 * trial;  // between the atoms 1.9 and 2.45
    const double lambda = 0.2 + 0.15 * trial;
    std::vector<double> losses;
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> scores;
    for (const auto& p : paths) {
      losses.push_back(p.loss);
      weights.push_back(p.probability);
      scores.push_back(p.score);
    }
    const auto g = cvar::estimate_batch_gradients(losses, scores, weights, {theta, nu, lambda, 0}, risk);

    Eigen::VectorXd g_theta = Eigen::VectorXd::Zero(10);
    double exceed = 0.0;
    double excess = 0.0;
    for (const auto& p : paths) {
      const double plus = std::max(p.loss - nu, 0.0);
      g_theta += p.probability * p.score * (p.loss + lambda / (1 - risk.alpha) * plus);
      if (p.loss >= nu) exceed += p.probability;
      excess += p.probability * plus;
    }
    closed_gap = std::max({closed_gap, (g.g_theta - g_theta).cwiseAbs().maxCoeff(),
                           std::abs(g.g_nu - lambda * (1 - exceed / (1 - risk.alpha))),
                           std::abs(g.g_lambda - (nu - risk.beta + excess / (1 - risk.alpha)))});
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < 10; ++j) {
      Eigen::VectorXd tp = theta;
      Eigen::VectorXd tm = theta;
      tp[j] += h;
      tm[j] -= h;
      const double fd = (L(tp, nu, lambda) - L(tm, nu, lambda)) / (2 * h);
      fd_gap = std::max(fd_gap, std::abs(fd - g.g_theta[j]) / std::max(1.0, std::abs(g.g_theta[j])));
    }
  }
  return {paths_max <= 100 && closed_gap <= 1e-10 && fd_gap <= 1e-5,
          std::to_string(paths_max) + " paths, closed-form gap " + fmt("%.3g", closed_gap) + ", FD relative gap " +
              fmt("%.3g", fd_gap)};
}

// 4 ---------------------------------------------------------------------------

Result critic_fixed_point() {
  const auto env = toy::make_env(true);
  const double gamma = 0.9;
  const auto aug = cvar::augment(env, 1.5, 0.75, gamma, cvar::AugmentedCostMode::kStandard);
  const auto policy = toy::make_policy(aug.policy_input_dim());
  const Eigen::VectorXd theta = toy::random_theta(policy.dimension(), 4);
  const auto chain = cvar::build_augmented_chain(aug, policy, theta, 2.0, cvar::BudgetGrid{-6.0, 6.0, 121}, 500);
  const cvar::TabularChainFeatures features(chain);
  const Eigen::VectorXd v_star = cvar::lstd_solve(cvar::exact_lstd_system(chain, features, gamma));
  const Eigen::VectorXd vi = cvar::value_iteration(chain, gamma, 1e-12);
  const double lstd_gap = (v_star - vi).cwiseAbs().maxCoeff();
  // TD contracts in the occupation-weighted norm; states with d ~ 1e-7 are
  // never sampled within the budget, so the plain norm is reported only
  const Eigen::VectorXd d = cvar::occupation_measure(chain, gamma);
  auto dnorm = [&](const Eigen::VectorXd& x) { return std::sqrt((d.array() * x.array().square()).sum()); };

  const cvar::StepSchedule zeta4{0.5, 0.55};
  Eigen::VectorXd v = Eigen::VectorXd::Zero(v_star.size());
  cvar::Rng rng(4);
  std::size_t samples = 0;
  std::size_t at = chain.initial;
  double rel = INFINITY;
  while (samples < 200000) {
    if (at == cvar::AugmentedChain::kSink) at = chain.initial;
    const auto& e = cvar::sample_edge(chain, at, rng);
    const double next_value = e.next == cvar::AugmentedChain::kSink ? 0.0 : v[static_cast<Eigen::Index>(e.next)];
    const double delta = e.cost + gamma * next_value - v[static_cast<Eigen::Index>(at)];
    v[static_cast<Eigen::Index>(at)] += zeta4(++samples) * delta;
    at = e.next;
    if (samples % 1000 == 0) {
      rel = dnorm(v - v_star) / dnorm(v_star);
      if (rel <= 0.05) break;
    }
  }
  return {chain.size() <= 500 && lstd_gap <= 1e-8 && rel <= 0.05,
          std::to_string(chain.size()) + " states, LSTD vs VI " + fmt("%.3g", lstd_gap) + ", TD relative error " +
              fmt("%.3g", rel) + " (d-weighted; plain " + fmt("%.3g", (v - v_star).norm() / v_star.norm()) +
              ") after " + std::to_string(samples) + " samples"};
}

// 5 ---------------------------------------------------------------------------

Result estimator_agreement() {
  const auto env = toy::make_env(false);
  double nu_gap = 0.0;
  double lambda_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double gamma = 0.8 + 0.009 * trial;
    const cvar::RiskSpec risk{0.55 + 0.02 * trial, 2.3, 100.0, gamma};
    const double lambda = 0.3 + 0.1 * trial;
    const double nu = 2.07 + 0.07 * trial;
    const auto aug = cvar::augment(env, lambda, risk.alpha, gamma, cvar::AugmentedCostMode::kStandard);
    const auto policy = toy::make_policy(aug.policy_input_dim());
    const Eigen::VectorXd theta = toy::random_theta(policy.dimension(), 800 + trial);
    const auto paths = cvar::enumerate_augmented_trajectories(aug, policy, theta, nu, 10, 1000);
    double estimate = 0.0;
    double exceed = 0.0;
    double excess = 0.0;
    for (const auto& w : paths) {
      estimate += w.probability * cvar::semi_nu_gradient(lambda, w.trajectory.terminal_budget(), risk.alpha);
      if (w.trajectory.loss >= nu) exceed += w.probability;
      excess += w.probability * std::max(w.trajectory.loss - nu, 0.0);
    }
    nu_gap = std::max(nu_gap, std::abs(estimate - lambda * (1 - exceed / (1 - risk.alpha))));

    const auto chain = cvar::build_augmented_chain(aug, policy, theta, nu, std::nullopt, 1000);
    const Eigen::VectorXd d = cvar::occupation_measure(chain, gamma);
    double lam = (1.0 - d.sum()) * (nu - risk.beta);
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const auto& z = chain.states[i];
      double g = nu - risk.beta;
      if (z.env.terminal) g += std::max(-z.s, 0.0) / ((1 - gamma) * (1 - risk.alpha));
      lam += d[static_cast<Eigen::Index>(i)] * g;
    }
    lambda_gap = std::max(lambda_gap, std::abs(lam - (nu - risk.beta + excess / (1 - risk.alpha))));
  }
  return {nu_gap <= 1e-10 && lambda_gap <= 1e-10,
          "nu estimator gap " + fmt("%.3g", nu_gap) + ", lambda estimator gap " + fmt("%.3g", lambda_gap)};
}

// 6 ---------------------------------------------------------------------------

Result table_one() {
  struct Pair {
    const char* config;
    cvar::Algorithm neutral;
    cvar::Algorithm sensitive;
  };
  const std::vector<Pair> pairs{{"optstop_pg.cfg", cvar::Algorithm::kPg, cvar::Algorithm::kPgCvar},
                                {"optstop_ac.cfg", cvar::Algorithm::kAc, cvar::Algorithm::kAcCvarSpsa},
                                {"optstop_ac.cfg", cvar::Algorithm::kAc, cvar::Algorithm::kAcCvarSemi}};
  bool pass = true;
  std::string detail;
  for (const Pair& pair : pairs) {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto run = [&](cvar::Algorithm a) {
        const auto config = cvar::load_config_file(std::string(CVAR_CONFIG_DIR) + "/" + pair.config,
                                                   {{"algorithm", cvar::algorithm_name(a)},
                                                    {"seed", std::to_string(seed)},
                                                    {"train.iterations", "1000"},
                                                    {"eval.episodes", "1000"}});
        return cvar::evaluate_model(cvar::train_model(config)).metrics;
      };
      const auto n = run(pair.neutral);
      const auto s = run(pair.sensitive);
      const bool ok = s.cvar <= 0.9 * n.cvar && s.tail_prob <= n.tail_prob && s.mean >= n.mean;
      wins += ok ? 1 : 0;
      std::printf("  %s vs %s seed %llu: mean %.4f/%.4f cvar %.4f/%.4f tail %.4f/%.4f %s\n",
                  cvar::algorithm_name(pair.neutral).c_str(), cvar::algorithm_name(pair.sensitive).c_str(),
                  static_cast<unsigned long long>(seed), n.mean, s.mean, n.cvar, s.cvar, n.tail_prob, s.tail_prob,
                  ok ? "ok" : "no");
      std::fflush(stdout);
    }
    pass = pass && wins >= 4;
    if (!detail.empty()) detail += ", ";
    detail += cvar::algorithm_name(pair.sensitive) + " " + std::to_string(wins) + "/5";
  }
  return {pass, detail};
}

// 7 ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result determinism() {
  const auto root = std::filesystem::temp_directory_path() / "cvar_acceptance_determinism";
  std::filesystem::remove_all(root);
  bool pass = true;
  std::string detail;
  for (const char* cfg : {"optstop_pg.cfg", "optstop_ac.cfg"}) {
    std::vector<std::filesystem::path> runs;
    int r = 0;
    for (const char* threads : {"1", "4", "4"}) {
      const auto dir = root / (std::string(cfg) + "_" + std::to_string(r++));
      runs.push_back(dir);
      const std::string base = std::string("CVAR_MDP_THREADS=") + threads + " \"" + CVAR_CLI_PATH + "\"";
      const std::string train = base + " train --config \"" + CVAR_CONFIG_DIR + "/" + cfg + "\" --seed 11 --out \"" +
                                dir.string() + "\" > /dev/null 2>&1";
      const std::string eval = base + " eval --out \"" + dir.string() + "\" > /dev/null 2>&1";
      for (const std::string& cmd : {train, eval}) {
        const int status = std::system(cmd.c_str());
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        if (code != 0 && code != 3) {
          pass = false;
          detail += std::string(cfg) + ": command failed with " + std::to_string(code) + "; ";
        }
      }
    }
    for (const char* file : {"history.csv", "losses.csv", "histogram.csv", "histogram_tail.csv", "report.txt",
                             "model.txt"}) {
      const std::string first = slurp(runs[0] / file);
      bool same = !first.empty();
      for (std::size_t i = 1; i < runs.size(); ++i) same = same && slurp(runs[i] / file) == first;
      if (!same) {
        pass = false;
        detail += std::string(cfg) + ": " + file + " differs; ";
      }
    }
  }
  std::filesystem::remove_all(root);
  if (pass) detail = "train+eval outputs byte-identical for 1 and 4 threads (PG_CVAR, AC_CVAR_SPSA)";
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"CVaR identity", cvar_identity},
      {"augmented-loss identity", augmented_identity},
      {"gradient unbiasedness", gradient_unbiasedness},
      {"critic fixed point", critic_fixed_point},
      {"nu/lambda estimator agreement", estimator_agreement},
      {"qualitative mean-CVaR trade-off", table_one},
      {"determinism", determinism},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]\n");
      return 2;
    }
  }
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "criterion must be 1..%zu\n", criteria.size());
    return 2;
  }
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu (%s): %s -- %s [%.2f s]\n", i + 1, criteria[i].first.c_str(), r.pass ? "PASS" : "FAIL",
                r.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
