#include "cvar/pg.hpp"

#include <algorithm>
#include <cmath>

#include "cvar/errors.hpp"
#include "cvar/parallel.hpp"
#include "cvar/rng.hpp"

namespace cvar {

GradientEstimate estimate_batch_gradients(std::span<const double> losses, std::span<const Eigen::VectorXd> scores,
                                          std::span<const double> weights, const SaddleIterate& iterate,
                                          const RiskSpec& risk) {
  const std::size_t n = losses.size();
  if (n == 0) throw InputError("gradient estimate needs a non-empty batch");
  if (scores.size() != n) throw InputError("losses and scores differ in length");
  if (!weights.empty() && weights.size() != n) throw InputError("losses and weights differ in length");

  const double inv_tail = 1.0 / (1.0 - risk.alpha);
  const double uniform = 1.0 / static_cast<double>(n);
  const auto dim = iterate.theta.size();

  Eigen::VectorXd mean_part = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd tail_part = Eigen::VectorXd::Zero(dim);
  double exceed = 0.0;
  double excess = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (scores[j].size() != dim) throw InputError("score dimension does not match theta");
    const double w = weights.empty() ? uniform : weights[j];
    const double d = losses[j];
    mean_part += (w * d) * scores[j];
    if (d >= iterate.nu) {
      exceed += w;
      excess += w * (d - iterate.nu);
      tail_part += (w * (d - iterate.nu)) * scores[j];
    }
  }

  GradientEstimate g;
  g.batch_size = n;
  g.g_nu = iterate.lambda - iterate.lambda * inv_tail * exceed;
  g.g_theta = mean_part + (iterate.lambda * inv_tail) * tail_part;
  g.g_lambda = iterate.nu - risk.beta + inv_tail * excess;
  if (!g.g_theta.allFinite() || !std::isfinite(g.g_nu) || !std::isfinite(g.g_lambda)) {
    throw NumericError("non-finite gradient estimate");
  }
  return g;
}

GradientEstimate estimate_batch_gradients(std::span<const Trajectory> batch, const SaddleIterate& iterate,
                                          const RiskSpec& risk) {
  std::vector<double> losses;
  std::vector<Eigen::VectorXd> scores;
  losses.reserve(batch.size());
  scores.reserve(batch.size());
  for (const Trajectory& t : batch) {
    losses.push_back(t.loss);
    scores.push_back(t.score);
  }
  return estimate_batch_gradients(losses, scores, {}, iterate, risk);
}

void PgSettings::validate() const {
  risk.validate();
  schedules.validate(false);
  if (batch == 0) throw InputError("pg.batch must be positive");
  if (warmup == 0) throw InputError("pg.warmup must be positive");
  if (!(lambda0 >= 0.0 && lambda0 <= risk.lambda_max)) throw InputError("pg.lambda0 must lie in [0, lambda_max]");
  if (horizon_cap == 0) throw InputError("horizon cap must be positive");
  if (limits.iterations == 0) throw InputError("train.iterations must be positive");
  if (limits.max_iterations < limits.iterations) throw InputError("train.max_iterations below train.iterations");
  // Constructs the sets purely for their own validation.
  (void)ProjectionSets::make(1, theta_bound, c_max, risk.gamma, risk.lambda_max);
}

PgSettings default_pg_settings() {
  PgSettings s;
  s.risk = {0.9, 1.9, 1000.0, 0.95};
  s.schedules.rates = {{0.1, 1.0}, {0.05, 0.8}, {0.01, 0.55}};
  return s;
}

namespace {

std::vector<Trajectory> simulate_batch(const Environment& env, const BoltzmannPolicy& policy,
                                       const Eigen::VectorXd& theta, const PgSettings& settings, std::uint64_t seed,
                                       std::uint64_t tag, std::size_t index, std::size_t count) {
  std::vector<Trajectory> batch(count);
  const EnvState start = env.initial_state();
  const std::size_t threads = settings.threads == 0 ? default_thread_count() : settings.threads;
  parallel_for(count, threads, [&](std::size_t j) {
    Rng rng(substream_seed(seed, tag, index, j));
    batch[j] = rollout(env, policy, theta, start, settings.risk.gamma, rng, settings.horizon_cap);
  });
  return batch;
}

}  // namespace

SaddleIterate apply_pg_update(const SaddleIterate& iterate, const GradientEstimate& g, const TimescaleStack& schedules,
                              const ProjectionSets& sets, bool risk_neutral) {
  const std::size_t i = iterate.iteration + 1;
  SaddleIterate next;
  next.iteration = i;
  next.nu = sets.nu.project(iterate.nu - schedules.zeta(3, i) * g.g_nu);
  next.theta = sets.theta.project(iterate.theta - schedules.zeta(2, i) * g.g_theta);
  next.lambda = risk_neutral ? 0.0 : sets.lambda.project(iterate.lambda + schedules.zeta(1, i) * g.g_lambda);
  return next;
}

SaddleIterate pg_iteration(const SaddleIterate& iterate, const PgSettings& settings, const ProjectionSets& sets,
                           const Environment& env, const BoltzmannPolicy& policy, std::uint64_t seed,
                           PgStepInfo* info) {
  const std::size_t i = iterate.iteration + 1;
  const std::vector<Trajectory> batch =
      simulate_batch(env, policy, iterate.theta, settings, seed, kTagTrain, i, settings.batch);
  GradientEstimate g = estimate_batch_gradients(batch, iterate, settings.risk);
  if (info) {
    double total = 0.0;
    for (const Trajectory& t : batch) total += t.loss;
    info->mean_batch_loss = total / static_cast<double>(batch.size());
    info->gradient = g;
  }
  return apply_pg_update(iterate, g, settings.schedules, sets, settings.risk_neutral);
}

double warm_start_nu(const Environment& env, const BoltzmannPolicy& policy, const Eigen::VectorXd& theta,
                     const PgSettings& settings, std::uint64_t seed) {
  const std::vector<Trajectory> batch =
      simulate_batch(env, policy, theta, settings, seed, kTagWarmup, 0, settings.warmup);
  std::vector<double> losses;
  losses.reserve(batch.size());
  for (const Trajectory& t : batch) losses.push_back(t.loss);
  return value_at_risk(EmpiricalDistribution(std::move(losses)), settings.risk.alpha);
}

TrainingOutcome pg_train(const Environment& env, const BoltzmannPolicy& policy, const PgSettings& settings,
                         std::uint64_t seed) {
  settings.validate();
  double lambda_max = settings.risk.lambda_max;
  ProjectionSets sets =
      ProjectionSets::make(policy.dimension(), settings.theta_bound, settings.c_max, settings.risk.gamma, lambda_max);

  TrainingOutcome out;
  SaddleIterate it;
  it.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dimension()));
  it.nu = sets.nu.project(warm_start_nu(env, policy, it.theta, settings, seed));
  it.lambda = settings.risk_neutral ? 0.0 : settings.lambda0;

  ConvergenceMonitor monitor(settings.limits.convergence);
  std::size_t round_end = settings.limits.iterations;
  while (it.iteration < round_end) {
    PgStepInfo info;
    it = pg_iteration(it, settings, sets, env, policy, seed, &info);
    out.history.push_back({it.iteration, it.nu, it.lambda, it.theta.norm(), info.mean_batch_loss, lambda_max});
    monitor.observe(it.theta, it.nu, it.lambda);
    const CapDecision decision = monitor.decide(lambda_max);
    if (decision == CapDecision::kAccept) {
      out.converged = true;
      break;
    }
    if (decision == CapDecision::kDouble) {
      lambda_max *= 2.0;
      sets.lambda.hi = lambda_max;
      ++out.doublings;
      monitor.reset();
      round_end = std::min(it.iteration + settings.limits.iterations, settings.limits.max_iterations);
    }
  }
  out.final = it;
  out.lambda_max = lambda_max;
  return out;
}

}  // namespace cvar
