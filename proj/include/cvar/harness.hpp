#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvar/actor_critic.hpp"
#include "cvar/optstop.hpp"
#include "cvar/policy.hpp"
#include "cvar/risk.hpp"
#include "cvar/saddle.hpp"
#include "cvar/stochastic_approx.hpp"

namespace cvar {

enum class Algorithm { kPg, kPgCvar, kAc, kAcCvarSpsa, kAcCvarSemi, kAcCvarAlt };

std::string algorithm_name(Algorithm algorithm);
/// Accepts PG, PG_CVAR, AC, AC_CVAR_SPSA, AC_CVAR_SEMI, AC_CVAR_ALT (case and
/// '-' vs '_' insensitive). Throws ConfigError otherwise.
Algorithm parse_algorithm(const std::string& name);
bool is_actor_critic(Algorithm algorithm);
bool is_risk_sensitive(Algorithm algorithm);

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kPgCvar;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  OptStopParams env;
  RiskSpec risk;
  double c_max = 4000.0;
  std::size_t policy_centers = 4;
  double policy_width = 1.0;
  double theta_bound = 60.0;
  BudgetScale scale{-4.0, 8.0, false};
  std::size_t critic_centers = 4;
  double critic_width = 1.0;
  std::size_t batch = 100;
  double lambda0 = 1.0;
  std::size_t warmup = 100;
  TimescaleStack schedules;
  TrainingLimits limits;
  std::size_t horizon_cap = 1000;
  SemiNuStep semi_nu_step = SemiNuStep::kZeta2;
  std::size_t eval_episodes = 1000;
  std::size_t eval_bins = 60;

  /// Throws ConfigError describing the first inconsistency.
  void validate() const;
  /// Every key in canonical order; parse_config(to_text()) round-trips.
  std::string to_text() const;
};

/// Defaults for an algorithm family (PG or actor-critic step schedules and beta).
ExperimentConfig default_config(Algorithm algorithm);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines, '#' comments, blank lines ignored.
KeyValues parse_key_values(const std::string& text);

/// Builds a config from the algorithm's defaults, then the file keys, then
/// `overrides`. Unknown keys and malformed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text, const KeyValues& overrides = {});
ExperimentConfig load_config_file(const std::string& path, const KeyValues& overrides = {});

/// Environment and policy of an experiment.
struct ExperimentSetup {
  std::unique_ptr<OptimalStopping> env;
  std::unique_ptr<BoltzmannPolicy> policy;
};

ExperimentSetup make_setup(const ExperimentConfig& config);

struct TrainedModel {
  ExperimentConfig config;
  Eigen::VectorXd theta;
  double nu = 0.0;
  double lambda = 0.0;
  double lambda_max = 0.0;
  std::size_t iterations = 0;
  std::size_t doublings = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
};

TrainedModel train_model(const ExperimentConfig& config);

std::string model_to_text(const TrainedModel& model);
TrainedModel model_from_text(const std::string& text);
std::string history_to_csv(const std::vector<IterationRecord>& history);

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [lo, hi]. With `clamp`, values outside the range fall
/// into the end bins so counts sum to the sample size; otherwise they are
/// dropped.
Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins, bool clamp);
std::string histogram_to_csv(const Histogram& histogram);

struct Metrics {
  double mean = 0.0;
  double variance = 0.0;
  double var = 0.0;
  double cvar = 0.0;
  double tail_prob = 0.0;
};

Metrics compute_metrics(const EmpiricalDistribution& dist, const RiskSpec& risk);

struct EvaluationReport {
  std::string algorithm;
  std::string environment;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  bool converged = false;
  double alpha = 0.0;
  double beta = 0.0;
  Metrics metrics;
  double nu = 0.0;
  double lambda = 0.0;
  double lambda_max = 0.0;
  std::size_t iterations = 0;
  double theta_norm = 0.0;
  std::vector<double> losses;
  std::vector<std::size_t> lengths;
  Histogram histogram;
  Histogram tail_histogram;
};

/// Rolls out the learned policy for `episodes` (default from the config)
/// episodes; episode e uses substream (seed, eval, e).
EvaluationReport evaluate_model(const TrainedModel& model, std::optional<std::size_t> episodes = std::nullopt);

std::string report_to_text(const EvaluationReport& report);
std::string losses_to_csv(const EvaluationReport& report);

/// Exact loss metrics of the learned policy by path enumeration.
Metrics exact_metrics(const TrainedModel& model, std::size_t max_horizon = 16);

/// Side-by-side table of report files with deltas against the first one.
/// Throws InputError when fewer than two reports are given or the
/// environments differ.
std::string compare_reports(const std::vector<std::pair<std::string, std::string>>& named_report_texts);

std::string format_double(double x);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace cvar
