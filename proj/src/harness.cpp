#include "cvar/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "cvar/errors.hpp"
#include "cvar/mdp.hpp"
#include "cvar/parallel.hpp"
#include "cvar/pg.hpp"
#include "cvar/rng.hpp"

namespace cvar {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kPg: return "PG";
    case Algorithm::kPgCvar: return "PG_CVAR";
    case Algorithm::kAc: return "AC";
    case Algorithm::kAcCvarSpsa: return "AC_CVAR_SPSA";
    case Algorithm::kAcCvarSemi: return "AC_CVAR_SEMI";
    case Algorithm::kAcCvarAlt: return "AC_CVAR_ALT";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  std::string key;
  for (char ch : name) key += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (Algorithm a : {Algorithm::kPg, Algorithm::kPgCvar, Algorithm::kAc, Algorithm::kAcCvarSpsa,
                      Algorithm::kAcCvarSemi, Algorithm::kAcCvarAlt}) {
    if (algorithm_name(a) == key) return a;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

bool is_actor_critic(Algorithm algorithm) { return algorithm != Algorithm::kPg && algorithm != Algorithm::kPgCvar; }

bool is_risk_sensitive(Algorithm algorithm) { return algorithm != Algorithm::kPg && algorithm != Algorithm::kAc; }

ExperimentConfig default_config(Algorithm algorithm) {
  ExperimentConfig c;
  c.algorithm = algorithm;
  c.risk.gamma = 0.95;
  c.risk.alpha = 0.9;
  c.risk.lambda_max = 1000.0;
  if (is_actor_critic(algorithm)) {
    const AcSettings ac = default_ac_settings();
    c.risk.beta = ac.risk.beta;
    c.schedules = ac.schedules;
  } else {
    const PgSettings pg = default_pg_settings();
    c.risk.beta = pg.risk.beta;
    c.schedules = pg.schedules;
    c.schedules.rates.push_back({0.5, 0.55});
    c.schedules.perturbation = {0.5, 0.1};
  }
  return c;
}

// ---------------------------------------------------------------------------
// Key/value parsing

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& value) {
  double x = 0.0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, x);
  if (ec != std::errc() || ptr != end || !std::isfinite(x)) {
    throw ConfigError(key + ": expected a finite number, got '" + value + "'");
  }
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t x = 0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, x);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a nonnegative integer, got '" + value + "'");
  return x;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define REAL_FIELD(name, member)                                                               \
  Field {                                                                                      \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = parse_real(name, v); },   \
        [](const ExperimentConfig& c) { return format_double(c.member); }                      \
  }
#define COUNT_FIELD(name, member)                                                              \
  Field {                                                                                      \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = parse_count(name, v); },  \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                     \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"algorithm", [](ExperimentConfig& c, const std::string& v) { c.algorithm = parse_algorithm(v); },
       [](const ExperimentConfig& c) { return algorithm_name(c.algorithm); }},
      {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      COUNT_FIELD("threads", threads),
      REAL_FIELD("env.c0", env.c0),
      REAL_FIELD("env.p_h", env.holding_cost),
      COUNT_FIELD("env.T", env.horizon),
      REAL_FIELD("env.f_u", env.up_factor),
      REAL_FIELD("env.f_d", env.down_factor),
      REAL_FIELD("env.p", env.up_probability),
      REAL_FIELD("env.gamma", risk.gamma),
      REAL_FIELD("risk.alpha", risk.alpha),
      REAL_FIELD("risk.beta", risk.beta),
      REAL_FIELD("risk.lambda_max", risk.lambda_max),
      REAL_FIELD("risk.c_max", c_max),
      COUNT_FIELD("policy.centers", policy_centers),
      REAL_FIELD("policy.width", policy_width),
      REAL_FIELD("policy.theta_bound", theta_bound),
      REAL_FIELD("features.s_min", scale.s_min),
      REAL_FIELD("features.s_max", scale.s_max),
      COUNT_FIELD("critic.centers", critic_centers),
      REAL_FIELD("critic.width", critic_width),
      COUNT_FIELD("pg.batch", batch),
      REAL_FIELD("schedule.c1", schedules.rates[0].coefficient),
      REAL_FIELD("schedule.p1", schedules.rates[0].exponent),
      REAL_FIELD("schedule.c2", schedules.rates[1].coefficient),
      REAL_FIELD("schedule.p2", schedules.rates[1].exponent),
      REAL_FIELD("schedule.c3", schedules.rates[2].coefficient),
      REAL_FIELD("schedule.p3", schedules.rates[2].exponent),
      REAL_FIELD("schedule.c4", schedules.rates[3].coefficient),
      REAL_FIELD("schedule.p4", schedules.rates[3].exponent),
      REAL_FIELD("schedule.cDelta", schedules.perturbation.coefficient),
      REAL_FIELD("schedule.pDelta", schedules.perturbation.exponent),
      REAL_FIELD("train.lambda0", lambda0),
      COUNT_FIELD("train.warmup", warmup),
      COUNT_FIELD("train.iterations", limits.iterations),
      COUNT_FIELD("train.max_iterations", limits.max_iterations),
      COUNT_FIELD("train.window", limits.convergence.window),
      REAL_FIELD("train.tolerance", limits.convergence.tolerance),
      REAL_FIELD("train.margin", limits.convergence.margin),
      COUNT_FIELD("train.horizon_cap", horizon_cap),
      {"ac.semi_nu_step",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "zeta2") {
           c.semi_nu_step = SemiNuStep::kZeta2;
         } else if (v == "zeta3") {
           c.semi_nu_step = SemiNuStep::kZeta3;
         } else {
           throw ConfigError("ac.semi_nu_step: expected zeta2 or zeta3, got '" + v + "'");
         }
       },
       [](const ExperimentConfig& c) { return std::string(c.semi_nu_step == SemiNuStep::kZeta2 ? "zeta2" : "zeta3"); }},
      COUNT_FIELD("eval.episodes", eval_episodes),
      COUNT_FIELD("eval.bins", eval_bins),
  };
  return table;
}

#undef REAL_FIELD
#undef COUNT_FIELD

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void ExperimentConfig::validate() const {
  try {
    env.validate();
    risk.validate();
    if (schedules.rates.size() != 4) throw InputError("four step schedules are required");
    if (is_actor_critic(algorithm)) {
      AcSettings ac;
      ac.risk = risk;
      ac.schedules = schedules;
      ac.variant = algorithm == Algorithm::kAcCvarSemi ? AcVariant::kSemiTrajectory
                   : algorithm == Algorithm::kAcCvarAlt ? AcVariant::kAlternativeTwoCritic
                                                        : AcVariant::kSpsaIncremental;
      ac.theta_bound = theta_bound;
      ac.c_max = c_max;
      ac.lambda0 = lambda0;
      ac.scale = scale;
      ac.critic_centers = critic_centers;
      ac.warmup = warmup;
      ac.horizon_cap = horizon_cap;
      ac.limits = limits;
      ac.validate();
    } else {
      PgSettings pg;
      pg.risk = risk;
      pg.schedules.rates.assign(schedules.rates.begin(), schedules.rates.begin() + 3);
      pg.theta_bound = theta_bound;
      pg.c_max = c_max;
      pg.batch = batch;
      pg.warmup = warmup;
      pg.lambda0 = lambda0;
      pg.horizon_cap = horizon_cap;
      pg.limits = limits;
      pg.validate();
    }
    if (policy_centers == 0) throw InputError("policy.centers must be positive");
    if (!(policy_width > 0.0)) throw InputError("policy.width must be positive");
    if (!(critic_width > 0.0)) throw InputError("critic.width must be positive");
    if (eval_episodes == 0) throw InputError("eval.episodes must be positive");
    if (eval_bins == 0) throw InputError("eval.bins must be positive");
    if (limits.convergence.window < 2) throw InputError("train.window must be at least 2");
    if (!(limits.convergence.tolerance > 0.0)) throw InputError("train.tolerance must be positive");
    if (!(limits.convergence.margin >= 0.0 && limits.convergence.margin < 1.0)) {
      throw InputError("train.margin must lie in [0, 1)");
    }
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

ExperimentConfig parse_config(const std::string& text, const KeyValues& overrides) {
  KeyValues all = parse_key_values(text);
  all.insert(all.end(), overrides.begin(), overrides.end());
  // The algorithm picks the family defaults, so it is resolved first.
  Algorithm algorithm = Algorithm::kPgCvar;
  for (const auto& [key, value] : all) {
    if (key == "algorithm") algorithm = parse_algorithm(value);
  }
  ExperimentConfig config = default_config(algorithm);
  for (const auto& [key, value] : all) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown key '" + key + "'");
    f->set(config, value);
  }
  config.scale.ignore = config.algorithm == Algorithm::kAc;
  config.validate();
  return config;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

ExperimentConfig load_config_file(const std::string& path, const KeyValues& overrides) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, overrides);
}

// ---------------------------------------------------------------------------
// Training

ExperimentSetup make_setup(const ExperimentConfig& config) {
  ExperimentSetup setup;
  setup.env = std::make_unique<OptimalStopping>(config.env);
  const std::size_t input_dim = setup.env->feature_input_dim() + (is_actor_critic(config.algorithm) ? 1 : 0);
  auto features = std::make_shared<RbfFeatures>(input_dim, config.policy_centers, config.policy_width);
  setup.policy = std::make_unique<BoltzmannPolicy>(std::move(features), setup.env->num_actions());
  return setup;
}

namespace {

PgSettings pg_settings(const ExperimentConfig& c) {
  PgSettings s;
  s.risk = c.risk;
  s.schedules.rates.assign(c.schedules.rates.begin(), c.schedules.rates.begin() + 3);
  s.theta_bound = c.theta_bound;
  s.c_max = c.c_max;
  s.batch = c.batch;
  s.warmup = c.warmup;
  s.lambda0 = c.lambda0;
  s.risk_neutral = !is_risk_sensitive(c.algorithm);
  s.horizon_cap = c.horizon_cap;
  s.threads = c.threads;
  s.limits = c.limits;
  return s;
}

AcSettings ac_settings(const ExperimentConfig& c) {
  AcSettings s;
  s.risk = c.risk;
  s.schedules = c.schedules;
  s.variant = c.algorithm == Algorithm::kAcCvarSemi  ? AcVariant::kSemiTrajectory
              : c.algorithm == Algorithm::kAcCvarAlt ? AcVariant::kAlternativeTwoCritic
                                                     : AcVariant::kSpsaIncremental;
  s.semi_nu_step = c.semi_nu_step;
  s.theta_bound = c.theta_bound;
  s.c_max = c.c_max;
  s.lambda0 = c.lambda0;
  s.risk_neutral = !is_risk_sensitive(c.algorithm);
  s.scale = c.scale;
  s.critic_centers = c.critic_centers;
  s.critic_width = c.critic_width;
  s.warmup = c.warmup;
  s.horizon_cap = c.horizon_cap;
  s.threads = c.threads;
  s.limits = c.limits;
  return s;
}

}  // namespace

TrainedModel train_model(const ExperimentConfig& config) {
  config.validate();
  const ExperimentSetup setup = make_setup(config);
  TrainingOutcome outcome;
  if (is_actor_critic(config.algorithm)) {
    outcome = ac_train(*setup.env, *setup.policy, ac_settings(config), config.seed).training;
  } else {
    outcome = pg_train(*setup.env, *setup.policy, pg_settings(config), config.seed);
  }
  TrainedModel model;
  model.config = config;
  model.theta = outcome.final.theta;
  model.nu = outcome.final.nu;
  model.lambda = outcome.final.lambda;
  model.lambda_max = outcome.lambda_max;
  model.iterations = outcome.final.iteration;
  model.doublings = outcome.doublings;
  model.converged = outcome.converged;
  model.history = std::move(outcome.history);
  return model;
}

std::string model_to_text(const TrainedModel& model) {
  std::string out = model.config.to_text();
  out += "model.converged = " + std::string(model.converged ? "1" : "0") + "\n";
  out += "model.iterations = " + std::to_string(model.iterations) + "\n";
  out += "model.doublings = " + std::to_string(model.doublings) + "\n";
  out += "model.nu = " + format_double(model.nu) + "\n";
  out += "model.lambda = " + format_double(model.lambda) + "\n";
  out += "model.lambda_max = " + format_double(model.lambda_max) + "\n";
  out += "model.theta =";
  for (Eigen::Index j = 0; j < model.theta.size(); ++j) out += " " + format_double(model.theta[j]);
  out += "\n";
  return out;
}

TrainedModel model_from_text(const std::string& text) {
  KeyValues config_keys;
  std::map<std::string, std::string> model_keys;
  for (auto& [key, value] : parse_key_values(text)) {
    if (key.rfind("model.", 0) == 0) {
      model_keys[key] = value;
    } else {
      config_keys.emplace_back(key, value);
    }
  }
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = model_keys.find(key);
    if (it == model_keys.end()) throw ConfigError("model file lacks '" + key + "'");
    return it->second;
  };
  TrainedModel model;
  model.config = parse_config("", config_keys);
  model.converged = parse_u64("model.converged", need("model.converged")) != 0;
  model.iterations = parse_count("model.iterations", need("model.iterations"));
  model.doublings = parse_count("model.doublings", need("model.doublings"));
  model.nu = parse_real("model.nu", need("model.nu"));
  model.lambda = parse_real("model.lambda", need("model.lambda"));
  model.lambda_max = parse_real("model.lambda_max", need("model.lambda_max"));
  std::vector<double> theta;
  std::istringstream in(need("model.theta"));
  std::string token;
  while (in >> token) theta.push_back(parse_real("model.theta", token));
  const ExperimentSetup setup = make_setup(model.config);
  if (theta.size() != setup.policy->dimension()) {
    throw ConfigError("model.theta has " + std::to_string(theta.size()) + " entries, expected " +
                      std::to_string(setup.policy->dimension()));
  }
  model.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return model;
}

std::string history_to_csv(const std::vector<IterationRecord>& history) {
  std::string out = "iter,nu,lambda,theta_norm,mean_batch_loss\n";
  for (const IterationRecord& r : history) {
    out += std::to_string(r.iter) + "," + format_double(r.nu) + "," + format_double(r.lambda) + "," +
           format_double(r.theta_norm) + "," + format_double(r.mean_batch_loss) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins, bool clamp) {
  if (bins == 0) throw InputError("histogram needs at least one bin");
  if (!(hi > lo)) throw InputError("histogram needs hi > lo");
  Histogram h;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) h.edges.push_back(lo + static_cast<double>(b) * width);
  h.edges.push_back(hi);
  h.counts.assign(bins, 0);
  for (double x : values) {
    if (!clamp && (x < lo || x > hi)) continue;
    const double pos = std::floor((x - lo) / width);
    const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[idx];
  }
  return h;
}

std::string histogram_to_csv(const Histogram& histogram) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
    out += format_double(histogram.edges[b]) + "," + format_double(histogram.edges[b + 1]) + "," +
           std::to_string(histogram.counts[b]) + "\n";
  }
  return out;
}

Metrics compute_metrics(const EmpiricalDistribution& dist, const RiskSpec& risk) {
  return {dist.mean(), dist.variance(), value_at_risk(dist, risk.alpha), cvar(dist, risk.alpha),
          tail_probability(dist, risk.beta)};
}

EvaluationReport evaluate_model(const TrainedModel& model, std::optional<std::size_t> episodes) {
  const ExperimentConfig& c = model.config;
  const ExperimentSetup setup = make_setup(c);
  const std::size_t n = episodes.value_or(c.eval_episodes);
  if (n == 0) throw InputError("evaluation needs at least one episode");
  const bool ac = is_actor_critic(c.algorithm);
  const AugmentedEnvironment aug(*setup.env, model.lambda, c.risk.alpha, c.risk.gamma, AugmentedCostMode::kStandard,
                                 c.scale);

  EvaluationReport r;
  r.losses.assign(n, 0.0);
  r.lengths.assign(n, 0);
  const std::size_t threads = c.threads == 0 ? default_thread_count() : c.threads;
  parallel_for(n, threads, [&](std::size_t e) {
    Rng rng(substream_seed(c.seed, kTagEval, e));
    if (ac) {
      const AugmentedTrajectory t = rollout_augmented(aug, *setup.policy, model.theta, model.nu, rng, c.horizon_cap);
      r.losses[e] = t.loss;
      r.lengths[e] = t.env_steps;
    } else {
      const Trajectory t = rollout(*setup.env, *setup.policy, model.theta, setup.env->initial_state(), c.risk.gamma,
                                   rng, c.horizon_cap);
      r.losses[e] = t.loss;
      r.lengths[e] = t.length();
    }
  });

  const EmpiricalDistribution dist(r.losses);
  r.algorithm = algorithm_name(c.algorithm);
  r.environment = setup.env->describe() + " gamma=" + format_double(c.risk.gamma);
  r.seed = c.seed;
  r.episodes = n;
  r.converged = model.converged;
  r.alpha = c.risk.alpha;
  r.beta = c.risk.beta;
  r.metrics = compute_metrics(dist, c.risk);
  r.nu = model.nu;
  r.lambda = model.lambda;
  r.lambda_max = model.lambda_max;
  r.iterations = model.iterations;
  r.theta_norm = model.theta.norm();

  const double envelope = setup.env->loss_bound(c.risk.gamma).value_or(dist.max());
  r.histogram = make_histogram(r.losses, 0.0, std::max(envelope, dist.max()), c.eval_bins, true);
  double tail_hi = std::max(dist.max(), c.risk.beta);
  if (!(tail_hi > c.risk.beta)) tail_hi = c.risk.beta + 1.0;
  r.tail_histogram = make_histogram(r.losses, c.risk.beta, tail_hi, c.eval_bins, false);
  return r;
}

std::string report_to_text(const EvaluationReport& r) {
  std::string out;
  auto line = [&](const char* key, const std::string& value) { out += std::string(key) + " = " + value + "\n"; };
  line("algorithm", r.algorithm);
  line("environment", r.environment);
  line("seed", std::to_string(r.seed));
  line("episodes", std::to_string(r.episodes));
  line("converged", r.converged ? "1" : "0");
  line("alpha", format_double(r.alpha));
  line("beta", format_double(r.beta));
  line("mean", format_double(r.metrics.mean));
  line("variance", format_double(r.metrics.variance));
  line("var_alpha", format_double(r.metrics.var));
  line("cvar_alpha", format_double(r.metrics.cvar));
  line("tail_prob_beta", format_double(r.metrics.tail_prob));
  line("nu", format_double(r.nu));
  line("lambda", format_double(r.lambda));
  line("lambda_max", format_double(r.lambda_max));
  line("iterations", std::to_string(r.iterations));
  line("theta_norm", format_double(r.theta_norm));
  return out;
}

std::string losses_to_csv(const EvaluationReport& report) {
  std::string out = "episode,loss,T\n";
  for (std::size_t e = 0; e < report.losses.size(); ++e) {
    out += std::to_string(e) + "," + format_double(report.losses[e]) + "," + std::to_string(report.lengths[e]) + "\n";
  }
  return out;
}

Metrics exact_metrics(const TrainedModel& model, std::size_t max_horizon) {
  const ExperimentConfig& c = model.config;
  const ExperimentSetup setup = make_setup(c);
  if (c.env.horizon > max_horizon) {
    throw InputError("horizon " + std::to_string(c.env.horizon) + " is too large to enumerate (limit " +
                     std::to_string(max_horizon) + ")");
  }
  if (!is_actor_critic(c.algorithm)) {
    std::vector<double> input;
    const StatePolicy policy = [&](const EnvState& state) {
      setup.env->feature_input(state, input);
      return setup.policy->probabilities(model.theta, input);
    };
    return compute_metrics(enumerate_loss_distribution(*setup.env, policy, c.risk.gamma, max_horizon), c.risk);
  }
  const AugmentedEnvironment aug(*setup.env, model.lambda, c.risk.alpha, c.risk.gamma, AugmentedCostMode::kStandard,
                                 c.scale);
  const auto paths = enumerate_augmented_trajectories(aug, *setup.policy, model.theta, model.nu, c.env.horizon + 2,
                                                      std::size_t{1} << 22);
  std::vector<double> losses;
  std::vector<double> weights;
  for (const auto& p : paths) {
    losses.push_back(p.trajectory.loss);
    weights.push_back(p.probability);
  }
  return compute_metrics(EmpiricalDistribution(std::move(losses), std::move(weights)), c.risk);
}

std::string compare_reports(const std::vector<std::pair<std::string, std::string>>& named_report_texts) {
  if (named_report_texts.size() < 2) throw InputError("compare needs at least two reports");
  static const char* const kColumns[] = {"mean", "variance", "cvar_alpha", "tail_prob_beta"};
  struct Row {
    std::string name;
    std::string algorithm;
    double values[4];
  };
  std::vector<Row> rows;
  std::string environment;
  for (const auto& [name, text] : named_report_texts) {
    std::map<std::string, std::string> kv;
    for (auto& [k, v] : parse_key_values(text)) kv[k] = v;
    auto need = [&](const std::string& key) -> const std::string& {
      const auto it = kv.find(key);
      if (it == kv.end()) throw InputError(name + ": report lacks '" + key + "'");
      return it->second;
    };
    if (rows.empty()) {
      environment = need("environment");
    } else if (need("environment") != environment) {
      throw InputError(name + ": environment differs from the first report");
    }
    Row row{name, need("algorithm"), {}};
    for (int j = 0; j < 4; ++j) row.values[j] = parse_real(kColumns[j], need(kColumns[j]));
    rows.push_back(std::move(row));
  }

  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %14s %14s %14s %14s\n", "algorithm", "mean", "variance", "cvar_alpha",
                "tail_prob_beta");
  out += buf;
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %14.6f %14.6f %14.6f %14.6f\n", r.algorithm.c_str(), r.values[0],
                  r.values[1], r.values[2], r.values[3]);
    out += buf;
  }
  out += "deltas against " + rows.front().algorithm + "\n";
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-14s %+14.6f %+14.6f %+14.6f %+14.6f\n", rows[i].algorithm.c_str(),
                  rows[i].values[0] - rows[0].values[0], rows[i].values[1] - rows[0].values[1],
                  rows[i].values[2] - rows[0].values[2], rows[i].values[3] - rows[0].values[3]);
    out += buf;
  }
  return out;
}

}  // namespace cvar
