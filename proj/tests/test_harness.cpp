#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cvar/errors.hpp"
#include "cvar/harness.hpp"

namespace {

cvar::TrainedModel always_accept_model() {
  cvar::TrainedModel m;
  m.config = cvar::default_config(cvar::Algorithm::kPg);
  m.config.eval_episodes = 200;
  const auto setup = cvar::make_setup(m.config);
  m.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(setup.policy->dimension()));
  m.theta[0] = 50.0;  // bias of the accept block
  m.converged = true;
  m.lambda_max = 1000.0;
  return m;
}

cvar::TrainedModel small_trained(cvar::Algorithm algorithm, std::size_t threads) {
  auto config = cvar::default_config(algorithm);
  config.env.horizon = 6;
  config.limits.iterations = 30;
  config.limits.max_iterations = 30;
  config.batch = 20;
  config.warmup = 20;
  config.eval_episodes = 300;
  config.threads = threads;
  config.seed = 7;
  return cvar::train_model(config);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("algorithm names") {
    for (auto a : {cvar::Algorithm::kPg, cvar::Algorithm::kPgCvar, cvar::Algorithm::kAc, cvar::Algorithm::kAcCvarSpsa,
                   cvar::Algorithm::kAcCvarSemi, cvar::Algorithm::kAcCvarAlt}) {
      CHECK(cvar::parse_algorithm(cvar::algorithm_name(a)) == a);
    }
    CHECK(cvar::parse_algorithm("ac-cvar-spsa") == cvar::Algorithm::kAcCvarSpsa);
    CHECK_THROWS_AS(cvar::parse_algorithm("SARSA"), cvar::ConfigError);
    CHECK(cvar::is_actor_critic(cvar::Algorithm::kAc));
    CHECK_FALSE(cvar::is_risk_sensitive(cvar::Algorithm::kAc));
    CHECK(cvar::is_risk_sensitive(cvar::Algorithm::kAcCvarAlt));
  }

  TEST_CASE("family defaults") {
    const auto pg = cvar::default_config(cvar::Algorithm::kPgCvar);
    CHECK(pg.risk.alpha == 0.9);
    CHECK(pg.risk.beta == 1.9);
    CHECK(pg.batch == 100);
    CHECK(pg.schedules.rates[0].coefficient == 0.1);
    CHECK(pg.schedules.rates[2].exponent == 0.55);
    const auto ac = cvar::default_config(cvar::Algorithm::kAcCvarSpsa);
    CHECK(ac.risk.beta == 2.5);
    CHECK(ac.schedules.rates[1].exponent == 0.85);
    CHECK(ac.schedules.rates[3].exponent == 0.55);
    CHECK(ac.schedules.perturbation.coefficient == 0.5);
    CHECK(ac.env.horizon == 20);
    CHECK(ac.risk.gamma == 0.95);
    CHECK(ac.c_max == 4000.0);
  }

  TEST_CASE("config parsing") {
    const std::string text =
        "# comment\n"
        "algorithm = AC_CVAR_SEMI\n"
        "\n"
        "env.T = 12   # trailing comment\n"
        "risk.alpha = 0.95\n"
        "schedule.p2 = 0.9\n"
        "ac.semi_nu_step = zeta3\n";
    const auto c = cvar::parse_config(text, {{"seed", "42"}});
    CHECK(c.algorithm == cvar::Algorithm::kAcCvarSemi);
    CHECK(c.env.horizon == 12);
    CHECK(c.risk.alpha == 0.95);
    CHECK(c.risk.beta == 2.5);
    CHECK(c.schedules.rates[1].exponent == 0.9);
    CHECK(c.semi_nu_step == cvar::SemiNuStep::kZeta3);
    CHECK(c.seed == 42);

    CHECK_THROWS_AS(cvar::parse_config("bogus.key = 1\n"), cvar::ConfigError);
    CHECK_THROWS_AS(cvar::parse_config("env.T = twelve\n"), cvar::ConfigError);
    CHECK_THROWS_AS(cvar::parse_config("risk.alpha = 1.5\n"), cvar::ConfigError);
    CHECK_THROWS_AS(cvar::parse_config("env.f_u = 0.5\n"), cvar::ConfigError);
    CHECK_THROWS_AS(cvar::parse_config("no equals sign\n"), cvar::ConfigError);
    CHECK_THROWS_AS(cvar::parse_config("schedule.p1 = 0.5\n"), cvar::ConfigError);
  }

  TEST_CASE("config round trip") {
    for (auto a : {cvar::Algorithm::kPg, cvar::Algorithm::kAcCvarAlt}) {
      auto c = cvar::default_config(a);
      c.seed = 99;
      c.env.up_probability = 0.6;
      c.risk.beta = 2.125;
      c.limits.convergence.tolerance = 3e-5;
      const std::string text = c.to_text();
      CHECK(cvar::parse_config(text).to_text() == text);
    }
  }

  TEST_CASE("shipped configs load") {
    for (const char* name : {"optstop_pg.cfg", "optstop_ac.cfg"}) {
      const std::string path = std::string(CVAR_CONFIG_DIR) + "/" + name;
      CHECK_NOTHROW(cvar::load_config_file(path));
    }
    CHECK_THROWS_AS(cvar::load_config_file("/nonexistent/config.cfg"), cvar::ConfigError);
  }

  TEST_CASE("degenerate policy gives a point mass") {
    const auto model = always_accept_model();
    const auto report = cvar::evaluate_model(model);
    CHECK(report.metrics.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(report.metrics.variance <= 1e-28);
    CHECK(report.metrics.cvar == 1.0);
    CHECK(report.metrics.tail_prob == 0.0);
    std::size_t total = 0;
    for (auto c : report.histogram.counts) total += c;
    CHECK(total == report.episodes);
    std::size_t tail = 0;
    for (auto c : report.tail_histogram.counts) tail += c;
    CHECK(tail == 0);

    cvar::RiskSpec risk{0.9, 1.5, 10.0, 0.95};
    const auto m = cvar::compute_metrics(cvar::EmpiricalDistribution(std::vector<double>(50, 1.0)), risk);
    CHECK(m.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.cvar == 1.0);
    CHECK(m.variance <= 1e-28);
    CHECK(m.tail_prob == 0.0);
  }

  TEST_CASE("histogram binning") {
    const std::vector<double> xs{0.0, 0.5, 0.99, 1.0, 2.0, 5.0};
    const auto h = cvar::make_histogram(xs, 0.0, 2.0, 2, false);
    CHECK(h.edges.size() == 3);
    CHECK(h.counts[0] == 3);
    CHECK(h.counts[1] == 2);
    const auto c = cvar::make_histogram(xs, 0.0, 2.0, 2, true);
    CHECK(c.counts[1] == 3);
    CHECK(cvar::histogram_to_csv(h).rfind("bin_lo,bin_hi,count\n", 0) == 0);
  }

  TEST_CASE("model text round trip") {
    const auto model = small_trained(cvar::Algorithm::kPgCvar, 2);
    const auto back = cvar::model_from_text(cvar::model_to_text(model));
    CHECK(back.theta == model.theta);
    CHECK(back.nu == model.nu);
    CHECK(back.lambda == model.lambda);
    CHECK(back.lambda_max == model.lambda_max);
    CHECK(back.iterations == model.iterations);
    CHECK(back.converged == model.converged);
    CHECK(back.config.to_text() == model.config.to_text());
    const auto csv = split(cvar::history_to_csv(model.history), '\n');
    CHECK(csv.front() == "iter,nu,lambda,theta_norm,mean_batch_loss");
    CHECK(csv.size() == model.history.size() + 1);
  }

  TEST_CASE("reports are reproducible across thread counts") {
    for (auto a : {cvar::Algorithm::kPgCvar, cvar::Algorithm::kAcCvarSpsa}) {
      const auto one = small_trained(a, 1);
      const auto many = small_trained(a, 5);
      CHECK(one.theta == many.theta);
      const auto r1 = cvar::evaluate_model(one);
      const auto r2 = cvar::evaluate_model(many);
      CHECK(cvar::report_to_text(r1) == cvar::report_to_text(r2));
      CHECK(cvar::losses_to_csv(r1) == cvar::losses_to_csv(r2));
      CHECK(cvar::histogram_to_csv(r1.histogram) == cvar::histogram_to_csv(r2.histogram));
      CHECK(cvar::histogram_to_csv(r1.tail_histogram) == cvar::histogram_to_csv(r2.tail_histogram));
    }
  }

  TEST_CASE("metrics recomputed from the loss csv match the report") {
    const auto model = small_trained(cvar::Algorithm::kPg, 3);
    const auto report = cvar::evaluate_model(model);
    const auto lines = split(cvar::losses_to_csv(report), '\n');
    REQUIRE(lines.front() == "episode,loss,T");
    std::vector<double> losses;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto fields = split(lines[i], ',');
      REQUIRE(fields.size() == 3);
      losses.push_back(std::stod(fields[1]));
      CHECK(std::stoul(fields[2]) <= model.config.env.horizon + 1);
    }
    REQUIRE(losses.size() == report.episodes);
    const auto m = cvar::compute_metrics(cvar::EmpiricalDistribution(losses), model.config.risk);
    CHECK(m.mean == report.metrics.mean);
    CHECK(m.variance == report.metrics.variance);
    CHECK(m.var == report.metrics.var);
    CHECK(m.cvar == report.metrics.cvar);
    CHECK(m.tail_prob == report.metrics.tail_prob);
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : cvar::parse_key_values(cvar::report_to_text(report))) kv[k] = v;
    CHECK(std::stod(kv["cvar_alpha"]) == report.metrics.cvar);
    CHECK(std::stod(kv["mean"]) == report.metrics.mean);
  }

  TEST_CASE("exact metrics agree with simulation") {
    const auto model = small_trained(cvar::Algorithm::kPg, 0);
    const auto exact = cvar::exact_metrics(model);
    const auto sim = cvar::evaluate_model(model, 20000);
    const double se = std::sqrt(exact.variance / 20000.0);
    CHECK(std::abs(sim.metrics.mean - exact.mean) <= 4.0 * se + 1e-12);
    auto big = model;
    big.config.env.horizon = 20;
    CHECK_THROWS_AS(cvar::exact_metrics(big), cvar::InputError);
  }

  TEST_CASE("compare") {
    const auto model = always_accept_model();
    const std::string text = cvar::report_to_text(cvar::evaluate_model(model));
    const std::string table = cvar::compare_reports({{"a", text}, {"b", text}});
    CHECK(table.find("deltas against PG") != std::string::npos);
    const auto lines = split(table, '\n');
    CHECK(lines.back().find("+0.000000") != std::string::npos);
    CHECK(lines.back().find('-') == std::string::npos);

    auto other = model;
    other.config.env.up_probability = 0.5;
    const std::string different = cvar::report_to_text(cvar::evaluate_model(other));
    CHECK_THROWS_AS(cvar::compare_reports({{"a", text}, {"b", different}}), cvar::InputError);
    CHECK_THROWS_AS(cvar::compare_reports({{"a", text}}), cvar::InputError);
  }

  TEST_CASE("files") {
    const auto dir = std::filesystem::temp_directory_path() / "cvar_harness_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    const std::string path = (dir / "x.txt").string();
    cvar::write_text_file(path, "hello\n");
    CHECK(cvar::read_text_file(path) == "hello\n");
    std::filesystem::remove_all(dir.parent_path());
    CHECK_THROWS_AS(cvar::read_text_file(path), cvar::InputError);
    CHECK(cvar::format_double(0.1) == "0.10000000000000001");
  }
}
