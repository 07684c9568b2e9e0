#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cvar/cvar_mdp.h"

namespace {

int exit_code(cvar_status s) { return s == CVAR_ERR_ARGUMENT ? CVAR_ERR_CONFIG : static_cast<int>(s); }

int fail(cvar_status s, const char* what) {
  std::fprintf(stderr, "cvar-mdp: %s: %s\n", what, cvar_last_error());
  return exit_code(s);
}

void print_metrics(const char* label, const cvar_metrics& m) {
  std::printf("%s mean=%.6f variance=%.6f var=%.6f cvar=%.6f tail_prob=%.6f\n", label, m.mean, m.variance,
              m.var_alpha, m.cvar_alpha, m.tail_prob_beta);
}

std::string model_path(const std::string& explicit_path, const std::string& out_dir) {
  if (!explicit_path.empty()) return explicit_path;
  return (std::filesystem::path(out_dir) / "model.txt").string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-CVaR policy optimization on MDPs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::string algorithm;
  std::size_t eval_episodes = 0;
  std::string model_file;
  std::vector<std::string> reports;

  auto* train = app.add_subcommand("train", "Train a policy and write model.txt and history.csv");
  train->add_option("--config", config_path, "Experiment config file")->required();
  train->add_option("--seed", seed, "Master seed (overrides the config)");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--algorithm", algorithm, "PG, PG_CVAR, AC, AC_CVAR_SPSA, AC_CVAR_SEMI or AC_CVAR_ALT");
  train->add_option("--eval-episodes", eval_episodes, "Evaluation episodes stored with the model");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained model and write the report files");
  eval->add_option("--model", model_file, "Model file (default: OUT/model.txt)");
  eval->add_option("--config", model_file, "Alias of --model");
  eval->add_option("--seed", seed, "Evaluation seed (default: the model's seed)");
  eval->add_option("--out", out_dir, "Output directory");
  eval->add_option("--eval-episodes", eval_episodes, "Number of evaluation episodes");

  auto* compare = app.add_subcommand("compare", "Compare report.txt files against the first one");
  compare->add_option("reports", reports, "Report files")->required()->expected(2, -1);
  std::string compare_out;
  compare->add_option("--out", compare_out, "Also write the table to this file");

  auto* oracle = app.add_subcommand("enumerate-oracle", "Exact loss metrics of a model by path enumeration");
  oracle->add_option("--model", model_file, "Model file (default: OUT/model.txt)");
  oracle->add_option("--out", out_dir, "Directory holding model.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : CVAR_ERR_CONFIG;
  }

  if (train->parsed()) {
    cvar_config* config = nullptr;
    cvar_status s = cvar_config_load_file(config_path.c_str(), &config);
    if (s != CVAR_OK) return fail(s, "config");
    const std::string seed_text = seed ? std::to_string(*seed) : std::string();
    const std::string episodes_text = std::to_string(eval_episodes);
    if (!algorithm.empty() && (s = cvar_config_set(config, "algorithm", algorithm.c_str())) != CVAR_OK) {
      cvar_config_free(config);
      return fail(s, "config");
    }
    if (seed && (s = cvar_config_set(config, "seed", seed_text.c_str())) != CVAR_OK) {
      cvar_config_free(config);
      return fail(s, "config");
    }
    if (eval_episodes > 0 && (s = cvar_config_set(config, "eval.episodes", episodes_text.c_str())) != CVAR_OK) {
      cvar_config_free(config);
      return fail(s, "config");
    }
    cvar_model* model = nullptr;
    const cvar_status trained = cvar_train(config, &model);
    cvar_config_free(config);
    if (trained != CVAR_OK && trained != CVAR_NOT_CONVERGED) return fail(trained, "train");
    s = cvar_model_save(model, out_dir.c_str());
    cvar_model_info info{};
    cvar_model_info_get(model, &info);
    cvar_model_free(model);
    if (s != CVAR_OK) return fail(s, "save");
    std::printf("iterations=%zu nu=%.6f lambda=%.6f lambda_max=%.6g converged=%d\n", info.iterations, info.nu,
                info.lambda, info.lambda_max, info.converged);
    if (trained == CVAR_NOT_CONVERGED) std::fprintf(stderr, "cvar-mdp: training did not converge\n");
    return exit_code(trained);
  }

  if (eval->parsed()) {
    cvar_model* model = nullptr;
    cvar_status s = cvar_model_load(model_path(model_file, out_dir).c_str(), &model);
    if (s != CVAR_OK) return fail(s, "model");
    cvar_model_info info{};
    cvar_model_info_get(model, &info);
    cvar_report* report = nullptr;
    s = cvar_evaluate(model, eval_episodes, seed ? 1 : 0, seed.value_or(0), &report);
    cvar_model_free(model);
    if (s != CVAR_OK) return fail(s, "eval");
    s = cvar_report_save(report, out_dir.c_str());
    cvar_metrics m{};
    cvar_report_metrics(report, &m);
    cvar_report_free(report);
    if (s != CVAR_OK) return fail(s, "save");
    print_metrics("eval", m);
    return info.converged ? 0 : CVAR_NOT_CONVERGED;
  }

  if (compare->parsed()) {
    std::vector<const char*> paths;
    for (const auto& r : reports) paths.push_back(r.c_str());
    char* table = nullptr;
    const cvar_status s = cvar_compare(paths.data(), paths.size(), &table);
    if (s != CVAR_OK) return fail(s, "compare");
    std::fputs(table, stdout);
    int code = 0;
    if (!compare_out.empty()) {
      if (FILE* f = std::fopen(compare_out.c_str(), "wb")) {
        std::fputs(table, f);
        std::fclose(f);
      } else {
        std::fprintf(stderr, "cvar-mdp: cannot write %s\n", compare_out.c_str());
        code = CVAR_ERR_RUNTIME;
      }
    }
    cvar_string_free(table);
    return code;
  }

  if (oracle->parsed()) {
    cvar_model* model = nullptr;
    cvar_status s = cvar_model_load(model_path(model_file, out_dir).c_str(), &model);
    if (s != CVAR_OK) return fail(s, "model");
    cvar_metrics m{};
    s = cvar_enumerate_oracle(model, &m);
    cvar_model_free(model);
    if (s != CVAR_OK) return fail(s, "enumerate-oracle");
    print_metrics("exact", m);
    return 0;
  }
  return 0;
}
