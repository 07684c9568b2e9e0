#include "cvar/cvar_mdp.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "cvar/errors.hpp"
#include "cvar/harness.hpp"
#include "cvar/risk.hpp"

struct cvar_config {
  cvar::ExperimentConfig config;
};

struct cvar_model {
  cvar::TrainedModel model;
};

struct cvar_report {
  cvar::EvaluationReport report;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
cvar_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const cvar::ConfigError& e) {
    g_last_error = e.what();
    return CVAR_ERR_CONFIG;
  } catch (const cvar::InputError& e) {
    g_last_error = e.what();
    return CVAR_ERR_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CVAR_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CVAR_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return CVAR_ERR_RUNTIME;
  }
}

cvar_status null_argument(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return CVAR_ERR_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

cvar::EmpiricalDistribution make_dist(const double* samples, const double* weights, size_t n) {
  if (!samples && n > 0) throw cvar::InputError("samples must not be NULL");
  std::vector<double> xs(samples, samples + n);
  if (!weights) return cvar::EmpiricalDistribution(std::move(xs));
  return cvar::EmpiricalDistribution(std::move(xs), std::vector<double>(weights, weights + n));
}

void fill_metrics(const cvar::Metrics& m, cvar_metrics* out) {
  out->mean = m.mean;
  out->variance = m.variance;
  out->var_alpha = m.var;
  out->cvar_alpha = m.cvar;
  out->tail_prob_beta = m.tail_prob;
}

std::string join(const char* dir, const char* file) { return (std::filesystem::path(dir) / file).string(); }

}  // namespace

extern "C" {

const char* cvar_last_error(void) { return g_last_error.c_str(); }

const char* cvar_version(void) { return "1.0.0"; }

cvar_status cvar_config_load_file(const char* path, cvar_config** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new cvar_config{cvar::load_config_file(path)};
    return CVAR_OK;
  });
}

cvar_status cvar_config_load_string(const char* text, cvar_config** out) {
  if (!text) return null_argument("text");
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new cvar_config{cvar::parse_config(text)};
    return CVAR_OK;
  });
}

cvar_status cvar_config_set(cvar_config* config, const char* key, const char* value) {
  if (!config) return null_argument("config");
  if (!key || !value) return null_argument("key/value");
  return guarded([&] {
    config->config = cvar::parse_config(config->config.to_text(), {{key, value}});
    return CVAR_OK;
  });
}

cvar_status cvar_config_to_string(const cvar_config* config, char** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = copy_string(config->config.to_text());
    return CVAR_OK;
  });
}

void cvar_config_free(cvar_config* config) { delete config; }

cvar_status cvar_train(const cvar_config* config, cvar_model** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto model = std::make_unique<cvar_model>(cvar_model{cvar::train_model(config->config)});
    const bool converged = model->model.converged;
    *out = model.release();
    return converged ? CVAR_OK : CVAR_NOT_CONVERGED;
  });
}

cvar_status cvar_model_save(const cvar_model* model, const char* dir) {
  if (!model) return null_argument("model");
  if (!dir) return null_argument("dir");
  return guarded([&] {
    cvar::write_text_file(join(dir, "model.txt"), cvar::model_to_text(model->model));
    if (!model->model.history.empty()) {
      cvar::write_text_file(join(dir, "history.csv"), cvar::history_to_csv(model->model.history));
    }
    return CVAR_OK;
  });
}

cvar_status cvar_model_load(const char* path, cvar_model** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    std::string text;
    try {
      text = cvar::read_text_file(path);
    } catch (const cvar::InputError& e) {
      throw cvar::ConfigError(e.what());
    }
    *out = new cvar_model{cvar::model_from_text(text)};
    return CVAR_OK;
  });
}

cvar_status cvar_model_info_get(const cvar_model* model, cvar_model_info* out) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  const cvar::TrainedModel& m = model->model;
  *out = {m.nu, m.lambda, m.lambda_max, m.iterations, m.doublings, static_cast<size_t>(m.theta.size()),
          m.converged ? 1 : 0};
  return CVAR_OK;
}

cvar_status cvar_model_theta(const cvar_model* model, double* theta, size_t n) {
  if (!model) return null_argument("model");
  if (!theta && n > 0) return null_argument("theta");
  const auto& t = model->model.theta;
  const size_t count = std::min(n, static_cast<size_t>(t.size()));
  for (size_t j = 0; j < count; ++j) theta[j] = t[static_cast<Eigen::Index>(j)];
  return CVAR_OK;
}

void cvar_model_free(cvar_model* model) { delete model; }

cvar_status cvar_evaluate(const cvar_model* model, size_t episodes, int has_seed, uint64_t seed,
                          cvar_report** out) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  return guarded([&] {
    cvar::TrainedModel m = model->model;
    if (has_seed) m.config.seed = seed;
    std::optional<std::size_t> n;
    if (episodes > 0) n = episodes;
    *out = new cvar_report{cvar::evaluate_model(m, n)};
    return CVAR_OK;
  });
}

cvar_status cvar_report_save(const cvar_report* report, const char* dir) {
  if (!report) return null_argument("report");
  if (!dir) return null_argument("dir");
  return guarded([&] {
    const cvar::EvaluationReport& r = report->report;
    cvar::write_text_file(join(dir, "report.txt"), cvar::report_to_text(r));
    cvar::write_text_file(join(dir, "losses.csv"), cvar::losses_to_csv(r));
    cvar::write_text_file(join(dir, "histogram.csv"), cvar::histogram_to_csv(r.histogram));
    cvar::write_text_file(join(dir, "histogram_tail.csv"), cvar::histogram_to_csv(r.tail_histogram));
    return CVAR_OK;
  });
}

cvar_status cvar_report_metrics(const cvar_report* report, cvar_metrics* out) {
  if (!report) return null_argument("report");
  if (!out) return null_argument("out");
  fill_metrics(report->report.metrics, out);
  return CVAR_OK;
}

cvar_status cvar_report_losses(const cvar_report* report, const double** losses, size_t* n) {
  if (!report) return null_argument("report");
  if (!losses || !n) return null_argument("losses/n");
  *losses = report->report.losses.data();
  *n = report->report.losses.size();
  return CVAR_OK;
}

void cvar_report_free(cvar_report* report) { delete report; }

cvar_status cvar_enumerate_oracle(const cvar_model* model, cvar_metrics* out) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  return guarded([&] {
    fill_metrics(cvar::exact_metrics(model->model), out);
    return CVAR_OK;
  });
}

cvar_status cvar_compare(const char* const* report_paths, size_t count, char** table) {
  if (!report_paths && count > 0) return null_argument("report_paths");
  if (!table) return null_argument("table");
  return guarded([&] {
    std::vector<std::pair<std::string, std::string>> reports;
    for (size_t i = 0; i < count; ++i) {
      if (!report_paths[i]) throw cvar::InputError("report path must not be NULL");
      reports.emplace_back(report_paths[i], cvar::read_text_file(report_paths[i]));
    }
    *table = copy_string(cvar::compare_reports(reports));
    return CVAR_OK;
  });
}

void cvar_string_free(char* s) { std::free(s); }

cvar_status cvar_value_at_risk(const double* samples, const double* weights, size_t n, double alpha, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = cvar::value_at_risk(make_dist(samples, weights, n), alpha);
    return CVAR_OK;
  });
}

cvar_status cvar_conditional_value_at_risk(const double* samples, const double* weights, size_t n, double alpha,
                                           double* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = cvar::cvar(make_dist(samples, weights, n), alpha);
    return CVAR_OK;
  });
}

cvar_status cvar_h_alpha(const double* samples, const double* weights, size_t n, double nu, double alpha,
                         double* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = cvar::h_alpha(make_dist(samples, weights, n), nu, alpha);
    return CVAR_OK;
  });
}

cvar_status cvar_tail_probability(const double* samples, const double* weights, size_t n, double threshold,
                                  double* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = cvar::tail_probability(make_dist(samples, weights, n), threshold);
    return CVAR_OK;
  });
}

}  // extern "C"
