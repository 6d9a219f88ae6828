#include "ppreg/ppreg.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "ppreg/config.hpp"
#include "ppreg/error.hpp"
#include "ppreg/io.hpp"
#include "ppreg/pipeline.hpp"
#include "ppreg/study.hpp"

struct ppreg_pattern {
  ppreg::PointPattern value;
};

struct ppreg_covariates {
  ppreg::CovariateStack value;
};

struct ppreg_fit {
  ppreg::FitRecord value;
};

namespace {

thread_local std::string last_error;

ppreg_status fail(ppreg_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class F>
ppreg_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return PPREG_OK;
  } catch (const ppreg::Error& e) {
    return fail(static_cast<ppreg_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(PPREG_ERR_USAGE, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(PPREG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PPREG_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw ppreg::ParameterError(std::string(what) + " must not be NULL");
}

nlohmann::json parse_json(const char* text, const char* what) {
  require(text, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ppreg::ParameterError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

extern "C" {

const char* ppreg_version(void) { return "0.1.0"; }

const char* ppreg_last_error(void) { return last_error.c_str(); }

void ppreg_string_free(char* s) { std::free(s); }

ppreg_status ppreg_config_parse_toml(const char* text, char** out_json) {
  return guarded([&] {
    require(text, "text");
    require(out_json, "out_json");
    *out_json = dup_string(ppreg::parse_toml(text).dump());
  });
}

ppreg_status ppreg_config_resolve(const char* command, const char* user_json, char** out_json) {
  return guarded([&] {
    require(command, "command");
    require(out_json, "out_json");
    const nlohmann::json user = user_json ? parse_json(user_json, "user_json") : nlohmann::json(nullptr);
    *out_json = dup_string(ppreg::resolve_config(command, user).dump());
  });
}

ppreg_status ppreg_config_set(const char* config_json, const char* key, const char* value_text,
                              char** out_json) {
  return guarded([&] {
    require(key, "key");
    require(value_text, "value_text");
    require(out_json, "out_json");
    nlohmann::json config = config_json ? parse_json(config_json, "config_json") : nlohmann::json::object();
    if (!config.is_object()) throw ppreg::ParameterError("config_json must be an object");
    ppreg::set_dotted(config, key, value_text);
    *out_json = dup_string(config.dump());
  });
}

ppreg_status ppreg_covariates_load_dir(const char* dir, int mean_impute, ppreg_covariates** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    auto stack = ppreg::load_covariate_dir(
        dir, false, mean_impute ? ppreg::MissingPolicy::mean_impute : ppreg::MissingPolicy::reject);
    *out = new ppreg_covariates{std::move(stack)};
  });
}

ppreg_status ppreg_covariates_count(const ppreg_covariates* covs, size_t* out) {
  return guarded([&] {
    require(covs, "covs");
    require(out, "out");
    *out = covs->value.n_covariates();
  });
}

ppreg_status ppreg_covariates_window(const ppreg_covariates* covs, double window[4]) {
  return guarded([&] {
    require(covs, "covs");
    require(window, "window");
    const auto& w = covs->value.window();
    window[0] = w.x_min();
    window[1] = w.x_max();
    window[2] = w.y_min();
    window[3] = w.y_max();
  });
}

void ppreg_covariates_free(ppreg_covariates* covs) { delete covs; }

ppreg_status ppreg_pattern_read_csv(const char* path, const double window[4], ppreg_pattern** out) {
  return guarded([&] {
    require(path, "path");
    require(window, "window");
    require(out, "out");
    auto p = ppreg::read_points_csv(path, ppreg::Window(window[0], window[1], window[2], window[3]));
    *out = new ppreg_pattern{std::move(p)};
  });
}

ppreg_status ppreg_pattern_write_csv(const ppreg_pattern* pattern, const char* path) {
  return guarded([&] {
    require(pattern, "pattern");
    require(path, "path");
    ppreg::write_points_csv(pattern->value, path);
  });
}

ppreg_status ppreg_pattern_size(const ppreg_pattern* pattern, size_t* out) {
  return guarded([&] {
    require(pattern, "pattern");
    require(out, "out");
    *out = pattern->value.size();
  });
}

ppreg_status ppreg_pattern_point(const ppreg_pattern* pattern, size_t i, double* x, double* y) {
  return guarded([&] {
    require(pattern, "pattern");
    require(x, "x");
    require(y, "y");
    if (i >= pattern->value.size()) throw ppreg::ParameterError("point index out of range");
    *x = pattern->value.points()[i].x;
    *y = pattern->value.points()[i].y;
  });
}

void ppreg_pattern_free(ppreg_pattern* pattern) { delete pattern; }

ppreg_status ppreg_simulate(const ppreg_covariates* covs, const char* config_json, uint64_t seed,
                            ppreg_pattern** out) {
  return guarded([&] {
    require(covs, "covs");
    require(out, "out");
    const auto config = parse_json(config_json, "config_json");
    *out = new ppreg_pattern{ppreg::simulate_from_config(covs->value, config, seed)};
  });
}

ppreg_status ppreg_fit_run(const ppreg_pattern* pattern, const ppreg_covariates* covs,
                           const char* config_json, ppreg_fit** out) {
  return guarded([&] {
    require(pattern, "pattern");
    require(covs, "covs");
    require(out, "out");
    const auto config = parse_json(config_json, "config_json");
    *out = new ppreg_fit{ppreg::run_fit(pattern->value, covs->value, config)};
  });
}

ppreg_status ppreg_fit_to_json(const ppreg_fit* fit, char** out_json) {
  return guarded([&] {
    require(fit, "fit");
    require(out_json, "out_json");
    *out_json = dup_string(ppreg::to_json(fit->value).dump(2));
  });
}

ppreg_status ppreg_fit_from_json(const char* json, ppreg_fit** out) {
  return guarded([&] {
    require(out, "out");
    const auto doc = parse_json(json, "json");
    *out = new ppreg_fit{ppreg::fit_from_json(doc)};
  });
}

ppreg_status ppreg_fit_converged(const ppreg_fit* fit, int* out) {
  return guarded([&] {
    require(fit, "fit");
    require(out, "out");
    *out = fit->value.fit.converged ? 1 : 0;
  });
}

ppreg_status ppreg_fit_coefficients(const ppreg_fit* fit, double* beta, size_t capacity, size_t* n) {
  return guarded([&] {
    require(fit, "fit");
    require(n, "n");
    const auto& b = fit->value.fit.beta;
    *n = static_cast<size_t>(b.size());
    if (beta) {
      if (capacity < *n) throw ppreg::ParameterError("coefficient buffer too small");
      for (Eigen::Index i = 0; i < b.size(); ++i) beta[i] = b(i);
    }
  });
}

void ppreg_fit_free(ppreg_fit* fit) { delete fit; }

ppreg_status ppreg_path_run(const ppreg_pattern* pattern, const ppreg_covariates* covs,
                            const char* config_json, char** out_json) {
  return guarded([&] {
    require(pattern, "pattern");
    require(covs, "covs");
    require(out_json, "out_json");
    const auto config = parse_json(config_json, "config_json");
    *out_json = dup_string(ppreg::run_path(pattern->value, covs->value, config).dump(2));
  });
}

ppreg_status ppreg_select(const char* path_json, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    const auto doc = parse_json(path_json, "path_json");
    *out_json = dup_string(ppreg::select_from_path(doc).dump(2));
  });
}

ppreg_status ppreg_standard_errors(const ppreg_fit* fit, const ppreg_covariates* covs,
                                   const char* config_json, char** out_json) {
  return guarded([&] {
    require(fit, "fit");
    require(covs, "covs");
    require(out_json, "out_json");
    const auto config = parse_json(config_json, "config_json");
    *out_json = dup_string(ppreg::run_standard_errors(fit->value, covs->value, config).dump(2));
  });
}

ppreg_status ppreg_surface_write(const ppreg_fit* fit, const ppreg_covariates* covs, const char* path) {
  return guarded([&] {
    require(fit, "fit");
    require(covs, "covs");
    require(path, "path");
    if (!fit->value.fit.converged) throw ppreg::NumericalError("fit did not converge; no surface written");
    ppreg::write_ascii_grid(ppreg::intensity_surface(fit->value, covs->value), path);
  });
}

ppreg_status ppreg_study_run(const char* config_json, uint64_t seed, unsigned threads, char** out_csv,
                             char** out_summary_json) {
  return guarded([&] {
    require(out_csv, "out_csv");
    const auto config = parse_json(config_json, "config_json");
    const ppreg::StudyReport report =
        ppreg::run_study(ppreg::study_config_from_json(config, seed, threads ? threads : 1));
    *out_csv = dup_string(report.to_csv());
    if (out_summary_json) {
      nlohmann::json summary = {{"replicates", report.replicates},
                                {"mean_points", report.mean_points},
                                {"runtime_seconds", report.runtime_seconds}};
      *out_summary_json = dup_string(summary.dump(2));
    }
  });
}

}  // extern "C"
