#ifndef PPREG_PIPELINE_HPP
#define PPREG_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppreg/core.hpp"
#include "ppreg/penalty.hpp"
#include "ppreg/quadrature.hpp"
#include "ppreg/solver.hpp"
#include "ppreg/study.hpp"

namespace ppreg {

// Everything needed to reuse a fit later (standard errors, surfaces).
struct FitRecord {
  FitResult fit;
  std::vector<std::string> names;  // one per design column, "(Intercept)" first
  bool has_intercept = true;
  PenaltySpec spec{PenaltyKind::lasso, 0.0};
  LikelihoodKind likelihood = LikelihoodKind::poisson;
  double delta = 0.0;  // logistic rate actually used
  std::string weights = "none";
  Window window{0.0, 1.0, 0.0, 1.0};
  nlohmann::json diagnostics = nlohmann::json::object();
  nlohmann::json config = nlohmann::json::object();
};

SolverConfig solver_config_from_json(const nlohmann::json& solver);
nlohmann::json to_json(const SolverConfig& config);

// Inputs follow the resolved fit/path config (see config_defaults).
QuadratureScheme scheme_from_config(const PointPattern& pattern, const CovariateStack& stack,
                                    const nlohmann::json& config);
FitRecord run_fit(const PointPattern& pattern, const CovariateStack& stack, const nlohmann::json& config);
nlohmann::json run_path(const PointPattern& pattern, const CovariateStack& stack,
                        const nlohmann::json& config);
// Input: a path document from run_path.
nlohmann::json select_from_path(const nlohmann::json& path_doc);
// Estimates, standard errors and z-values on the fit's support plus intercept.
nlohmann::json run_standard_errors(const FitRecord& fit, const CovariateStack& stack,
                                   const nlohmann::json& config);
// Fitted intensity at every covariate cell.
RasterGrid intensity_surface(const FitRecord& fit, const CovariateStack& stack);

PointPattern simulate_from_config(const CovariateStack& stack, const nlohmann::json& config,
                                  std::uint64_t seed);
StudyConfig study_config_from_json(const nlohmann::json& config, std::uint64_t seed, unsigned threads);

nlohmann::json to_json(const FitRecord& fit);
FitRecord fit_from_json(const nlohmann::json& doc);

}  // namespace ppreg

#endif  // PPREG_PIPELINE_HPP
