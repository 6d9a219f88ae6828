#ifndef PPREG_STUDY_HPP
#define PPREG_STUDY_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppreg/core.hpp"
#include "ppreg/penalty.hpp"
#include "ppreg/quadrature.hpp"
#include "ppreg/simulate.hpp"
#include "ppreg/solver.hpp"

namespace ppreg {

enum class ExtraSource { gaussian_white_noise, real_grids };

std::string to_string(ExtraSource source);
ExtraSource extra_source_from_string(const std::string& name);

// One simulation scenario. The leading beta_true.size() covariates are the
// true ones: synthetic elevation and its gradient magnitude, then smooth
// soil-like fields generated on a 50 x 25 grid and resampled.
struct ScenarioSpec {
  std::string name = "1a";
  std::size_t n_covariates = 50;
  std::vector<double> beta_true = {2.0, 0.75};
  ExtraSource extras = ExtraSource::gaussian_white_noise;
  // Directory of extra covariate grids for ExtraSource::real_grids.
  std::filesystem::path grid_dir;
  // Omega_ij = collinearity^|i-j|, zero between distinct true covariates.
  double collinearity = 0.7;
  std::size_t grid_cols = 101;
  std::size_t grid_rows = 51;
  Window window{0.0, 1000.0, 0.0, 500.0};
  double omega = 20.0;
  double target_count = 1600.0;
  std::size_t replicates = 100;
  // WPL truncation radius; 0 means 4 omega.
  double wpl_radius = 0.0;

  // Throws ParameterError.
  void validate() const;
};

struct Scenario {
  CovariateStack stack;
  // Intercept first, then p coefficients.
  Eigen::VectorXd beta0;
  IntensityModel model;
  Eigen::MatrixXd omega_matrix;
};

// Omega for the scenario; throws ParameterError when it is not positive definite.
Eigen::MatrixXd collinearity_matrix(const ScenarioSpec& spec);

// Raw fields x, z = L x with Omega = L L' (white-noise extras only), column
// standardization, and an intercept giving target_count expected points.
Scenario build_scenario(const ScenarioSpec& spec, std::uint64_t seed);

struct SelectionMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double ppv = 0.0;
};

// Supports hold 1-based covariate numbers in 1..p. Percentages; PPV is 0
// for an empty estimated support.
SelectionMetrics selection_metrics(const std::vector<std::size_t>& true_support,
                                   const std::vector<std::size_t>& estimated_support, std::size_t p);

struct PredictionMetrics {
  double bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
};

// Rows are replicates, columns the p non-intercept coefficients. Variances
// divide by the replicate count so RMSE^2 = Bias^2 + SD^2.
PredictionMetrics prediction_metrics(const Eigen::MatrixXd& replicate_betas,
                                     const Eigen::VectorXd& beta0);

struct MethodSpec {
  std::string label;
  PenaltyKind penalty = PenaltyKind::adaptive_lasso;
  std::optional<double> gamma;
  LikelihoodKind likelihood = LikelihoodKind::poisson;
  bool wpl = false;
};

struct StudyConfig {
  ScenarioSpec scenario;
  std::vector<double> kappas = {5e-4};
  std::vector<MethodSpec> methods;
  SolverConfig solver;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct StudyRow {
  std::string method;
  std::string penalty;
  std::string likelihood;
  std::string weights;
  double kappa = 0.0;
  SelectionMetrics selection;
  PredictionMetrics prediction;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::size_t replicates = 0;
  // Mean simulated point count per kappa, same order as the config.
  std::vector<double> mean_points;
  // Wall clock; kept out of the CSV so reports stay reproducible.
  double runtime_seconds = 0.0;

  std::string to_csv() const;
};

// Replicates run on up to `threads` workers; every replicate draws from its
// own split of the master seed and results are reduced in replicate order,
// so the report does not depend on the worker count.
StudyReport run_study(const StudyConfig& config);

}  // namespace ppreg

#endif  // PPREG_STUDY_HPP
