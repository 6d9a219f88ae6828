#ifndef PPREG_SOLVER_HPP
#define PPREG_SOLVER_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ppreg/penalty.hpp"
#include "ppreg/quadrature.hpp"
#include "ppreg/simulate.hpp"

namespace ppreg {

struct LambdaPathConfig {
  std::size_t n_lambda = 100;
  double lambda_min_ratio = 1e-4;
};

struct SolverConfig {
  double tol = 1e-7;
  int max_outer = 100;
  int max_inner = 1000;
  LambdaPathConfig lambda_path;
  bool penalize_intercept = false;
  bool standardize_internally = true;

  // Throws ParameterError.
  void validate() const;
};

struct FitResult {
  // Original covariate scale, one entry per design column.
  Eigen::VectorXd beta;
  // Design indices of nonzero penalized coefficients (intercept excluded
  // unless it is penalized).
  std::vector<std::size_t> support;
  double objective = 0.0;  // Q = loglik - |D| sum_j p(|beta_j|)
  double loglik = 0.0;
  double lambda = 0.0;
  int n_outer = 0;
  long n_inner = 0;
  bool converged = false;
  std::size_t overflow_warnings = 0;
  double kkt = 0.0;
};

// Maximizes loglik(w; beta) - |D| sum_j p_{lambda_j}(|beta_j|) by IRLS outer
// steps with cyclic coordinate descent on each quadratic model. The step is
// halved until the objective does not decrease. A non-finite iterate or
// |beta| > 1e6 raises NumericalError (divergence); running out of
// iterations returns converged = false.
FitResult fit_penalized(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                        const Likelihood& likelihood, const PenaltySpec& spec,
                        const SolverConfig& config = {},
                        const std::optional<Eigen::VectorXd>& start = std::nullopt);

// Largest violation of the first-order conditions at beta (see fit_penalized
// for the objective); unpenalized coordinates need a zero gradient.
double kkt_residual(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                    const Likelihood& likelihood, const PenaltySpec& spec,
                    const Eigen::VectorXd& beta, bool penalize_intercept = false);

// Unpenalized fit with every penalized coefficient held at zero.
FitResult null_fit(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                   const Likelihood& likelihood, const SolverConfig& config = {});

// Smallest base lambda whose null fit satisfies the zero-subgradient
// condition for every penalized coordinate. Ridge has no such lambda; it
// gets the lasso value divided by 1e-3.
double lambda_max(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                  const Likelihood& likelihood, const PenaltySpec& spec_template,
                  const SolverConfig& config = {});

// n_lambda log-spaced base lambdas from lambda_max down to
// lambda_max * lambda_min_ratio, each fit warm-started from the previous one.
// spec_template supplies kind, gamma and multipliers.
std::vector<FitResult> lambda_path(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                                   const Likelihood& likelihood, const PenaltySpec& spec_template,
                                   const SolverConfig& config = {});
std::vector<double> lambda_grid(double lambda_max, const LambdaPathConfig& config);

// w(u) = 1 / (1 + rho(u) * 2 pi int_0^R (g(r) - 1) r dr) at every quadrature
// point, with rho given per point.
Eigen::VectorXd compute_wpl_weights(const Eigen::VectorXd& rho, const PairCorrelation& g,
                                    double radius);
Eigen::VectorXd compute_wpl_weights(const QuadratureScheme& scheme, const IntensityModel& model,
                                    const PairCorrelation& g, double radius);
// Intensity exp(z' beta) at every quadrature point.
Eigen::VectorXd fitted_intensity(const QuadratureScheme& scheme, const Eigen::VectorXd& beta);

}  // namespace ppreg

#endif  // PPREG_SOLVER_HPP
