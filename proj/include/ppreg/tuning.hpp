#ifndef PPREG_TUNING_HPP
#define PPREG_TUNING_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ppreg/penalty.hpp"
#include "ppreg/quadrature.hpp"
#include "ppreg/solver.hpp"

namespace ppreg {

// -2 loglik + s log|D|. Throws ParameterError unless domain_area > 1.
double wqbic(double loglik, std::size_t s, double domain_area);

struct PathRecord {
  double lambda = 0.0;
  double loglik = 0.0;
  std::size_t s = 0;
  bool converged = true;
  double wqbic = 0.0;
};

struct PathSelection {
  std::vector<PathRecord> records;
  std::size_t chosen = 0;
};

// Recomputes wqbic for every record and picks the converged minimum; equal
// values go to the larger lambda. Throws NumericalError when no record
// converged and ParameterError on an empty path.
PathSelection select_lambda(std::vector<PathRecord> records, double domain_area);
// Evaluates the weighted log-likelihood of each fit on the scheme.
PathSelection select_lambda(const std::vector<FitResult>& path, const QuadratureScheme& scheme,
                            const Eigen::VectorXd& w, const Likelihood& likelihood);

struct AdaptiveFit {
  FitResult fit;
  Eigen::VectorXd ridge_beta;
  // lambda_j / lambda multipliers and which of them hit the 1e-10 floor.
  std::vector<double> multipliers;
  std::vector<bool> capped;
  PathSelection ridge_selection;
  PathSelection selection;
};

// Stage 1: ridge path with WQBIC selection. Stage 2: per-coordinate
// multipliers 1 / |ridge_j| and a path over the base lambda of base_kind
// (adaptive_lasso or adaptive_enet), again selected by WQBIC.
AdaptiveFit fit_adaptive(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                         const Likelihood& likelihood, PenaltyKind base_kind,
                         const SolverConfig& config = {},
                         std::optional<double> gamma = std::nullopt);

// Penalty path plus WQBIC choice for any kind; adaptive kinds go through
// fit_adaptive.
struct SelectedFit {
  FitResult fit;
  PathSelection selection;
  std::vector<double> multipliers;
};
SelectedFit fit_selected(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                         const Likelihood& likelihood, PenaltyKind kind,
                         const SolverConfig& config = {},
                         std::optional<double> gamma = std::nullopt);

}  // namespace ppreg

#endif  // PPREG_TUNING_HPP
