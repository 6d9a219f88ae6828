#ifndef PPREG_INFERENCE_HPP
#define PPREG_INFERENCE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppreg/core.hpp"
#include "ppreg/penalty.hpp"
#include "ppreg/quadrature.hpp"
#include "ppreg/simulate.hpp"

namespace ppreg {

// A = int w z z' rho, B = int w^2 z z' rho,
// C = int int w(u) w(v) z(u) z(v)' (g(u, v) - 1) rho(u) rho(v),
// restricted to the design indices in `indices` (rows/columns follow that order).
struct SandwichMatrices {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::MatrixXd c;
  std::vector<std::size_t> indices;
};

struct SandwichOptions {
  // Weight at every covariate cell center; empty means w = 1.
  Eigen::VectorXd cell_weights;
  LikelihoodKind likelihood = LikelihoodKind::poisson;
  // Logistic dummy rate; w is replaced by w delta / (rho + delta).
  double delta = 0.0;
  // Design indices to keep; empty keeps every column.
  std::vector<std::size_t> indices;
  // Sub-points per cell side used to average g - 1 over a cell pair.
  int kernel_subsamples = 4;
  // Cell-pair separation range for the isotropic kernel; 0 picks the range
  // where |g - 1| falls below 1e-10 (g(0) - 1).
  double radius = 0.0;
  // Non-isotropic g is only supported by the full double sum on grids with
  // at most this many cells.
  std::size_t full_sum_max_cells = 64 * 64;
};

// Grid quadrature over the covariate cells. Isotropic g uses a kernel over
// cell offsets, exact up to sub-sampling; other g fall back to the full
// double sum over cell centers, or UnsupportedError on large grids.
SandwichMatrices compute_abc(const CovariateStack& stack, const Eigen::VectorXd& beta,
                             const PairCorrelation& g, const SandwichOptions& options = {});

struct CovarianceEstimate {
  // |D| (A11 + |D| Pi)^{-1} (B11 + C11) (A11 + |D| Pi)^{-1}
  Eigen::MatrixXd sigma;
  // Penalty second derivatives at |beta_hat_j| (0 for unpenalized entries).
  Eigen::VectorXd pi;
  std::vector<std::size_t> support;
  // sqrt(sigma_jj / |D|)
  Eigen::VectorXd standard_errors;
  double condition_number = 0.0;
};

constexpr double kMaxConditionNumber = 1e12;

// first_penalized: design index of the first penalized coefficient (1 with an
// unpenalized intercept). Throws NumericalError naming the covariates that
// span the near-null space when A11 + |D| Pi is singular.
CovarianceEstimate compute_sigma(const SandwichMatrices& mats, const PenaltySpec& spec,
                                 const Eigen::VectorXd& beta_hat, double domain_area,
                                 std::size_t first_penalized,
                                 const std::vector<std::string>& names = {});

}  // namespace ppreg

#endif  // PPREG_INFERENCE_HPP
