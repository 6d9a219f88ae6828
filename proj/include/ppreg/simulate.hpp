#ifndef PPREG_SIMULATE_HPP
#define PPREG_SIMULATE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ppreg/core.hpp"
#include "ppreg/rng.hpp"

namespace ppreg {

// Thomas cluster process: Poisson(kappa) parents, Poisson(mu) offspring per
// parent displaced by isotropic N(0, omega^2 I).
struct ThomasParams {
  double kappa = 0.0;
  double omega = 0.0;
  double mu = 0.0;

  // Throws ParameterError unless all three are positive and finite.
  void validate() const;
};

// Log-linear intensity rho(u) = exp(z(u)' beta) on a covariate stack. The
// per-cell intensities are computed once at construction.
class IntensityModel {
 public:
  IntensityModel(CovariateStack stack, Eigen::VectorXd beta);

  const CovariateStack& stack() const { return stack_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const std::vector<double>& cell_intensity() const { return cell_rho_; }
  double intensity(Point u) const { return cell_rho_[stack_.geometry().cell_index(u)]; }
  double max_intensity() const { return rho_max_; }
  // Integral of rho over the window (exact for piecewise-constant covariates).
  double expected_count() const;

 private:
  CovariateStack stack_;
  Eigen::VectorXd beta_;
  std::vector<double> cell_rho_;
  double rho_max_ = 0.0;
};

// Intercept that makes the integral of exp(beta0 + z(u)'beta_rest) equal to
// target_count; beta_rest excludes the intercept. The stack must carry an
// intercept column.
double calibrate_intercept(const CovariateStack& stack, const Eigen::VectorXd& beta_rest,
                           double target_count);

// Inhomogeneous Poisson process by thinning a dominating homogeneous process.
PointPattern simulate_poisson(const IntensityModel& model, Rng& rng);
PointPattern simulate_poisson(const IntensityModel& model, std::uint64_t seed);

// Thomas process with log-linear inhomogeneity imposed by independent
// thinning. Parents live on the window dilated by 4 omega. The offspring
// mean actually used is max_intensity / kappa, so the unthinned process has
// stationary intensity equal to the model maximum; params.mu must still be
// valid and is only checked.
PointPattern simulate_thomas(const IntensityModel& model, const ThomasParams& params, Rng& rng);
PointPattern simulate_thomas(const IntensityModel& model, const ThomasParams& params,
                             std::uint64_t seed);

// g(r) = 1 + exp(-r^2 / (4 omega^2)) / (4 pi kappa omega^2).
double thomas_pair_correlation(const ThomasParams& params, double r);

// Pair correlation function g(u, v). Isotropic models depend on |u - v| only.
class PairCorrelation {
 public:
  static PairCorrelation poisson();
  static PairCorrelation thomas(const ThomasParams& params);
  static PairCorrelation isotropic(std::function<double(double)> g);
  static PairCorrelation general(std::function<double(Point, Point)> g);

  bool is_isotropic() const { return static_cast<bool>(radial_); }
  bool is_poisson() const { return poisson_; }
  double operator()(double r) const;
  double operator()(Point u, Point v) const;

  // 2 pi * integral_0^R (g(r) - 1) r dr by adaptive Simpson quadrature;
  // R may be +infinity. Isotropic models only.
  double excess_integral(double radius) const;

 private:
  PairCorrelation() = default;
  std::function<double(double)> radial_;
  std::function<double(Point, Point)> general_;
  bool poisson_ = false;
};

}  // namespace ppreg

#endif  // PPREG_SIMULATE_HPP
