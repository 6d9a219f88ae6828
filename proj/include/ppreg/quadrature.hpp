#ifndef PPREG_QUADRATURE_HPP
#define PPREG_QUADRATURE_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ppreg/core.hpp"

namespace ppreg {

// Berman-Turner quadrature: data points followed by dummy points, each with a
// positive weight v_i; the weights partition the window area.
class QuadratureScheme {
 public:
  // Validates the invariants: v_i > 0, sum v_i = |window| within
  // 1e-8 |window|, data flags consistent with n_data. Throws DataError.
  QuadratureScheme(std::vector<Point> points, std::size_t n_data, Eigen::VectorXd weights,
                   Eigen::MatrixXd design, Window window, bool has_intercept,
                   std::vector<std::string> covariate_names = {});

  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  std::size_t n_data() const { return n_data_; }
  std::size_t n_dummy() const { return points_.size() - n_data_; }
  bool is_data(std::size_t i) const { return i < n_data_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  // y_i = 1 / v_i for data points, 0 for dummy points.
  const Eigen::VectorXd& response() const { return response_; }
  // 1 for data points, 0 for dummy points.
  const Eigen::VectorXd& data_indicator() const { return indicator_; }
  const Eigen::MatrixXd& design() const { return design_; }
  const Window& window() const { return window_; }
  double area() const { return window_.area(); }
  bool has_intercept() const { return has_intercept_; }
  Eigen::Index dimension() const { return design_.cols(); }
  const std::vector<std::string>& covariate_names() const { return names_; }

 private:
  std::vector<Point> points_;
  std::size_t n_data_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd response_;
  Eigen::VectorXd indicator_;
  Eigen::MatrixXd design_;
  Window window_;
  bool has_intercept_;
  std::vector<std::string> names_;
};

// Dummy points at the centers of an n_dummy_x by n_dummy_y tiling; every
// point in a tile receives the counting weight tile_area / (1 + #data in tile).
QuadratureScheme build_scheme(const PointPattern& pattern, const CovariateStack& stack,
                              std::size_t n_dummy_x, std::size_t n_dummy_y);

// Covariate resolution capped at 201 x 101.
std::pair<std::size_t, std::size_t> default_dummy_grid(const CovariateStack& stack);

// Writes `x,y,is_data,weight,y,z1..zp` (the intercept column is omitted).
void write_scheme_csv(const QuadratureScheme& scheme, const std::filesystem::path& path);

enum class LikelihoodKind { poisson, logistic };

// Estimating-equation choice. The logistic variant carries the dummy-process
// rate delta_i at every quadrature point.
struct Likelihood {
  LikelihoodKind kind = LikelihoodKind::poisson;
  Eigen::VectorXd delta;

  static Likelihood poisson() { return {}; }
  static Likelihood logistic(Eigen::VectorXd delta);
  // Constant rate; rate <= 0 selects the default n_dummy / |window|.
  static Likelihood logistic(const QuadratureScheme& scheme, double rate = 0.0);
};

struct LikelihoodEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  // Negative second derivative of the per-point contribution w.r.t. the
  // linear predictor; the Hessian is -Z' diag(curvature) Z.
  Eigen::VectorXd curvature;
  // Points whose linear predictor was clamped to [-700, 700].
  std::size_t overflow = 0;
};

constexpr double kEtaClamp = 700.0;

// Unit weights for every quadrature point.
Eigen::VectorXd unit_weights(const QuadratureScheme& scheme);

// Per-point pieces at a given linear predictor: value, score (derivative of
// each contribution w.r.t. eta) and curvature. Used by the solver, which
// works on its own reparametrized design.
struct PointwiseEval {
  double value = 0.0;
  Eigen::VectorXd score;
  Eigen::VectorXd curvature;
  std::size_t overflow = 0;
};

PointwiseEval evaluate_pointwise(const QuadratureScheme& scheme, const Eigen::VectorXd& eta,
                                 const Eigen::VectorXd& w, const Likelihood& likelihood,
                                 bool with_derivatives = true);

LikelihoodEval evaluate_likelihood(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& w, const Likelihood& likelihood,
                                   bool with_derivatives = true);

// sum_i v_i w_i (y_i log rho_i - rho_i), with y_i log rho_i = 0 for dummy points.
double poisson_objective(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& w);
Eigen::VectorXd poisson_gradient(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& w);

// sum_data w_i log(rho_i / (delta_i + rho_i))
//   - sum_all v_i w_i delta_i log((rho_i + delta_i) / delta_i).
double logistic_objective(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& w, const Eigen::VectorXd& delta);
Eigen::VectorXd logistic_gradient(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                                  const Eigen::VectorXd& w, const Eigen::VectorXd& delta);

}  // namespace ppreg

#endif  // PPREG_QUADRATURE_HPP
