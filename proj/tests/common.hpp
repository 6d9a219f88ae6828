// Helpers shared by unit and acceptance tests: random small instances and a
// dense Newton-Raphson reference fit written independently of the solver.
#ifndef PPREG_TESTS_COMMON_HPP
#define PPREG_TESTS_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ppreg/core.hpp"
#include "ppreg/quadrature.hpp"
#include "ppreg/rng.hpp"
#include "ppreg/simulate.hpp"

namespace testutil {

inline ppreg::RasterGrid random_smooth_grid(std::size_t nc, std::size_t nr, const ppreg::Window& w,
                                            std::mt19937_64& gen, const std::string& name) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fx = 1.0 + 3.0 * u(gen), fy = 1.0 + 3.0 * u(gen), ph = 6.28 * u(gen);
  std::vector<double> v(nc * nr);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      const double x = (c + 0.5) / nc, y = (r + 0.5) / nr;
      v[r * nc + c] = std::sin(fx * x * 3.1 + ph) + std::cos(fy * y * 2.7) + 0.3 * (u(gen) - 0.5);
    }
  }
  return ppreg::RasterGrid(nc, nr, w, std::move(v), name);
}

struct Instance {
  ppreg::CovariateStack stack;
  Eigen::VectorXd beta_true;
  ppreg::PointPattern pattern;
  ppreg::QuadratureScheme scheme;
};

// p covariates (plus intercept), standardized, Poisson pattern with about
// `expected` points, and an nx x ny dummy grid.
inline Instance random_instance(std::uint64_t seed, std::size_t p, double expected = 400.0,
                                std::size_t nx = 30, std::size_t ny = 20) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ppreg::Window win(0.0, 100.0 + 50.0 * (u(gen) + 1.0), 0.0, 80.0 + 20.0 * (u(gen) + 1.0));
  std::vector<ppreg::RasterGrid> grids;
  for (std::size_t j = 0; j < p; ++j) {
    grids.push_back(random_smooth_grid(24, 16, win, gen, "x" + std::to_string(j + 1)));
  }
  ppreg::CovariateStack raw(std::move(grids), true);
  ppreg::CovariateStack stack = ppreg::standardize(raw).stack;
  Eigen::VectorXd rest(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < rest.size(); ++j) rest(j) = 0.6 * u(gen);
  Eigen::VectorXd beta(rest.size() + 1);
  beta(0) = ppreg::calibrate_intercept(stack, rest, expected);
  beta.tail(rest.size()) = rest;
  ppreg::IntensityModel model(stack, beta);
  ppreg::PointPattern pattern = ppreg::simulate_poisson(model, seed * 7919 + 1);
  ppreg::QuadratureScheme scheme = ppreg::build_scheme(pattern, stack, nx, ny);
  return Instance{std::move(stack), beta, std::move(pattern), std::move(scheme)};
}

// Log-likelihood, gradient and Hessian computed directly from the scheme's
// points, weights and design.
struct DenseEval {
  double value;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

inline DenseEval dense_eval(const ppreg::QuadratureScheme& s, const Eigen::VectorXd& beta,
                            bool logistic, double delta) {
  const auto& z = s.design();
  const auto& v = s.weights();
  DenseEval e{0.0, Eigen::VectorXd::Zero(beta.size()), Eigen::MatrixXd::Zero(beta.size(), beta.size())};
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Eigen::VectorXd zi = z.row(i).transpose();
    const double eta = zi.dot(beta);
    const double rho = std::exp(eta);
    const bool data = s.is_data(static_cast<std::size_t>(i));
    if (!logistic) {
      e.value += (data ? eta : 0.0) - v(i) * rho;
      e.grad += ((data ? 1.0 : 0.0) - v(i) * rho) * zi;
      e.hess -= v(i) * rho * zi * zi.transpose();
    } else {
      const double p = rho / (rho + delta);
      if (data) {
        e.value += std::log(p);
        e.grad += (1.0 - p) * zi;
        e.hess -= p * (1.0 - p) * zi * zi.transpose();
      }
      e.value -= v(i) * delta * std::log1p(rho / delta);
      e.grad -= v(i) * delta * p * zi;
      e.hess -= v(i) * delta * p * (1.0 - p) * zi * zi.transpose();
    }
  }
  return e;
}

// Damped Newton-Raphson to machine-level gradient.
inline Eigen::VectorXd newton_oracle(const ppreg::QuadratureScheme& s, bool logistic, double delta,
                                     Eigen::VectorXd beta) {
  for (int it = 0; it < 200; ++it) {
    const DenseEval e = dense_eval(s, beta, logistic, delta);
    const Eigen::VectorXd step = (-e.hess).ldlt().solve(e.grad);
    double t = 1.0;
    Eigen::VectorXd next = beta + step;
    while (dense_eval(s, next, logistic, delta).value < e.value - 1e-12 * std::abs(e.value) && t > 1e-10) {
      t *= 0.5;
      next = beta + t * step;
    }
    beta = next;
    if (step.cwiseAbs().maxCoeff() * t < 1e-13) break;
  }
  return beta;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ppreg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testutil

#endif
