#include "ppreg/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ppreg/error.hpp"

namespace ppreg {

QuadratureScheme::QuadratureScheme(std::vector<Point> points, std::size_t n_data,
                                   Eigen::VectorXd weights, Eigen::MatrixXd design, Window window,
                                   bool has_intercept, std::vector<std::string> covariate_names)
    : points_(std::move(points)), n_data_(n_data), weights_(std::move(weights)),
      design_(std::move(design)), window_(window), has_intercept_(has_intercept),
      names_(std::move(covariate_names)) {
  const auto n = static_cast<Eigen::Index>(points_.size());
  if (n_data_ > points_.size()) throw DataError("scheme has more data points than points");
  if (weights_.size() != n || design_.rows() != n) {
    throw DataError("scheme weights/design do not match the number of quadrature points");
  }
  if (n == 0) throw DataError("empty quadrature scheme");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights_(i) > 0.0) || !std::isfinite(weights_(i))) {
      std::ostringstream msg;
      msg << "quadrature weight " << i << " is not positive (" << weights_(i) << ")";
      throw DataError(msg.str());
    }
  }
  const double total = weights_.sum();
  if (std::abs(total - window_.area()) > 1e-8 * window_.area()) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "quadrature weights sum to " << total << " but the window area is " << window_.area();
    throw DataError(msg.str());
  }
  if (!design_.allFinite()) throw DataError("scheme design matrix has non-finite entries");
  response_ = Eigen::VectorXd::Zero(n);
  indicator_ = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < n_data_; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    response_(k) = 1.0 / weights_(k);
    indicator_(k) = 1.0;
  }
}

QuadratureScheme build_scheme(const PointPattern& pattern, const CovariateStack& stack,
                              std::size_t n_dummy_x, std::size_t n_dummy_y) {
  if (n_dummy_x == 0 || n_dummy_y == 0) throw ParameterError("dummy grid dimensions must be positive");
  if (!same_window(pattern.window(), stack.window())) {
    throw DataError("point pattern window does not match the covariate window");
  }
  const Window& win = stack.window();
  const RasterGrid tiles(n_dummy_x, n_dummy_y, win, std::vector<double>(n_dummy_x * n_dummy_y, 0.0),
                         "tiles");
  const std::size_t n_tiles = tiles.n_cells();
  std::vector<std::size_t> count(n_tiles, 0);
  std::vector<std::size_t> data_tile(pattern.size());
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    data_tile[i] = tiles.cell_index(pattern.points()[i]);
    ++count[data_tile[i]];
  }
  const std::size_t n = pattern.size() + n_tiles;
  std::vector<Point> points;
  points.reserve(n);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  const double tile_area = tiles.cell_area();
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    points.push_back(pattern.points()[i]);
    v(static_cast<Eigen::Index>(i)) = tile_area / static_cast<double>(1 + count[data_tile[i]]);
  }
  for (std::size_t t = 0; t < n_tiles; ++t) {
    points.push_back(tiles.cell_center(t));
    v(static_cast<Eigen::Index>(pattern.size() + t)) = tile_area / static_cast<double>(1 + count[t]);
  }
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(stack.dimension()));
  for (std::size_t i = 0; i < n; ++i) z.row(static_cast<Eigen::Index>(i)) = stack.evaluate(points[i]);
  return QuadratureScheme(std::move(points), pattern.size(), std::move(v), std::move(z), win,
                          stack.includes_intercept(), stack.names());
}

std::pair<std::size_t, std::size_t> default_dummy_grid(const CovariateStack& stack) {
  return {std::min<std::size_t>(stack.n_cols(), 201), std::min<std::size_t>(stack.n_rows(), 101)};
}

void write_scheme_csv(const QuadratureScheme& scheme, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  const Eigen::Index first = scheme.has_intercept() ? 1 : 0;
  out << "x,y,is_data,weight,y";
  for (Eigen::Index j = first; j < scheme.dimension(); ++j) out << ",z" << (j - first + 1);
  out << "\n";
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << scheme.points()[i].x << "," << scheme.points()[i].y << ","
        << (scheme.is_data(i) ? 1 : 0) << "," << scheme.weights()(k) << ","
        << scheme.response()(k);
    for (Eigen::Index j = first; j < scheme.dimension(); ++j) out << "," << scheme.design()(k, j);
    out << "\n";
  }
}

Likelihood Likelihood::logistic(Eigen::VectorXd delta) {
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    if (!(delta(i) > 0.0) || !std::isfinite(delta(i))) {
      throw ParameterError("logistic dummy rate delta must be positive and finite");
    }
  }
  return {LikelihoodKind::logistic, std::move(delta)};
}

Likelihood Likelihood::logistic(const QuadratureScheme& scheme, double rate) {
  if (!(rate > 0.0)) rate = static_cast<double>(std::max<std::size_t>(scheme.n_dummy(), 1)) / scheme.area();
  return logistic(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(scheme.size()), rate));
}

Eigen::VectorXd unit_weights(const QuadratureScheme& scheme) {
  return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(scheme.size()));
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// 1 / (1 + exp(-x)).
double logistic_fn(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_inputs(const QuadratureScheme& scheme, const Eigen::VectorXd& beta, const Eigen::VectorXd& w) {
  if (beta.size() != scheme.dimension()) {
    throw ParameterError("coefficient vector length does not match the scheme design");
  }
  if (!beta.allFinite()) throw ParameterError("coefficients must be finite");
  if (w.size() != static_cast<Eigen::Index>(scheme.size())) {
    throw ParameterError("weight vector length does not match the number of quadrature points");
  }
  if ((w.array() < 0.0).any() || !w.allFinite()) throw ParameterError("weights must be finite and non-negative");
}

}  // namespace

PointwiseEval evaluate_pointwise(const QuadratureScheme& scheme, const Eigen::VectorXd& eta,
                                 const Eigen::VectorXd& w, const Likelihood& likelihood,
                                 bool with_derivatives) {
  const auto n = static_cast<Eigen::Index>(scheme.size());
  if (eta.size() != n || w.size() != n) {
    throw ParameterError("linear predictor / weights do not match the number of quadrature points");
  }
  const bool logistic = likelihood.kind == LikelihoodKind::logistic;
  if (logistic && likelihood.delta.size() != n) {
    throw ParameterError("logistic delta length does not match the number of quadrature points");
  }
  PointwiseEval out;
  if (with_derivatives) {
    out.score.resize(n);
    out.curvature.resize(n);
  }
  const auto& v = scheme.weights();
  const auto& d = scheme.data_indicator();
  double value = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double e = eta(i);
    if (!(e <= kEtaClamp && e >= -kEtaClamp)) {
      if (std::isnan(e)) throw NumericalError("linear predictor is NaN");
      e = std::clamp(e, -kEtaClamp, kEtaClamp);
      ++out.overflow;
    }
    const double rho = std::exp(e);
    if (!logistic) {
      value += w(i) * (d(i) * e - v(i) * rho);
      if (with_derivatives) {
        out.score(i) = w(i) * (d(i) - v(i) * rho);
        out.curvature(i) = w(i) * v(i) * rho;
      }
    } else {
      const double delta = likelihood.delta(i);
      const double log_delta = std::log(delta);
      // log(rho / (delta + rho)) = -softplus(log delta - eta)
      // delta log((rho + delta) / delta) = delta softplus(eta - log delta)
      value += w(i) * (-d(i) * softplus(log_delta - e) - v(i) * delta * softplus(e - log_delta));
      if (with_derivatives) {
        const double s = logistic_fn(log_delta - e);  // delta / (delta + rho)
        out.score(i) = w(i) * s * (d(i) - v(i) * rho);
        out.curvature(i) = w(i) * (v(i) * delta + d(i)) * s * (1.0 - s);
      }
    }
  }
  out.value = value;
  return out;
}

LikelihoodEval evaluate_likelihood(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& w, const Likelihood& likelihood,
                                   bool with_derivatives) {
  check_inputs(scheme, beta, w);
  PointwiseEval pw = evaluate_pointwise(scheme, scheme.design() * beta, w, likelihood, with_derivatives);
  LikelihoodEval out;
  out.value = pw.value;
  out.overflow = pw.overflow;
  if (with_derivatives) {
    out.gradient = scheme.design().transpose() * pw.score;
    out.curvature = std::move(pw.curvature);
  }
  return out;
}

double poisson_objective(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& w) {
  return evaluate_likelihood(scheme, beta, w, Likelihood::poisson(), false).value;
}

Eigen::VectorXd poisson_gradient(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& w) {
  return evaluate_likelihood(scheme, beta, w, Likelihood::poisson(), true).gradient;
}

double logistic_objective(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& w, const Eigen::VectorXd& delta) {
  return evaluate_likelihood(scheme, beta, w, Likelihood::logistic(delta), false).value;
}

Eigen::VectorXd logistic_gradient(const QuadratureScheme& scheme, const Eigen::VectorXd& beta,
                                  const Eigen::VectorXd& w, const Eigen::VectorXd& delta) {
  return evaluate_likelihood(scheme, beta, w, Likelihood::logistic(delta), true).gradient;
}

}  // namespace ppreg
