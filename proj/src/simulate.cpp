#include "ppreg/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ppreg/error.hpp"

namespace ppreg {

void ThomasParams::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(kappa) || !ok(omega) || !ok(mu)) {
    std::ostringstream msg;
    msg << "Thomas parameters must be positive and finite (kappa=" << kappa
        << ", omega=" << omega << ", mu=" << mu << ")";
    throw ParameterError(msg.str());
  }
}

IntensityModel::IntensityModel(CovariateStack stack, Eigen::VectorXd beta)
    : stack_(std::move(stack)), beta_(std::move(beta)) {
  if (static_cast<std::size_t>(beta_.size()) != stack_.dimension()) {
    std::ostringstream msg;
    msg << "coefficient vector has length " << beta_.size() << " but the covariate stack has dimension "
        << stack_.dimension();
    throw ParameterError(msg.str());
  }
  const Eigen::VectorXd eta = stack_.design_matrix() * beta_;
  cell_rho_.resize(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double rho = std::exp(eta(i));
    if (!std::isfinite(rho)) {
      std::ostringstream msg;
      msg << "intensity is not finite in cell " << i << " (log-intensity " << eta(i) << ")";
      throw NumericalError(msg.str());
    }
    cell_rho_[static_cast<std::size_t>(i)] = rho;
    rho_max_ = std::max(rho_max_, rho);
  }
}

double IntensityModel::expected_count() const {
  double sum = 0.0;
  for (double r : cell_rho_) sum += r;
  return sum * stack_.geometry().cell_area();
}

double calibrate_intercept(const CovariateStack& stack, const Eigen::VectorXd& beta_rest,
                           double target_count) {
  if (!stack.includes_intercept()) throw ParameterError("intercept calibration needs an intercept column");
  if (!(target_count > 0)) throw ParameterError("target count must be positive");
  if (static_cast<std::size_t>(beta_rest.size()) != stack.n_covariates()) {
    throw ParameterError("coefficient vector length does not match the number of covariates");
  }
  const Eigen::MatrixXd z = stack.design_matrix();
  const Eigen::VectorXd eta = z.rightCols(z.cols() - 1) * beta_rest;
  // log-sum-exp keeps large linear predictors finite.
  const double m = eta.maxCoeff();
  const double sum = (eta.array() - m).exp().sum();
  const double log_integral = m + std::log(sum * stack.geometry().cell_area());
  return std::log(target_count) - log_integral;
}

namespace {

void thin_into(std::vector<Point>& out, const IntensityModel& model, Point u, Rng& rng) {
  const double keep = model.intensity(u) / model.max_intensity();
  if (rng.uniform() < keep) out.push_back(u);
}

}  // namespace

PointPattern simulate_poisson(const IntensityModel& model, Rng& rng) {
  const Window& w = model.stack().window();
  std::vector<Point> points;
  const double rho_max = model.max_intensity();
  if (rho_max > 0.0) {
    const std::uint64_t n = rng.poisson(rho_max * w.area());
    points.reserve(static_cast<std::size_t>(static_cast<double>(n) * 0.5));
    for (std::uint64_t i = 0; i < n; ++i) {
      const Point u{rng.uniform(w.x_min(), w.x_max()), rng.uniform(w.y_min(), w.y_max())};
      thin_into(points, model, u, rng);
    }
  }
  return PointPattern(std::move(points), w);
}

PointPattern simulate_poisson(const IntensityModel& model, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_poisson(model, rng);
}

PointPattern simulate_thomas(const IntensityModel& model, const ThomasParams& params, Rng& rng) {
  const double rho_max = model.max_intensity();
  const ThomasParams& p = params;
  p.validate();
  const Window& w = model.stack().window();
  std::vector<Point> points;
  if (!(rho_max > 0.0)) return PointPattern(std::move(points), w);

  const double mu = rho_max / p.kappa;
  const double pad = 4.0 * p.omega;
  const Window ext(w.x_min() - pad, w.x_max() + pad, w.y_min() - pad, w.y_max() + pad);
  const std::uint64_t n_parents = rng.poisson(p.kappa * ext.area());
  for (std::uint64_t i = 0; i < n_parents; ++i) {
    const Point parent{rng.uniform(ext.x_min(), ext.x_max()), rng.uniform(ext.y_min(), ext.y_max())};
    const std::uint64_t n_children = rng.poisson(mu);
    for (std::uint64_t k = 0; k < n_children; ++k) {
      const double dx = p.omega * rng.normal();
      const double dy = p.omega * rng.normal();
      const Point u{parent.x + dx, parent.y + dy};
      if (!w.contains(u)) continue;
      thin_into(points, model, u, rng);
    }
  }
  return PointPattern(std::move(points), w);
}

PointPattern simulate_thomas(const IntensityModel& model, const ThomasParams& params,
                             std::uint64_t seed) {
  Rng rng(seed);
  return simulate_thomas(model, params, rng);
}

double thomas_pair_correlation(const ThomasParams& params, double r) {
  const double w2 = params.omega * params.omega;
  return 1.0 + std::exp(-r * r / (4.0 * w2)) / (4.0 * std::numbers::pi * params.kappa * w2);
}

PairCorrelation PairCorrelation::poisson() {
  PairCorrelation g;
  g.radial_ = [](double) { return 1.0; };
  g.poisson_ = true;
  return g;
}

PairCorrelation PairCorrelation::thomas(const ThomasParams& params) {
  const ThomasParams p = params;
  if (!(std::isfinite(p.kappa) && p.kappa > 0.0 && std::isfinite(p.omega) && p.omega > 0.0)) {
    throw ParameterError("Thomas pair correlation needs positive kappa and omega");
  }
  PairCorrelation g;
  g.radial_ = [p](double r) { return thomas_pair_correlation(p, r); };
  return g;
}

PairCorrelation PairCorrelation::isotropic(std::function<double(double)> fn) {
  PairCorrelation g;
  g.radial_ = std::move(fn);
  return g;
}

PairCorrelation PairCorrelation::general(std::function<double(Point, Point)> fn) {
  PairCorrelation g;
  g.general_ = std::move(fn);
  return g;
}

double PairCorrelation::operator()(double r) const {
  if (!radial_) throw UnsupportedError("pair correlation is not isotropic");
  return radial_(r);
}

double PairCorrelation::operator()(Point u, Point v) const {
  if (radial_) return radial_(std::hypot(u.x - v.x, u.y - v.y));
  return general_(u, v);
}

namespace {

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double tol) {
  // Split into panels first so narrow features are not skipped.
  constexpr int kPanels = 64;
  double total = 0.0;
  const double h = (b - a) / kPanels;
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h;
    const double hi = lo + h;
    const double flo = f(lo), fmid = f(0.5 * (lo + hi)), fhi = f(hi);
    total += adaptive_simpson(f, lo, hi, flo, fmid, fhi, simpson(lo, hi, flo, fmid, fhi),
                              tol / kPanels, 40);
  }
  return total;
}

}  // namespace

double PairCorrelation::excess_integral(double radius) const {
  if (!radial_) throw UnsupportedError("excess integral needs an isotropic pair correlation");
  if (poisson_) return 0.0;
  if (!(radius > 0.0)) throw ParameterError("truncation radius must be positive");
  const double two_pi = 2.0 * std::numbers::pi;
  if (std::isinf(radius)) {
    // r = t / (1 - t) maps [0, 1) onto [0, inf).
    auto f = [this](double t) {
      if (t >= 1.0) return 0.0;
      const double r = t / (1.0 - t);
      const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
      const double v = (radial_(r) - 1.0) * r * jac;
      return std::isfinite(v) ? v : 0.0;
    };
    return two_pi * integrate(f, 0.0, 1.0, 1e-12);
  }
  auto f = [this](double r) { return (radial_(r) - 1.0) * r; };
  return two_pi * integrate(f, 0.0, radius, 1e-12 * std::max(1.0, radius * radius));
}

}  // namespace ppreg
