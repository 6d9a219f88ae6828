#include <doctest.h>

#include <cmath>

#include "../common.hpp"
#include "ppreg/error.hpp"
#include "ppreg/quadrature.hpp"
#include "ppreg/solver.hpp"

using namespace ppreg;

namespace {
CovariateStack constant_stack(const Window& w, std::size_t nc = 10, std::size_t nr = 10) {
  return CovariateStack({RasterGrid(nc, nr, w, std::vector<double>(nc * nr, 1.0), "one")}, false);
}
}  // namespace

TEST_CASE("counting weights on an empty pattern and with one data point") {
  const Window unit(0, 1, 0, 1);
  const PointPattern empty({}, unit);
  const auto s = build_scheme(empty, constant_stack(unit), 10, 10);
  CHECK(s.size() == 100);
  for (Eigen::Index i = 0; i < s.weights().size(); ++i) CHECK(s.weights()(i) == doctest::Approx(0.01));
  CHECK(s.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));

  const PointPattern one({{0.03, 0.04}}, unit);
  const auto t = build_scheme(one, constant_stack(unit), 10, 10);
  REQUIRE(t.n_data() == 1);
  CHECK(t.weights()(0) == doctest::Approx(0.005));
  int halves = 0;
  for (Eigen::Index i = 1; i < t.weights().size(); ++i) halves += std::abs(t.weights()(i) - 0.005) < 1e-15;
  CHECK(halves == 1);
  CHECK(t.response()(0) == doctest::Approx(200.0));
}

TEST_CASE("weights partition the study window") {
  const auto inst = testutil::random_instance(1, 2);
  CHECK(std::abs(inst.scheme.weights().sum() - inst.scheme.area()) < 1e-8 * inst.scheme.area());
  const Window d(0, 1000, 0, 500);
  std::vector<Point> pts;
  for (int i = 0; i < 300; ++i) pts.push_back({(i * 37) % 1000 + 0.5, (i * 53) % 500 + 0.25});
  const auto s = build_scheme(PointPattern(pts, d), constant_stack(d), 101, 51);
  CHECK(std::abs(s.weights().sum() - 5e5) < 5e-3);
  CHECK(s.n_data() == 300);
  for (Eigen::Index i = 0; i < s.weights().size(); ++i) CHECK(s.weights()(i) > 0.0);
}

TEST_CASE("scheme invariants are enforced") {
  const Window unit(0, 1, 0, 1);
  const auto s = build_scheme(PointPattern({}, unit), constant_stack(unit, 2, 2), 2, 2);
  Eigen::VectorXd doubled = 2.0 * s.weights();
  CHECK_THROWS_AS(QuadratureScheme(s.points(), 0, doubled, s.design(), Window(0, 1, 0, 0.5), false), DataError);
  Eigen::VectorXd neg = s.weights();
  neg(0) = -neg(0);
  CHECK_THROWS_AS(QuadratureScheme(s.points(), 0, neg, s.design(), unit, false), DataError);
}

TEST_CASE("poisson objective examples") {
  const Window unit(0, 1, 0, 1);
  const auto s = build_scheme(PointPattern({}, unit), constant_stack(unit), 10, 10);
  const Eigen::VectorXd w = unit_weights(s);
  CHECK(poisson_objective(s, Eigen::VectorXd::Zero(1), w) == doctest::Approx(-1.0));
  Eigen::VectorXd delta = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s.size()));
  CHECK(logistic_objective(s, Eigen::VectorXd::Zero(1), w, delta) == doctest::Approx(-std::log(2.0)));

  // Homogeneous MLE: zero intercept gradient.
  const Window d(0, 100, 0, 50);
  std::vector<Point> pts;
  for (int i = 0; i < 57; ++i) pts.push_back({(i * 13) % 100 + 0.3, (i * 7) % 50 + 0.1});
  const auto h = build_scheme(PointPattern(pts, d), constant_stack(d), 20, 10);
  Eigen::VectorXd b(1);
  b << std::log(57.0 / d.area());
  CHECK(std::abs(poisson_gradient(h, b, unit_weights(h))(0)) < 1e-8);
}

TEST_CASE("analytic gradients match finite differences; concavity") {
  const auto inst = testutil::random_instance(3, 3, 200);
  const auto& s = inst.scheme;
  const Eigen::VectorXd w = unit_weights(s);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0.0, 0.3);
  const Eigen::VectorXd delta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.size()), 0.05);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd b = inst.beta_true;
    for (Eigen::Index j = 0; j < b.size(); ++j) b(j) += n(gen);
    const Eigen::VectorXd g = poisson_gradient(s, b, w);
    const Eigen::VectorXd gl = logistic_gradient(s, b, w, delta);
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const double h = 1e-5;
      Eigen::VectorXd up = b, dn = b;
      up(j) += h;
      dn(j) -= h;
      const double fd = (poisson_objective(s, up, w) - poisson_objective(s, dn, w)) / (2 * h);
      CHECK(std::abs(fd - g(j)) <= 1e-5 * std::max(1.0, std::abs(g(j))));
      const double fdl = (logistic_objective(s, up, w, delta) - logistic_objective(s, dn, w, delta)) / (2 * h);
      CHECK(std::abs(fdl - gl(j)) <= 1e-5 * std::max(1.0, std::abs(gl(j))));
    }
  }
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd a = inst.beta_true, c = inst.beta_true;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      a(j) += n(gen);
      c(j) += n(gen);
    }
    const double mid = poisson_objective(s, 0.5 * (a + c), w);
    CHECK(mid >= 0.5 * (poisson_objective(s, a, w) + poisson_objective(s, c, w)) - 1e-9);
  }
}

TEST_CASE("evaluate_likelihood agrees with the dense reference") {
  const auto inst = testutil::random_instance(5, 2, 150);
  const auto& s = inst.scheme;
  const Eigen::VectorXd w = unit_weights(s);
  const auto p = evaluate_likelihood(s, inst.beta_true, w, Likelihood::poisson());
  const auto dp = testutil::dense_eval(s, inst.beta_true, false, 0.0);
  CHECK(p.value == doctest::Approx(dp.value).epsilon(1e-12));
  CHECK((p.gradient - dp.grad).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd hess = -(s.design().transpose() * p.curvature.asDiagonal() * s.design());
  CHECK((hess - dp.hess).cwiseAbs().maxCoeff() < 1e-8 * dp.hess.cwiseAbs().maxCoeff());

  const auto l = evaluate_likelihood(s, inst.beta_true, w, Likelihood::logistic(s, 0.02));
  const auto dl = testutil::dense_eval(s, inst.beta_true, true, 0.02);
  CHECK(l.value == doctest::Approx(dl.value).epsilon(1e-12));
  CHECK((l.gradient - dl.grad).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("logistic converges to poisson as delta grows") {
  const auto inst = testutil::random_instance(6, 2, 300);
  const auto& s = inst.scheme;
  const Eigen::VectorXd w = unit_weights(s);
  const double rho_bar = static_cast<double>(inst.pattern.size()) / s.area();
  const double delta = 1e6 * rho_bar;
  const Eigen::VectorXd dv = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.size()), delta);
  const double n = static_cast<double>(s.n_data());
  // The logistic objective carries the constant -n log(delta) relative to Poisson.
  const double lp = poisson_objective(s, inst.beta_true, w);
  const double ll = logistic_objective(s, inst.beta_true, w, dv) + n * std::log(delta);
  CHECK(std::abs(ll - lp) < 1e-3 * std::abs(lp));
  const Eigen::VectorXd gp = poisson_gradient(s, inst.beta_true, w);
  const Eigen::VectorXd gl = logistic_gradient(s, inst.beta_true, w, dv);
  CHECK((gp - gl).cwiseAbs().maxCoeff() < 1e-3 * std::max(1.0, gp.cwiseAbs().maxCoeff()));
}

TEST_CASE("overflow guard clamps the linear predictor") {
  const Window unit(0, 1, 0, 1);
  const auto s = build_scheme(PointPattern({{0.5, 0.5}}, unit), constant_stack(unit), 2, 2);
  Eigen::VectorXd b(1);
  b << 800.0;
  const auto e = evaluate_likelihood(s, b, unit_weights(s), Likelihood::poisson());
  CHECK(e.overflow == s.size());
  CHECK(std::isfinite(e.value));
}

TEST_CASE("refining the dummy grid: the unpenalized fit settles") {
  // Smooth covariates on a fine raster so only the quadrature changes.
  const Window d(0, 1, 0, 1);
  const std::size_t n = 200;
  std::vector<double> v1(n * n), v2(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double x = (c + 0.5) / n, y = 1.0 - (r + 0.5) / n;
      v1[r * n + c] = x;
      v2[r * n + c] = std::sin(3.14159 * y);
    }
  }
  const CovariateStack st({RasterGrid(n, n, d, v1, "x"), RasterGrid(n, n, d, v2, "s")}, true);
  Eigen::VectorXd rest(2);
  rest << 0.6, -0.4;
  Eigen::VectorXd beta(3);
  beta(0) = calibrate_intercept(st, rest, 400.0);
  beta.tail(2) = rest;
  const auto pattern = simulate_poisson(IntensityModel(st, beta), 12);
  const PenaltySpec none(PenaltyKind::lasso, 0.0);
  auto fit_at = [&](std::size_t m) {
    const auto s = build_scheme(pattern, st, m, m);
    return fit_penalized(s, unit_weights(s), Likelihood::poisson(), none).beta;
  };
  const Eigen::VectorXd b10 = fit_at(10), b40 = fit_at(40), b160 = fit_at(160);
  for (Eigen::Index j = 0; j < 3; ++j) {
    INFO("coordinate " << j << ": " << b10(j) << " " << b40(j) << " " << b160(j));
    // 40 -> 160 is within 1%; the 10x10 grid (several data points share a
    // tile) is further off but still within 10%.
    CHECK(std::abs(b40(j) - b160(j)) <= 0.01 * std::abs(b160(j)));
    CHECK(std::abs(b10(j) - b160(j)) <= 0.1 * std::abs(b160(j)));
  }
}
