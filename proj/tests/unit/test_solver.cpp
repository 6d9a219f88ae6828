#include <doctest.h>

#include <cmath>

#include "../common.hpp"
#include "ppreg/error.hpp"
#include "ppreg/solver.hpp"

using namespace ppreg;

namespace {
SolverConfig tight() {
  SolverConfig c;
  c.tol = 1e-10;
  return c;
}
const PenaltySpec kNone(PenaltyKind::lasso, 0.0);
}  // namespace

TEST_CASE("intercept-only homogeneous fit equals log(n/|D|)") {
  const Window d(0, 200, 0, 100);
  std::vector<Point> pts;
  for (int i = 0; i < 93; ++i) pts.push_back({(i * 31) % 200 + 0.5, (i * 17) % 100 + 0.5});
  // Design with only the intercept column.
  const CovariateStack icpt({RasterGrid(10, 5, d, std::vector<double>(50, 1.0), "one")}, false);
  const auto s = build_scheme(PointPattern(pts, d), icpt, 20, 10);
  const auto f = fit_penalized(s, unit_weights(s), Likelihood::poisson(), kNone, tight());
  CHECK(f.converged);
  CHECK(std::abs(f.beta(0) - std::log(93.0 / d.area())) < 1e-6);
}

TEST_CASE("lambda=0 fits match the dense Newton oracle") {
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    const auto inst = testutil::random_instance(seed, 3, 300);
    const auto& s = inst.scheme;
    const auto w = unit_weights(s);
    const auto f = fit_penalized(s, w, Likelihood::poisson(), kNone, tight());
    const auto oracle = testutil::newton_oracle(s, false, 0.0, Eigen::VectorXd::Zero(s.dimension()));
    CHECK(f.converged);
    CHECK((f.beta - oracle).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(kkt_residual(s, w, Likelihood::poisson(), kNone, oracle) < 1e-6);

    const double delta = 2.0 * static_cast<double>(s.n_data()) / s.area();
    const auto lik = Likelihood::logistic(s, delta);
    const auto fl = fit_penalized(s, w, lik, kNone, tight());
    const auto ol = testutil::newton_oracle(s, true, delta, Eigen::VectorXd::Zero(s.dimension()));
    CHECK((fl.beta - ol).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("lambda above lambda_max gives the null model") {
  const auto inst = testutil::random_instance(7, 4, 400);
  const auto& s = inst.scheme;
  const auto w = unit_weights(s);
  for (auto kind : {PenaltyKind::lasso, PenaltyKind::enet, PenaltyKind::scad, PenaltyKind::mcplus}) {
    const PenaltySpec tmpl(kind, 1.0);
    INFO("kind " << static_cast<int>(kind));
    const double lmax = lambda_max(s, w, Likelihood::poisson(), tmpl);
    const auto f = fit_penalized(s, w, Likelihood::poisson(), tmpl.with_lambda(lmax * 1.01));
    CHECK(f.support.empty());
    for (Eigen::Index j = 1; j < f.beta.size(); ++j) CHECK(f.beta(j) == 0.0);
    CHECK(kkt_residual(s, w, Likelihood::poisson(), tmpl.with_lambda(lmax), f.beta) < 1e-6);
    // Just below lambda_max something enters.
    const auto g = fit_penalized(s, w, Likelihood::poisson(), tmpl.with_lambda(lmax * 0.9));
    CHECK_FALSE(g.support.empty());
  }
  Eigen::VectorXd random = inst.beta_true;
  random(1) += 0.5;
  CHECK(kkt_residual(s, w, Likelihood::poisson(), PenaltySpec(PenaltyKind::lasso, 1e-3), random) > 0.0);
}

TEST_CASE("penalized fits satisfy the KKT conditions") {
  const auto inst = testutil::random_instance(8, 5, 600);
  const auto& s = inst.scheme;
  const auto w = unit_weights(s);
  const double lmax = lambda_max(s, w, Likelihood::poisson(), PenaltySpec(PenaltyKind::lasso, 1.0));
  for (auto kind : {PenaltyKind::ridge, PenaltyKind::lasso, PenaltyKind::enet, PenaltyKind::scad, PenaltyKind::mcplus}) {
    const PenaltySpec spec(kind, 0.1 * lmax);
    const auto f = fit_penalized(s, w, Likelihood::poisson(), spec, tight());
    CHECK(f.converged);
    CHECK(f.kkt <= 1e-9);
    CHECK(kkt_residual(s, w, Likelihood::poisson(), spec, f.beta) <= 1e-9);
  }
  std::vector<double> mult = {0.2, 3.0, 1.0, 0.5, 10.0};
  const PenaltySpec al(PenaltyKind::adaptive_lasso, 0.1 * lmax, std::nullopt, mult);
  const auto f = fit_penalized(s, w, Likelihood::poisson(), al, tight());
  CHECK(kkt_residual(s, w, Likelihood::poisson(), al, f.beta) <= 1e-9);
  CHECK_THROWS_AS(fit_penalized(s, w, Likelihood::poisson(), PenaltySpec(PenaltyKind::adaptive_lasso, 1.0, std::nullopt, {1.0})),
                  ParameterError);
}

TEST_CASE("lasso objective is optimal against random perturbations") {
  const auto inst = testutil::random_instance(9, 3, 500);
  const auto& s = inst.scheme;
  const auto w = unit_weights(s);
  const double lmax = lambda_max(s, w, Likelihood::poisson(), PenaltySpec(PenaltyKind::lasso, 1.0));
  const PenaltySpec spec(PenaltyKind::lasso, 0.2 * lmax);
  const auto f = fit_penalized(s, w, Likelihood::poisson(), spec, tight());
  auto q = [&](const Eigen::VectorXd& b) {
    double pen = 0;
    for (Eigen::Index j = 1; j < b.size(); ++j) pen += value(spec, static_cast<std::size_t>(j - 1), std::abs(b(j)));
    return testutil::dense_eval(s, b, false, 0.0).value - s.area() * pen;
  };
  CHECK(f.objective == doctest::Approx(q(f.beta)).epsilon(1e-10));
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0.0, 1e-3);
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd b = f.beta;
    for (Eigen::Index j = 0; j < b.size(); ++j) b(j) += n(gen);
    CHECK(q(b) <= q(f.beta) + 1e-9 * std::abs(q(f.beta)));
  }
}

TEST_CASE("lambda path: length, empty first support, warm equals cold") {
  const auto inst = testutil::random_instance(10, 4, 500);
  const auto& s = inst.scheme;
  const auto w = unit_weights(s);
  SolverConfig c = tight();
  c.lambda_path.n_lambda = 20;
  c.lambda_path.lambda_min_ratio = 1e-3;
  for (auto kind : {PenaltyKind::lasso, PenaltyKind::enet, PenaltyKind::ridge}) {
    const auto path = lambda_path(s, w, Likelihood::poisson(), PenaltySpec(kind, 1.0), c);
    REQUIRE(path.size() == 20);
    if (kind != PenaltyKind::ridge) CHECK(path.front().support.empty());
    for (std::size_t k = 1; k < path.size(); ++k) CHECK(path[k].lambda < path[k - 1].lambda);
    for (const auto& entry : path) {
      const auto cold = fit_penalized(s, w, Likelihood::poisson(), PenaltySpec(kind, entry.lambda), c);
      CHECK((cold.beta - entry.beta).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
  // Support grows along a lasso path on this easy, nearly orthogonal instance.
  const auto path = lambda_path(s, w, Likelihood::poisson(), PenaltySpec(PenaltyKind::lasso, 1.0), c);
  int violations = 0;
  for (std::size_t k = 1; k < path.size(); ++k) violations += path[k].support.size() < path[k - 1].support.size();
  if (violations > 0) MESSAGE("support size decreased " << violations << " times along the path");
  CHECK(path.back().support.size() >= path.front().support.size());
}

TEST_CASE("scaling equivariance of the unpenalized fit") {
  const auto inst = testutil::random_instance(11, 2, 400);
  std::vector<RasterGrid> grids = inst.stack.grids();
  const double c = 7.5;
  std::vector<double> v = grids[1].values();
  for (double& x : v) x *= c;
  grids[1] = RasterGrid(grids[1].n_cols(), grids[1].n_rows(), grids[1].window(), v, "scaled");
  const CovariateStack scaled(grids, true);
  const auto s1 = inst.scheme;
  const auto s2 = build_scheme(inst.pattern, scaled, 30, 20);
  const auto f1 = fit_penalized(s1, unit_weights(s1), Likelihood::poisson(), kNone, tight());
  const auto f2 = fit_penalized(s2, unit_weights(s2), Likelihood::poisson(), kNone, tight());
  CHECK(f2.beta(2) == doctest::Approx(f1.beta(2) / c).epsilon(1e-7));
  CHECK(f2.beta(1) == doctest::Approx(f1.beta(1)).epsilon(1e-7));
  CHECK(f2.beta(0) == doctest::Approx(f1.beta(0)).epsilon(1e-7));
}

TEST_CASE("logistic fit approaches the poisson fit for large delta") {
  const auto inst = testutil::random_instance(12, 3, 500);
  const auto& s = inst.scheme;
  const auto w = unit_weights(s);
  const double rho_bar = static_cast<double>(s.n_data()) / s.area();
  const auto fp = fit_penalized(s, w, Likelihood::poisson(), kNone, tight());
  const auto fl = fit_penalized(s, w, Likelihood::logistic(s, 1e6 * rho_bar), kNone, tight());
  CHECK((fp.beta - fl.beta).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("WPL weights") {
  const Eigen::VectorXd rho = (Eigen::VectorXd(3) << 0.0, 1e-3, 0.5).finished();
  const auto w1 = compute_wpl_weights(rho, PairCorrelation::poisson(), 80.0);
  CHECK(w1 == Eigen::VectorXd::Ones(3));
  const ThomasParams t{5e-4, 20.0, 1.0};
  const auto w2 = compute_wpl_weights(rho, PairCorrelation::thomas(t), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(w2(i) == doctest::Approx(1.0 / (1.0 + 2000.0 * rho(i))).epsilon(1e-9));
  CHECK(w2(0) == 1.0);
  const auto w3 = compute_wpl_weights(rho, PairCorrelation::thomas(t), 80.0);
  const double k = 2000.0 * (1.0 - std::exp(-6400.0 / 1600.0));
  CHECK(w3(2) == doctest::Approx(1.0 / (1.0 + k * 0.5)).epsilon(1e-9));
  // A negatively correlated model can make the denominator non-positive.
  const auto repulsive = PairCorrelation::isotropic([](double r) { return r < 10 ? 0.0 : 1.0; });
  const Eigen::VectorXd big = Eigen::VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(compute_wpl_weights(big, repulsive, 20.0), DomainError);
}

TEST_CASE("divergence is reported, not returned") {
  // All points in one corner and a covariate that separates them perfectly.
  const Window d(0, 10, 0, 10);
  std::vector<double> v(100, 0.0);
  for (std::size_t c = 0; c < 100; ++c) v[c] = (c % 10 == 0 && c / 10 == 9) ? 1.0 : 0.0;
  const CovariateStack st({RasterGrid(10, 10, d, v, "corner")}, true);
  std::vector<Point> pts(30, Point{0.5, 0.5});
  const auto s = build_scheme(PointPattern(pts, d), st, 10, 10);
  CHECK_THROWS_AS(fit_penalized(s, unit_weights(s), Likelihood::poisson(), kNone), NumericalError);
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  c.tol = -1;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  SolverConfig d;
  d.lambda_path.lambda_min_ratio = 1.5;
  CHECK_THROWS_AS(d.validate(), ParameterError);
}
