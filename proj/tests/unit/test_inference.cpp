#include <doctest.h>

#include <cmath>

#include "../common.hpp"
#include "ppreg/error.hpp"
#include "ppreg/inference.hpp"
#include "ppreg/solver.hpp"

using namespace ppreg;

namespace {
CovariateStack intercept_only(const Window& w, std::size_t nc, std::size_t nr) {
  // A zero covariate keeps the stack non-empty; only column 0 is used.
  return CovariateStack({RasterGrid(nc, nr, w, std::vector<double>(nc * nr, 0.0), "zero")}, true);
}
}  // namespace

TEST_CASE("intercept-only homogeneous: A = B = rho |D|, C = 0 for Poisson") {
  const Window d(0, 1000, 0, 500);
  const auto st = intercept_only(d, 20, 10);
  Eigen::VectorXd beta(2);
  const double rho = 0.0032;
  beta << std::log(rho), 0.0;
  SandwichOptions opt;
  opt.indices = {0};
  const auto m = compute_abc(st, beta, PairCorrelation::poisson(), opt);
  CHECK(m.a(0, 0) == doctest::Approx(rho * d.area()).epsilon(1e-12));
  CHECK(m.b(0, 0) == doctest::Approx(rho * d.area()).epsilon(1e-12));
  CHECK(m.c(0, 0) == 0.0);
}

TEST_CASE("A = B for unit weights and finite entries on a random stack") {
  const auto inst = testutil::random_instance(21, 3);
  SandwichOptions opt;
  const auto m = compute_abc(inst.stack, inst.beta_true, PairCorrelation::thomas({5e-3, 3.0, 1.0}), opt);
  CHECK((m.a - m.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.a.allFinite());
  CHECK(m.c.allFinite());
  CHECK((m.c - m.c.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("C from the radial kernel agrees with the full double sum") {
  // 32 x 32 cells over a window much larger than the cluster scale.
  const Window d(0, 2000, 0, 2000);
  const auto st = intercept_only(d, 32, 32);
  Eigen::VectorXd beta(2);
  const double rho = 0.004;
  beta << std::log(rho), 0.0;
  const ThomasParams t{5e-4, 20.0, 1.0};
  SandwichOptions opt;
  opt.indices = {0};
  const auto fast = compute_abc(st, beta, PairCorrelation::thomas(t), opt);
  const auto general = PairCorrelation::general([t](Point u, Point v) {
    return thomas_pair_correlation(t, std::hypot(u.x - v.x, u.y - v.y));
  });
  const auto brute = compute_abc(st, beta, general, opt);
  // One sub-point per cell is the same cell-center rule as the double sum.
  SandwichOptions one = opt;
  one.kernel_subsamples = 1;
  const auto centers = compute_abc(st, beta, PairCorrelation::thomas(t), one);
  CHECK(std::abs(centers.c(0, 0) - brute.c(0, 0)) <= 1e-9 * std::abs(brute.c(0, 0)));
  // Boundary-free approximation rho^2 |D| integral(g - 1).
  const double approx = rho * rho * d.area() * 2000.0;
  CHECK(std::abs(fast.c(0, 0) - approx) <= 0.05 * approx);

  // Independent oracle: direct sum over sub-sampled cell pairs.
  const RasterGrid& geo = st.geometry();
  const int m = 2;
  double direct = 0.0;
  const double sub = geo.cell_width() / m;
  std::vector<Point> sp;
  for (std::size_t c = 0; c < geo.n_cells(); ++c) {
    const Point ctr = geo.cell_center(c);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        sp.push_back({ctr.x - geo.cell_width() / 2 + (a + 0.5) * sub, ctr.y - geo.cell_height() / 2 + (b + 0.5) * sub});
  }
  const double w = geo.cell_area() / (m * m);
  for (std::size_t i = 0; i < sp.size(); ++i) {
    for (std::size_t j = 0; j < sp.size(); ++j) {
      const double r = std::hypot(sp[i].x - sp[j].x, sp[i].y - sp[j].y);
      if (r > 200) continue;
      direct += (thomas_pair_correlation(t, r) - 1.0) * w * w;
    }
  }
  direct *= rho * rho;
  CHECK(std::abs(fast.c(0, 0) - direct) <= 0.05 * direct);
}

TEST_CASE("general pair correlation beyond the cell cap is unsupported") {
  const Window d(0, 100, 0, 100);
  const auto st = intercept_only(d, 80, 80);
  SandwichOptions opt;
  opt.indices = {0};
  const auto g = PairCorrelation::general([](Point, Point) { return 1.5; });
  CHECK_THROWS_AS(compute_abc(st, Eigen::VectorXd::Zero(2), g, opt), UnsupportedError);
}

TEST_CASE("sigma collapses to |D| A11^-1 for unweighted Poisson") {
  const auto inst = testutil::random_instance(22, 3, 500);
  const auto fit = fit_penalized(inst.scheme, unit_weights(inst.scheme), Likelihood::poisson(),
                                 PenaltySpec(PenaltyKind::lasso, 0.0));
  SandwichOptions opt;
  opt.indices = {0, 1, 2, 3};
  const auto m = compute_abc(inst.stack, fit.beta, PairCorrelation::poisson(), opt);
  const double area = inst.stack.window().area();
  const auto est = compute_sigma(m, PenaltySpec(PenaltyKind::lasso, 0.01), fit.beta, area, 1);
  const Eigen::MatrixXd expect = area * m.a.inverse();
  CHECK((est.sigma - expect).cwiseAbs().maxCoeff() <= 1e-10 * expect.cwiseAbs().maxCoeff());
  CHECK(est.pi.cwiseAbs().maxCoeff() == 0.0);
  CHECK((est.sigma - est.sigma.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(est.standard_errors(i) == doctest::Approx(std::sqrt(est.sigma(i, i) / area)));
  }
  // PSD of B + C.
  const Eigen::MatrixXd bc = m.b + m.c;
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(bc).eigenvalues().minCoeff() >= -1e-8 * bc.trace());
}

TEST_CASE("SCAD curvature enters Pi; collinear supports are refused") {
  const auto inst = testutil::random_instance(23, 2, 500);
  SandwichOptions opt;
  const auto m = compute_abc(inst.stack, inst.beta_true, PairCorrelation::poisson(), opt);
  Eigen::VectorXd b = inst.beta_true;
  b(1) = 0.3;
  b(2) = -0.2;
  const auto est = compute_sigma(m, PenaltySpec(PenaltyKind::scad, 0.25, 3.7), b, inst.stack.window().area(), 1);
  CHECK(est.pi(0) == 0.0);
  CHECK(est.pi(1) != 0.0);  // 0.3 sits in the middle branch

  std::vector<RasterGrid> grids = inst.stack.grids();
  grids.push_back(grids[0].renamed("copy"));
  const CovariateStack dup(grids, true);
  Eigen::VectorXd b3(4);
  b3 << inst.beta_true(0), 0.1, 0.1, 0.1;
  const auto md = compute_abc(dup, b3, PairCorrelation::poisson(), opt);
  CHECK_THROWS_WITH_AS(compute_sigma(md, PenaltySpec(PenaltyKind::lasso, 0.0), b3, dup.window().area(), 1,
                                     {"(Intercept)", "x1", "x2", "copy"}),
                       doctest::Contains("copy"), NumericalError);
}
