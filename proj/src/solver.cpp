#include "ppreg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ppreg/error.hpp"

namespace ppreg {

void SolverConfig::validate() const {
  if (!(tol > 0.0) || !std::isfinite(tol)) throw ParameterError("solver tol must be positive");
  if (max_outer < 1 || max_inner < 1) throw ParameterError("solver iteration limits must be >= 1");
  if (lambda_path.n_lambda < 1) throw ParameterError("n_lambda must be >= 1");
  if (!(lambda_path.lambda_min_ratio > 0.0 && lambda_path.lambda_min_ratio < 1.0)) {
    throw ParameterError("lambda_min_ratio must lie in (0, 1)");
  }
}

namespace {

constexpr double kWorkingWeightFloor = 1e-10;
constexpr double kDivergenceNorm = 1e6;
constexpr std::size_t kRecessionLag = 10;
constexpr double kRecessionReach = 100.0;

// Design in solver coordinates: penalized columns centered (when an
// unpenalized intercept is present) and scaled by area-weighted moments.
// Only a reparametrization; the penalty still acts on the original scale.
struct Problem {
  const QuadratureScheme& scheme;
  const Eigen::VectorXd& w;
  const Likelihood& lik;
  Eigen::MatrixXd x;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::Index first = 0;   // first non-intercept column
  Eigen::Index offset = 0;  // first penalized column
  bool centered = false;
  double area = 0.0;

  Eigen::VectorXd to_solver(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd g = beta;
    for (Eigen::Index j = first; j < g.size(); ++j) g(j) = beta(j) * scale(j);
    if (centered) {
      for (Eigen::Index j = first; j < g.size(); ++j) g(0) += mean(j) * beta(j);
    }
    return g;
  }

  Eigen::VectorXd to_original(const Eigen::VectorXd& gamma) const {
    Eigen::VectorXd b = gamma;
    for (Eigen::Index j = first; j < b.size(); ++j) b(j) = gamma(j) / scale(j);
    if (centered) {
      for (Eigen::Index j = first; j < b.size(); ++j) b(0) -= mean(j) * b(j);
    }
    return b;
  }
};

Problem make_problem(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                     const Likelihood& lik, const SolverConfig& config) {
  if (w.size() != static_cast<Eigen::Index>(scheme.size())) {
    throw ParameterError("weight vector length does not match the number of quadrature points");
  }
  if (!w.allFinite() || (w.array() < 0.0).any()) {
    throw ParameterError("weights must be finite and non-negative");
  }
  Problem p{scheme, w, lik, scheme.design(), {}, {}, 0, 0, false, scheme.area()};
  const Eigen::Index d = scheme.dimension();
  p.first = scheme.has_intercept() ? 1 : 0;
  p.offset = (scheme.has_intercept() && !config.penalize_intercept) ? 1 : 0;
  p.centered = config.standardize_internally && p.offset == 1;
  p.mean = Eigen::VectorXd::Zero(d);
  p.scale = Eigen::VectorXd::Ones(d);
  if (!config.standardize_internally) return p;
  const Eigen::VectorXd& v = scheme.weights();
  const double total = v.sum();
  for (Eigen::Index j = p.first; j < d; ++j) {
    const auto col = scheme.design().col(j);
    const double mu = p.centered ? v.dot(col) / total : 0.0;
    const double var = v.dot((col.array() - mu).square().matrix()) / total;
    const double sd = std::sqrt(var);
    if (sd > 1e-12 * (1.0 + std::abs(mu))) {
      p.mean(j) = mu;
      p.scale(j) = sd;
      p.x.col(j) = (col.array() - mu) / sd;
    }
  }
  return p;
}

void check_spec(const Problem& p, const PenaltySpec& spec) {
  const auto n_pen = static_cast<std::size_t>(p.scheme.dimension() - p.offset);
  if (!spec.multipliers().empty() && spec.multipliers().size() != n_pen) {
    std::ostringstream msg;
    msg << "penalty has " << spec.multipliers().size() << " per-coordinate lambdas but the model has "
        << n_pen << " penalized coefficients";
    throw ParameterError(msg.str());
  }
}

double penalty_sum(const Problem& p, const PenaltySpec& spec, const Eigen::VectorXd& beta) {
  double s = 0.0;
  for (Eigen::Index j = p.offset; j < beta.size(); ++j) {
    s += value(spec, static_cast<std::size_t>(j - p.offset), std::abs(beta(j)));
  }
  return s;
}

double kkt_impl(const Eigen::VectorXd& grad, const PenaltySpec& spec, const Eigen::VectorXd& beta,
                Eigen::Index offset, double area, const std::vector<bool>* free) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (free && !(*free)[static_cast<std::size_t>(j)]) continue;
    double r;
    if (j < offset) {
      r = std::abs(grad(j));
    } else {
      const auto k = static_cast<std::size_t>(j - offset);
      if (beta(j) != 0.0) {
        const double sign = beta(j) > 0.0 ? 1.0 : -1.0;
        r = std::abs(grad(j) - area * dvalue(spec, k, std::abs(beta(j))) * sign);
      } else {
        r = std::max(0.0, std::abs(grad(j)) - area * dvalue_at_zero(spec, k));
      }
    }
    worst = std::max(worst, r);
  }
  return worst;
}

struct State {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  PointwiseEval eval;
  double q = 0.0;
};

State evaluate_state(const Problem& p, const PenaltySpec& spec, Eigen::VectorXd gamma) {
  State s;
  s.beta = p.to_original(gamma);
  s.gamma = std::move(gamma);
  s.eval = evaluate_pointwise(p.scheme, p.x * s.gamma, p.w, p.lik, true);
  s.q = s.eval.value - p.area * penalty_sum(p, spec, s.beta);
  return s;
}

void check_divergence(const Eigen::VectorXd& beta) {
  if (!beta.allFinite() || beta.norm() > kDivergenceNorm) {
    throw NumericalError("solver diverged: coefficients are unbounded (separation or degenerate design)");
  }
}

FitResult solve(const Problem& p, const PenaltySpec& spec, const SolverConfig& config,
                const Eigen::VectorXd& start, const std::vector<bool>& free) {
  check_spec(p, spec);
  const Eigen::Index d = p.scheme.dimension();
  if (start.size() != d) throw ParameterError("start vector length does not match the design");
  if (!start.allFinite()) throw ParameterError("start vector must be finite");
  Eigen::VectorXd start_beta = start;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!free[static_cast<std::size_t>(j)]) start_beta(j) = 0.0;
  }
  State cur = evaluate_state(p, spec, p.to_solver(start_beta));
  std::vector<Eigen::VectorXd> history{cur.gamma};

  FitResult res;
  res.lambda = spec.lambda();
  const double inner_tol = std::max(1e-4 * config.tol, 1e-14);
  const double tol_kkt = 10.0 * config.tol;
  const bool nonconvex = spec.kind() == PenaltyKind::scad || spec.kind() == PenaltyKind::mcplus;

  for (int outer = 1; outer <= config.max_outer; ++outer) {
    res.n_outer = outer;
    const Eigen::VectorXd c = cur.eval.curvature.cwiseMax(kWorkingWeightFloor);
    Eigen::VectorXd r = p.x.transpose() * cur.eval.score;
    Eigen::VectorXd h(d);
    for (Eigen::Index j = 0; j < d; ++j) h(j) = c.dot(p.x.col(j).cwiseAbs2());
    std::vector<Eigen::VectorXd> cols(static_cast<std::size_t>(d));

    Eigen::VectorXd next = cur.gamma;
    auto update = [&](Eigen::Index j) -> double {
      if (!(h(j) > 0.0)) return 0.0;
      const double z = next(j) + r(j) / h(j);
      double target = z;
      if (j >= p.offset) {
        const double s = p.scale(j);
        const double tau = p.area / (h(j) * s * s);
        const auto k = static_cast<std::size_t>(j - p.offset);
        if (nonconvex) {
          // Local linear approximation around the outer iterate; the exact
          // 1-D minimizer can leap to a far branch when tau is large.
          const double th = std::abs(cur.gamma(j) / s);
          const double slope = th == 0.0 ? dvalue_at_zero(spec, k) : dvalue(spec, k, th);
          const double u = z / s, cut = tau * slope;
          target = s * (u > cut ? u - cut : (u < -cut ? u + cut : 0.0));
        } else {
          target = s * threshold(spec, k, z / s, tau);
        }
      }
      const double step = target - next(j);
      if (step == 0.0) return 0.0;
      auto& col = cols[static_cast<std::size_t>(j)];
      if (col.size() == 0) col = p.x.transpose() * c.cwiseProduct(p.x.col(j));
      r -= col * step;
      next(j) = target;
      return std::abs(step);
    };

    bool full = true;
    for (int sweep = 0; sweep < config.max_inner; ++sweep) {
      double biggest = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (!free[static_cast<std::size_t>(j)]) continue;
        if (!full && next(j) == 0.0) continue;
        biggest = std::max(biggest, update(j));
      }
      ++res.n_inner;
      if (biggest < inner_tol) {
        if (full) break;
        full = true;
      } else {
        full = false;
      }
    }

    // Step halving keeps the objective from decreasing.
    const Eigen::VectorXd dir = next - cur.gamma;
    const double slack = 1e-10 * (1.0 + std::abs(cur.q));
    std::optional<State> accepted;
    double t = 1.0;
    for (int k = 0; k < 40 && dir.cwiseAbs().maxCoeff() > 0.0; ++k, t *= 0.5) {
      Eigen::VectorXd cand = cur.gamma + t * dir;
      check_divergence(p.to_original(cand));
      State s = evaluate_state(p, spec, std::move(cand));
      if (s.q >= cur.q - slack) {
        accepted = std::move(s);
        break;
      }
    }
    if (!accepted) {
      // No ascent direction left: either optimal or stuck.
      break;
    }
    const double change = (accepted->beta - cur.beta).cwiseAbs().maxCoeff();
    cur = std::move(*accepted);
    history.push_back(cur.gamma);
    if (change < config.tol) {
      const Eigen::VectorXd grad = p.scheme.design().transpose() * cur.eval.score;
      if (kkt_impl(grad, spec, cur.beta, p.offset, p.area, &free) <= tol_kkt) {
        res.converged = true;
        break;
      }
    }
  }

  res.beta = cur.beta;
  res.loglik = cur.eval.value;
  res.objective = cur.q;
  res.overflow_warnings = cur.eval.overflow;
  const Eigen::VectorXd grad = p.scheme.design().transpose() * cur.eval.score;
  res.kkt = kkt_impl(grad, spec, cur.beta, p.offset, p.area, &free);
  if (!res.converged) res.converged = res.kkt <= tol_kkt && res.n_outer > 0 &&
                                      res.n_outer < config.max_outer;
  if (!res.converged && history.size() > kRecessionLag) {
    // Separation drifts slowly. Push far along the recent direction: a
    // bounded problem loses objective there, a recession direction does not.
    const Eigen::VectorXd dir = cur.gamma - history[history.size() - 1 - kRecessionLag];
    const Eigen::VectorXd far = cur.gamma + kRecessionReach * dir;
    const double eta_shift = (p.x * (far - cur.gamma)).cwiseAbs().maxCoeff();
    if (eta_shift > 5.0 && far.allFinite()) {
      const State s = evaluate_state(p, spec, far);
      if (s.q >= cur.q) {
        throw NumericalError("solver diverged: the objective keeps increasing as coefficients grow "
                             "(separation or degenerate design)");
      }
    }
  }
  for (Eigen::Index j = p.offset; j < d; ++j) {
    if (res.beta(j) != 0.0) res.support.push_back(static_cast<std::size_t>(j));
  }
  return res;
}

Eigen::VectorXd default_start(const QuadratureScheme& scheme) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(scheme.dimension());
  if (scheme.has_intercept()) {
    const double n = std::max<double>(static_cast<double>(scheme.n_data()), 1.0);
    b(0) = std::log(n / scheme.area());
  }
  return b;
}

FitResult null_fit_impl(const Problem& p, const SolverConfig& config) {
  std::vector<bool> free(static_cast<std::size_t>(p.scheme.dimension()), false);
  for (Eigen::Index j = 0; j < p.offset; ++j) free[static_cast<std::size_t>(j)] = true;
  return solve(p, PenaltySpec(PenaltyKind::lasso, 0.0), config, default_start(p.scheme), free);
}

double lambda_max_impl(const Problem& p, const PenaltySpec& spec, const FitResult& null) {
  check_spec(p, spec);
  const PointwiseEval pw = evaluate_pointwise(p.scheme, p.scheme.design() * null.beta, p.w, p.lik, true);
  const Eigen::VectorXd grad = p.scheme.design().transpose() * pw.score;
  const bool enet = spec.kind() == PenaltyKind::enet || spec.kind() == PenaltyKind::adaptive_enet;
  const double slope = enet ? spec.gamma() : 1.0;
  double best = 0.0;
  for (Eigen::Index j = p.offset; j < grad.size(); ++j) {
    const auto k = static_cast<std::size_t>(j - p.offset);
    const double m = spec.multipliers().empty() ? 1.0 : spec.multipliers()[k];
    if (m > 0.0) best = std::max(best, std::abs(grad(j)) / (p.area * m * slope));
  }
  if (spec.kind() == PenaltyKind::ridge) best /= 1e-3;
  if (!(best > 0.0) || !std::isfinite(best)) {
    throw ParameterError("cannot build a lambda path: no penalized coordinate has a nonzero gradient");
  }
  // Headroom for the tolerance of the null fit.
  return best * (1.0 + 1e-6);
}

}  // namespace

FitResult fit_penalized(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                        const Likelihood& likelihood, const PenaltySpec& spec,
                        const SolverConfig& config, const std::optional<Eigen::VectorXd>& start) {
  config.validate();
  const Problem p = make_problem(scheme, w, likelihood, config);
  std::vector<bool> free(static_cast<std::size_t>(scheme.dimension()), true);
  if (start) return solve(p, spec, config, *start, free);
  // Start at the null model so non-convex kinds stay on the branch a path
  // would follow.
  return solve(p, spec, config, null_fit_impl(p, config).beta, free);
}

double kkt_residual(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                    const Likelihood& likelihood, const PenaltySpec& spec,
                    const Eigen::VectorXd& beta, bool penalize_intercept) {
  const LikelihoodEval ev = evaluate_likelihood(scheme, beta, w, likelihood, true);
  const Eigen::Index offset = (scheme.has_intercept() && !penalize_intercept) ? 1 : 0;
  return kkt_impl(ev.gradient, spec, beta, offset, scheme.area(), nullptr);
}

FitResult null_fit(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                   const Likelihood& likelihood, const SolverConfig& config) {
  config.validate();
  return null_fit_impl(make_problem(scheme, w, likelihood, config), config);
}

double lambda_max(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                  const Likelihood& likelihood, const PenaltySpec& spec_template,
                  const SolverConfig& config) {
  config.validate();
  const Problem p = make_problem(scheme, w, likelihood, config);
  return lambda_max_impl(p, spec_template, null_fit_impl(p, config));
}

std::vector<double> lambda_grid(double lmax, const LambdaPathConfig& config) {
  if (!(lmax > 0.0) || !std::isfinite(lmax)) throw ParameterError("lambda_max must be positive");
  std::vector<double> grid(config.n_lambda);
  if (config.n_lambda == 1) {
    grid[0] = lmax;
    return grid;
  }
  const double step = std::log(config.lambda_min_ratio) / static_cast<double>(config.n_lambda - 1);
  for (std::size_t k = 0; k < config.n_lambda; ++k) {
    grid[k] = lmax * std::exp(step * static_cast<double>(k));
  }
  return grid;
}

std::vector<FitResult> lambda_path(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                                   const Likelihood& likelihood, const PenaltySpec& spec_template,
                                   const SolverConfig& config) {
  config.validate();
  const Problem p = make_problem(scheme, w, likelihood, config);
  const FitResult null = null_fit_impl(p, config);
  const std::vector<double> grid = lambda_grid(lambda_max_impl(p, spec_template, null), config.lambda_path);
  std::vector<bool> free(static_cast<std::size_t>(scheme.dimension()), true);
  std::vector<FitResult> path;
  path.reserve(grid.size());
  Eigen::VectorXd warm = null.beta;
  for (double lam : grid) {
    path.push_back(solve(p, spec_template.with_lambda(lam), config, warm, free));
    warm = path.back().beta;
  }
  return path;
}

Eigen::VectorXd compute_wpl_weights(const Eigen::VectorXd& rho, const PairCorrelation& g,
                                    double radius) {
  if (!(radius > 0.0)) throw ParameterError("WPL truncation radius must be positive");
  if (!rho.allFinite() || (rho.array() < 0.0).any()) {
    throw ParameterError("intensity values must be finite and non-negative");
  }
  if (g.is_poisson()) return Eigen::VectorXd::Ones(rho.size());
  const double k = g.excess_integral(radius);
  Eigen::VectorXd w(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    const double denom = 1.0 + rho(i) * k;
    if (!(denom > 0.0)) throw DomainError("WPL weight denominator is not positive (strong inhibition)");
    w(i) = 1.0 / denom;
  }
  return w;
}

Eigen::VectorXd compute_wpl_weights(const QuadratureScheme& scheme, const IntensityModel& model,
                                    const PairCorrelation& g, double radius) {
  Eigen::VectorXd rho(static_cast<Eigen::Index>(scheme.size()));
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    rho(static_cast<Eigen::Index>(i)) = model.intensity(scheme.points()[i]);
  }
  return compute_wpl_weights(rho, g, radius);
}

Eigen::VectorXd fitted_intensity(const QuadratureScheme& scheme, const Eigen::VectorXd& beta) {
  if (beta.size() != scheme.dimension()) throw ParameterError("coefficient length does not match the design");
  return (scheme.design() * beta).array().min(kEtaClamp).exp().matrix();
}

}  // namespace ppreg
