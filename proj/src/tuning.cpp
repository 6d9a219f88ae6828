#include "ppreg/tuning.hpp"

#include <cmath>

#include "ppreg/error.hpp"

namespace ppreg {

double wqbic(double loglik, std::size_t s, double domain_area) {
  if (!(domain_area > 1.0)) throw ParameterError("WQBIC needs a domain area greater than 1");
  return -2.0 * loglik + static_cast<double>(s) * std::log(domain_area);
}

PathSelection select_lambda(std::vector<PathRecord> records, double domain_area) {
  if (records.empty()) throw ParameterError("cannot select from an empty path");
  PathSelection out;
  bool found = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    r.wqbic = wqbic(r.loglik, r.s, domain_area);
    if (!r.converged || !std::isfinite(r.wqbic)) continue;
    const auto& best = records[out.chosen];
    if (!found || r.wqbic < best.wqbic || (r.wqbic == best.wqbic && r.lambda > best.lambda)) {
      out.chosen = i;
      found = true;
    }
  }
  if (!found) throw NumericalError("no converged fit on the lambda path");
  out.records = std::move(records);
  return out;
}

PathSelection select_lambda(const std::vector<FitResult>& path, const QuadratureScheme& scheme,
                            const Eigen::VectorXd& w, const Likelihood& likelihood) {
  std::vector<PathRecord> records;
  records.reserve(path.size());
  for (const auto& fit : path) {
    PathRecord r;
    r.lambda = fit.lambda;
    r.loglik = evaluate_likelihood(scheme, fit.beta, w, likelihood, false).value;
    r.s = fit.support.size();
    r.converged = fit.converged;
    records.push_back(r);
  }
  return select_lambda(std::move(records), scheme.area());
}

namespace {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what());
  }
}

}  // namespace

AdaptiveFit fit_adaptive(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                         const Likelihood& likelihood, PenaltyKind base_kind,
                         const SolverConfig& config, std::optional<double> gamma) {
  if (base_kind != PenaltyKind::adaptive_lasso && base_kind != PenaltyKind::adaptive_enet) {
    throw ParameterError("fit_adaptive needs adaptive_lasso or adaptive_enet");
  }
  AdaptiveFit out;
  staged("ridge stage", [&] {
    const auto path = lambda_path(scheme, w, likelihood, PenaltySpec(PenaltyKind::ridge, 0.0), config);
    out.ridge_selection = select_lambda(path, scheme, w, likelihood);
    out.ridge_beta = path[out.ridge_selection.chosen].beta;
    return 0;
  });
  const Eigen::Index offset = (scheme.has_intercept() && !config.penalize_intercept) ? 1 : 0;
  const AdaptiveLambdas al = adaptive_lambdas(1.0, out.ridge_beta.tail(out.ridge_beta.size() - offset));
  out.multipliers = al.lambdas;
  out.capped = al.capped;
  staged("adaptive stage", [&] {
    const PenaltySpec spec(base_kind, 0.0, gamma, out.multipliers);
    const auto path = lambda_path(scheme, w, likelihood, spec, config);
    out.selection = select_lambda(path, scheme, w, likelihood);
    out.fit = path[out.selection.chosen];
    return 0;
  });
  return out;
}

SelectedFit fit_selected(const QuadratureScheme& scheme, const Eigen::VectorXd& w,
                         const Likelihood& likelihood, PenaltyKind kind, const SolverConfig& config,
                         std::optional<double> gamma) {
  SelectedFit out;
  if (kind == PenaltyKind::adaptive_lasso || kind == PenaltyKind::adaptive_enet) {
    AdaptiveFit a = fit_adaptive(scheme, w, likelihood, kind, config, gamma);
    out.fit = std::move(a.fit);
    out.selection = std::move(a.selection);
    out.multipliers = std::move(a.multipliers);
    return out;
  }
  const auto path = lambda_path(scheme, w, likelihood, PenaltySpec(kind, 0.0, gamma), config);
  out.selection = select_lambda(path, scheme, w, likelihood);
  out.fit = path[out.selection.chosen];
  return out;
}

}  // namespace ppreg
