#include "ppreg/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "ppreg/error.hpp"
#include "ppreg/inference.hpp"
#include "ppreg/simulate.hpp"
#include "ppreg/tuning.hpp"

namespace ppreg {

using nlohmann::json;

namespace {

const json& section(const json& config, const char* name) {
  if (!config.contains(name) || !config[name].is_object()) {
    throw ParameterError(std::string("config is missing the '") + name + "' table");
  }
  return config[name];
}

CovariateStack restack(const CovariateStack& stack, bool intercept) {
  return CovariateStack(stack.grids(), intercept);
}

std::vector<std::string> design_names(const CovariateStack& stack) {
  std::vector<std::string> names;
  if (stack.includes_intercept()) names.emplace_back("(Intercept)");
  for (const auto& g : stack.grids()) names.push_back(g.name());
  return names;
}

LikelihoodKind likelihood_kind(const std::string& name) {
  if (name == "poisson") return LikelihoodKind::poisson;
  if (name == "logistic") return LikelihoodKind::logistic;
  throw ParameterError("unknown likelihood '" + name + "' (expected poisson or logistic)");
}

std::string to_string(LikelihoodKind k) { return k == LikelihoodKind::poisson ? "poisson" : "logistic"; }

std::optional<double> gamma_of(const json& penalty) {
  if (!penalty.contains("gamma") || penalty["gamma"].is_null()) return std::nullopt;
  if (!penalty["gamma"].is_number()) throw ParameterError("penalty.gamma must be a number");
  return penalty["gamma"].get<double>();
}

struct PairModel {
  PairCorrelation g = PairCorrelation::poisson();
  double radius = 0.0;
};

PairModel pair_model(const json& model) {
  const json& pc = model.at("pair_correlation");
  const std::string kind = pc.at("kind").get<std::string>();
  PairModel out;
  if (kind == "poisson") return out;
  if (kind != "thomas") throw ParameterError("unknown pair_correlation.kind '" + kind + "'");
  ThomasParams params{pc.at("kappa").get<double>(), pc.at("omega").get<double>(), 1.0};
  if (!(params.kappa > 0.0) || !(params.omega > 0.0)) {
    throw ParameterError("thomas pair correlation needs positive kappa and omega");
  }
  out.g = PairCorrelation::thomas(params);
  const double r = pc.at("radius").get<double>();
  out.radius = r > 0.0 ? r : 4.0 * params.omega;
  return out;
}

Likelihood make_likelihood(const json& model, const QuadratureScheme& scheme, double* delta_used) {
  const LikelihoodKind kind = likelihood_kind(model.at("likelihood").get<std::string>());
  if (kind == LikelihoodKind::poisson) {
    *delta_used = 0.0;
    return Likelihood::poisson();
  }
  Likelihood lik = Likelihood::logistic(scheme, model.at("delta").get<double>());
  *delta_used = lik.delta(0);
  return lik;
}

Eigen::VectorXd make_weights(const json& model, const QuadratureScheme& scheme, const SolverConfig& solver,
                             json& diagnostics) {
  const std::string kind = model.at("weights").get<std::string>();
  if (kind == "none") return unit_weights(scheme);
  if (kind != "wpl") throw ParameterError("unknown weights '" + kind + "' (expected none or wpl)");
  const PairModel pm = pair_model(model);
  if (pm.g.is_poisson()) return unit_weights(scheme);
  // Pilot intensity: unpenalized Poisson fit.
  const FitResult pilot = fit_penalized(scheme, unit_weights(scheme), Likelihood::poisson(),
                                        PenaltySpec(PenaltyKind::lasso, 0.0), solver);
  diagnostics["wpl_pilot_converged"] = pilot.converged;
  diagnostics["wpl_radius"] = pm.radius;
  return compute_wpl_weights(fitted_intensity(scheme, pilot.beta), pm.g, pm.radius);
}

json selection_json(const PathSelection& sel) {
  json recs = json::array();
  for (const auto& r : sel.records) {
    recs.push_back({{"lambda", r.lambda}, {"loglik", r.loglik}, {"s", r.s}, {"converged", r.converged},
                    {"wqbic", r.wqbic}});
  }
  return {{"chosen", sel.chosen}, {"records", recs}};
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const json& arr) {
  const auto v = arr.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct Prepared {
  CovariateStack stack;
  QuadratureScheme scheme;
  SolverConfig solver;
  Likelihood lik;
  double delta = 0.0;
  Eigen::VectorXd w;
  json diagnostics = json::object();
};

Prepared prepare(const PointPattern& pattern, const CovariateStack& stack0, const json& config) {
  const json& data = section(config, "data");
  CovariateStack stack = restack(stack0, data.at("intercept").get<bool>());
  QuadratureScheme scheme = scheme_from_config(pattern, stack, config);
  SolverConfig solver = solver_config_from_json(section(config, "solver"));
  const json& model = section(config, "model");
  double delta = 0.0;
  Likelihood lik = make_likelihood(model, scheme, &delta);
  json diag = json::object();
  Eigen::VectorXd w = make_weights(model, scheme, solver, diag);
  diag["n_points"] = pattern.size();
  diag["n_quadrature"] = scheme.size();
  return Prepared{std::move(stack), std::move(scheme), solver, std::move(lik), delta, std::move(w), diag};
}

}  // namespace

SolverConfig solver_config_from_json(const json& s) {
  SolverConfig c;
  c.tol = s.at("tol").get<double>();
  c.max_outer = s.at("max_outer").get<int>();
  c.max_inner = s.at("max_inner").get<int>();
  const auto n_lambda = s.at("n_lambda").get<std::int64_t>();
  if (n_lambda < 1) throw ParameterError("solver.n_lambda must be >= 1");
  c.lambda_path.n_lambda = static_cast<std::size_t>(n_lambda);
  c.lambda_path.lambda_min_ratio = s.at("lambda_min_ratio").get<double>();
  c.penalize_intercept = s.at("penalize_intercept").get<bool>();
  c.standardize_internally = s.at("standardize").get<bool>();
  c.validate();
  return c;
}

json to_json(const SolverConfig& c) {
  return {{"tol", c.tol},
          {"max_outer", c.max_outer},
          {"max_inner", c.max_inner},
          {"n_lambda", c.lambda_path.n_lambda},
          {"lambda_min_ratio", c.lambda_path.lambda_min_ratio},
          {"penalize_intercept", c.penalize_intercept},
          {"standardize", c.standardize_internally}};
}

QuadratureScheme scheme_from_config(const PointPattern& pattern, const CovariateStack& stack,
                                    const json& config) {
  const json& q = section(config, "quadrature");
  auto nx = q.at("nx").get<std::int64_t>();
  auto ny = q.at("ny").get<std::int64_t>();
  if (nx < 0 || ny < 0) throw ParameterError("quadrature.nx / ny must be non-negative");
  const auto def = default_dummy_grid(stack);
  return build_scheme(pattern, stack, nx ? static_cast<std::size_t>(nx) : def.first,
                      ny ? static_cast<std::size_t>(ny) : def.second);
}

FitRecord run_fit(const PointPattern& pattern, const CovariateStack& stack0, const json& config) {
  Prepared pr = prepare(pattern, stack0, config);
  const json& penalty = section(config, "penalty");
  const PenaltyKind kind = penalty_kind_from_string(penalty.at("kind").get<std::string>());
  const std::optional<double> gamma = gamma_of(penalty);
  const bool adaptive = kind == PenaltyKind::adaptive_lasso || kind == PenaltyKind::adaptive_enet;

  FitRecord rec;
  rec.names = design_names(pr.stack);
  rec.has_intercept = pr.stack.includes_intercept();
  rec.likelihood = pr.lik.kind;
  rec.delta = pr.delta;
  rec.weights = section(config, "model").at("weights").get<std::string>();
  rec.window = pr.stack.window();
  rec.config = config;
  rec.diagnostics = pr.diagnostics;

  const json& lam = penalty.at("lambda");
  if (lam.is_string()) {
    if (lam.get<std::string>() != "auto") throw ParameterError("penalty.lambda must be a number or \"auto\"");
    SelectedFit sel = fit_selected(pr.scheme, pr.w, pr.lik, kind, pr.solver, gamma);
    rec.fit = std::move(sel.fit);
    rec.spec = PenaltySpec(kind, rec.fit.lambda, gamma, sel.multipliers);
    rec.diagnostics["selection"] = selection_json(sel.selection);
  } else {
    std::vector<double> mult;
    if (adaptive) {
      AdaptiveFit stage = fit_adaptive(pr.scheme, pr.w, pr.lik, kind, pr.solver, gamma);
      mult = stage.multipliers;
    }
    rec.spec = PenaltySpec(kind, lam.get<double>(), gamma, mult);
    rec.fit = fit_penalized(pr.scheme, pr.w, pr.lik, rec.spec, pr.solver);
  }
  rec.diagnostics["n_outer"] = rec.fit.n_outer;
  rec.diagnostics["n_inner"] = rec.fit.n_inner;
  rec.diagnostics["kkt"] = rec.fit.kkt;
  rec.diagnostics["overflow_warnings"] = rec.fit.overflow_warnings;
  return rec;
}

json run_path(const PointPattern& pattern, const CovariateStack& stack0, const json& config) {
  Prepared pr = prepare(pattern, stack0, config);
  const json& penalty = section(config, "penalty");
  const PenaltyKind kind = penalty_kind_from_string(penalty.at("kind").get<std::string>());
  const std::optional<double> gamma = gamma_of(penalty);
  std::vector<double> mult;
  if (kind == PenaltyKind::adaptive_lasso || kind == PenaltyKind::adaptive_enet) {
    mult = fit_adaptive(pr.scheme, pr.w, pr.lik, kind, pr.solver, gamma).multipliers;
  }
  const PenaltySpec spec(kind, 0.0, gamma, mult);
  const std::vector<FitResult> path = lambda_path(pr.scheme, pr.w, pr.lik, spec, pr.solver);
  json entries = json::array();
  for (const auto& f : path) {
    entries.push_back({{"lambda", f.lambda},
                       {"loglik", f.loglik},
                       {"s", f.support.size()},
                       {"converged", f.converged},
                       {"objective", f.objective},
                       {"beta", to_vector(f.beta)}});
  }
  return {{"area", pr.scheme.area()},
          {"names", design_names(pr.stack)},
          {"penalty", {{"kind", to_string(kind)}, {"gamma", spec.gamma()}, {"multipliers", mult}}},
          {"likelihood", {{"kind", to_string(pr.lik.kind)}, {"delta", pr.delta}}},
          {"entries", entries},
          {"diagnostics", pr.diagnostics},
          {"config", config}};
}

json select_from_path(const json& doc) {
  if (!doc.is_object() || !doc.contains("entries") || !doc.contains("area")) {
    throw DataError("path document needs 'entries' and 'area'");
  }
  std::vector<PathRecord> records;
  try {
    for (const auto& e : doc.at("entries")) {
      PathRecord r;
      r.lambda = e.at("lambda").get<double>();
      r.loglik = e.at("loglik").get<double>();
      r.s = e.at("s").get<std::size_t>();
      r.converged = e.at("converged").get<bool>();
      records.push_back(r);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed path entry: ") + e.what());
  }
  const PathSelection sel = select_lambda(std::move(records), doc.at("area").get<double>());
  json out = selection_json(sel);
  const json& chosen = doc["entries"][sel.chosen];
  out["lambda"] = chosen["lambda"];
  out["beta"] = chosen["beta"];
  if (doc.contains("names")) out["names"] = doc["names"];
  return out;
}

json run_standard_errors(const FitRecord& fit, const CovariateStack& stack0, const json& config) {
  const CovariateStack stack = restack(stack0, fit.has_intercept);
  if (static_cast<Eigen::Index>(stack.dimension()) != fit.fit.beta.size()) {
    throw DataError("covariates do not match the fit (different number of columns)");
  }
  if (!same_window(stack.window(), fit.window)) throw DataError("covariate window does not match the fit");
  const json& model = section(config, "model");
  const PairModel pm = pair_model(model);
  SandwichOptions opt;
  opt.likelihood = fit.likelihood;
  opt.delta = fit.delta;
  opt.kernel_subsamples = config.at("kernel_subsamples").get<int>();
  if (fit.has_intercept) opt.indices.push_back(0);
  for (std::size_t j : fit.fit.support) opt.indices.push_back(j);
  if (opt.indices.empty()) throw DataError("fit has an empty support");
  if (fit.weights == "wpl" && !pm.g.is_poisson()) {
    const double k = pm.g.excess_integral(pm.radius);
    const Eigen::VectorXd eta = stack.design_matrix() * fit.fit.beta;
    opt.cell_weights = (1.0 / (1.0 + eta.array().min(kEtaClamp).exp() * k)).matrix();
  }
  const SandwichMatrices mats = compute_abc(stack, fit.fit.beta, pm.g, opt);
  bool penalize_intercept = false;
  if (fit.config.contains("solver") && fit.config["solver"].contains("penalize_intercept")) {
    penalize_intercept = fit.config["solver"]["penalize_intercept"].get<bool>();
  }
  const std::size_t first = (fit.has_intercept && !penalize_intercept) ? 1 : 0;
  const CovarianceEstimate est =
      compute_sigma(mats, fit.spec, fit.fit.beta, stack.window().area(), first, fit.names);
  json coefs = json::array();
  json sigma = json::array();
  for (std::size_t i = 0; i < est.support.size(); ++i) {
    const std::size_t j = est.support[i];
    const double b = fit.fit.beta(static_cast<Eigen::Index>(j));
    const double se = est.standard_errors(static_cast<Eigen::Index>(i));
    coefs.push_back({{"name", fit.names.at(j)}, {"index", j}, {"estimate", b}, {"se", se},
                     {"z", se > 0.0 ? b / se : std::nan("")}});
    sigma.push_back(to_vector(est.sigma.row(static_cast<Eigen::Index>(i)).transpose()));
  }
  return {{"coefficients", coefs},
          {"sigma", sigma},
          {"pi", to_vector(est.pi)},
          {"condition_number", est.condition_number},
          {"config", config}};
}

RasterGrid intensity_surface(const FitRecord& fit, const CovariateStack& stack0) {
  const CovariateStack stack = restack(stack0, fit.has_intercept);
  if (static_cast<Eigen::Index>(stack.dimension()) != fit.fit.beta.size()) {
    throw DataError("covariates do not match the fit (different number of columns)");
  }
  const Eigen::VectorXd eta = stack.design_matrix() * fit.fit.beta;
  std::vector<double> values(stack.n_cells());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::exp(eta(static_cast<Eigen::Index>(i)));
  return RasterGrid(stack.n_cols(), stack.n_rows(), stack.window(), std::move(values), "intensity");
}

PointPattern simulate_from_config(const CovariateStack& stack0, const json& config, std::uint64_t seed) {
  const json& model = section(config, "model");
  const CovariateStack stack = restack(stack0, true);
  const Eigen::VectorXd rest = to_eigen(model.at("beta"));
  if (static_cast<std::size_t>(rest.size()) != stack.n_covariates()) {
    std::ostringstream msg;
    msg << "model.beta has " << rest.size() << " entries but there are " << stack.n_covariates()
        << " covariates";
    throw ParameterError(msg.str());
  }
  Eigen::VectorXd beta(rest.size() + 1);
  beta.tail(rest.size()) = rest;
  const json& icpt = model.at("intercept");
  if (icpt.is_string()) {
    if (icpt.get<std::string>() != "auto") throw ParameterError("model.intercept must be a number or \"auto\"");
    beta(0) = calibrate_intercept(stack, rest, model.at("target_count").get<double>());
  } else {
    beta(0) = icpt.get<double>();
  }
  const IntensityModel im(stack, beta);
  const std::string process = model.at("process").get<std::string>();
  if (process == "poisson") return simulate_poisson(im, seed);
  if (process == "thomas") {
    ThomasParams params{model.at("kappa").get<double>(), model.at("omega").get<double>(), 1.0};
    return simulate_thomas(im, params, seed);
  }
  throw ParameterError("unknown model.process '" + process + "' (expected poisson or thomas)");
}

StudyConfig study_config_from_json(const json& config, std::uint64_t seed, unsigned threads) {
  StudyConfig c;
  const json& s = section(config, "scenario");
  c.scenario.name = s.at("name").get<std::string>();
  c.scenario.n_covariates = s.at("n_covariates").get<std::size_t>();
  c.scenario.beta_true = s.at("beta_true").get<std::vector<double>>();
  c.scenario.extras = extra_source_from_string(s.at("extras").get<std::string>());
  c.scenario.grid_dir = s.at("grid_dir").get<std::string>();
  c.scenario.collinearity = s.at("collinearity").get<double>();
  c.scenario.grid_cols = s.at("grid_cols").get<std::size_t>();
  c.scenario.grid_rows = s.at("grid_rows").get<std::size_t>();
  const auto win = s.at("window").get<std::vector<double>>();
  if (win.size() != 4) throw ParameterError("scenario.window needs [x_min, x_max, y_min, y_max]");
  c.scenario.window = Window(win[0], win[1], win[2], win[3]);
  c.scenario.omega = s.at("omega").get<double>();
  c.scenario.target_count = s.at("target_count").get<double>();
  c.scenario.replicates = s.at("replicates").get<std::size_t>();
  c.scenario.wpl_radius = s.at("wpl_radius").get<double>();
  c.kappas = config.at("kappas").get<std::vector<double>>();
  for (const auto& m : config.at("methods")) {
    MethodSpec ms;
    ms.label = m.at("label").get<std::string>();
    ms.penalty = penalty_kind_from_string(m.at("penalty").get<std::string>());
    ms.gamma = gamma_of(m);
    ms.likelihood = likelihood_kind(m.at("likelihood").get<std::string>());
    const std::string w = m.at("weights").get<std::string>();
    if (w != "none" && w != "wpl") throw ParameterError("method weights must be none or wpl");
    ms.wpl = w == "wpl";
    c.methods.push_back(ms);
  }
  c.solver = solver_config_from_json(section(config, "solver"));
  c.seed = seed;
  c.threads = threads;
  return c;
}

json to_json(const FitRecord& r) {
  std::vector<std::string> support;
  for (std::size_t j : r.fit.support) support.push_back(r.names.at(j));
  const auto w = r.window;
  return {{"names", r.names},
          {"beta", to_vector(r.fit.beta)},
          {"support", support},
          {"support_indices", r.fit.support},
          {"lambda", r.fit.lambda},
          {"objective", r.fit.objective},
          {"loglik", r.fit.loglik},
          {"converged", r.fit.converged},
          {"has_intercept", r.has_intercept},
          {"likelihood", {{"kind", to_string(r.likelihood)}, {"delta", r.delta}}},
          {"weights", r.weights},
          {"penalty",
           {{"kind", to_string(r.spec.kind())},
            {"lambda", r.spec.lambda()},
            {"gamma", r.spec.gamma()},
            {"multipliers", r.spec.multipliers()}}},
          {"window", {w.x_min(), w.x_max(), w.y_min(), w.y_max()}},
          {"diagnostics", r.diagnostics},
          {"config", r.config}};
}

FitRecord fit_from_json(const json& doc) {
  try {
    FitRecord r;
    r.names = doc.at("names").get<std::vector<std::string>>();
    r.fit.beta = to_eigen(doc.at("beta"));
    if (r.names.size() != static_cast<std::size_t>(r.fit.beta.size())) {
      throw DataError("fit document: names and beta differ in length");
    }
    r.fit.support = doc.at("support_indices").get<std::vector<std::size_t>>();
    r.fit.lambda = doc.at("lambda").get<double>();
    r.fit.objective = doc.at("objective").get<double>();
    r.fit.loglik = doc.at("loglik").get<double>();
    r.fit.converged = doc.at("converged").get<bool>();
    r.has_intercept = doc.at("has_intercept").get<bool>();
    r.likelihood = likelihood_kind(doc.at("likelihood").at("kind").get<std::string>());
    r.delta = doc.at("likelihood").at("delta").get<double>();
    r.weights = doc.at("weights").get<std::string>();
    const json& p = doc.at("penalty");
    const PenaltyKind kind = penalty_kind_from_string(p.at("kind").get<std::string>());
    std::optional<double> gamma;
    if (kind == PenaltyKind::enet || kind == PenaltyKind::adaptive_enet || kind == PenaltyKind::scad ||
        kind == PenaltyKind::mcplus) {
      gamma = p.at("gamma").get<double>();
    }
    r.spec = PenaltySpec(kind, p.at("lambda").get<double>(), gamma,
                         p.at("multipliers").get<std::vector<double>>());
    const auto w = doc.at("window").get<std::vector<double>>();
    if (w.size() != 4) throw DataError("fit document: window needs 4 numbers");
    r.window = Window(w[0], w[1], w[2], w[3]);
    r.fit.n_outer = doc.at("diagnostics").value("n_outer", 0);
    r.fit.n_inner = doc.at("diagnostics").value("n_inner", 0L);
    r.fit.kkt = doc.at("diagnostics").value("kkt", 0.0);
    r.diagnostics = doc.at("diagnostics");
    r.config = doc.value("config", json::object());
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit document: ") + e.what());
  }
}

}  // namespace ppreg
