#include "ppreg/study.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "ppreg/error.hpp"
#include "ppreg/io.hpp"
#include "ppreg/tuning.hpp"

namespace ppreg {

std::string to_string(ExtraSource source) {
  return source == ExtraSource::gaussian_white_noise ? "gaussian_white_noise" : "real_grids";
}

ExtraSource extra_source_from_string(const std::string& name) {
  if (name == "gaussian_white_noise") return ExtraSource::gaussian_white_noise;
  if (name == "real_grids") return ExtraSource::real_grids;
  throw ParameterError("unknown extra-covariate source '" + name + "'");
}

void ScenarioSpec::validate() const {
  if (beta_true.empty()) throw ParameterError("scenario needs at least one true covariate");
  if (beta_true.size() > n_covariates) throw ParameterError("more true coefficients than covariates");
  for (double b : beta_true) {
    if (b == 0.0 || !std::isfinite(b)) throw ParameterError("true coefficients must be finite and nonzero");
  }
  if (!(collinearity >= 0.0 && collinearity < 1.0)) throw ParameterError("collinearity must lie in [0, 1)");
  if (grid_cols < 2 || grid_rows < 2) throw ParameterError("scenario grid needs at least 2 x 2 cells");
  if (!(omega > 0.0)) throw ParameterError("omega must be positive");
  if (!(target_count > 0.0)) throw ParameterError("target count must be positive");
  if (wpl_radius < 0.0) throw ParameterError("wpl_radius must be non-negative");
  if (extras == ExtraSource::real_grids && grid_dir.empty() && n_covariates > beta_true.size()) {
    throw ParameterError("real_grids extras need grid_dir");
  }
}

Eigen::MatrixXd collinearity_matrix(const ScenarioSpec& spec) {
  const auto p = static_cast<Eigen::Index>(spec.n_covariates);
  const auto s = static_cast<Eigen::Index>(spec.beta_true.size());
  Eigen::MatrixXd omega(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      omega(i, j) = i == j ? 1.0 : std::pow(spec.collinearity, static_cast<double>(std::abs(i - j)));
      if (i != j && i < s && j < s) omega(i, j) = 0.0;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) throw ParameterError("collinearity matrix is not positive definite");
  return omega;
}

namespace {

struct SmoothField {
  std::vector<double> value;
  std::vector<double> gradient;
};

// Sum of random plane waves with log-uniform wavelengths and amplitude
// proportional to wavelength, evaluated with its analytic gradient.
SmoothField smooth_field(std::size_t n_cols, std::size_t n_rows, const Window& win, Rng& rng,
                         double min_wavelength, double max_wavelength, int modes) {
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  for (int m = 0; m < modes; ++m) {
    const double len = min_wavelength * std::pow(max_wavelength / min_wavelength, rng.uniform());
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double k = 2.0 * std::numbers::pi / len;
    waves.push_back({k * std::cos(theta), k * std::sin(theta), rng.uniform(0.0, 2.0 * std::numbers::pi),
                     len * (0.5 + rng.uniform())});
  }
  const RasterGrid geo(n_cols, n_rows, win, std::vector<double>(n_cols * n_rows, 0.0));
  SmoothField f;
  f.value.resize(geo.n_cells());
  f.gradient.resize(geo.n_cells());
  for (std::size_t c = 0; c < geo.n_cells(); ++c) {
    const Point u = geo.cell_center(c);
    double v = 0.0, gx = 0.0, gy = 0.0;
    for (const auto& w : waves) {
      const double arg = w.kx * u.x + w.ky * u.y + w.phase;
      v += w.amp * std::cos(arg);
      gx -= w.amp * w.kx * std::sin(arg);
      gy -= w.amp * w.ky * std::sin(arg);
    }
    f.value[c] = v;
    f.gradient[c] = std::hypot(gx, gy);
  }
  return f;
}

void standardize_column(Eigen::Ref<Eigen::VectorXd> col) {
  const double mean = col.mean();
  col.array() -= mean;
  const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(col.size()));
  if (!(sd > 0.0)) throw DataError("scenario covariate is constant");
  col /= sd;
}

}  // namespace

Scenario build_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t p = spec.n_covariates;
  const std::size_t s = spec.beta_true.size();
  const std::size_t nc = spec.grid_cols, nr = spec.grid_rows;
  const auto n_cells = static_cast<Eigen::Index>(nc * nr);
  Rng master(seed);
  Eigen::MatrixXd x(n_cells, static_cast<Eigen::Index>(p));

  // True covariates.
  Rng terrain = master.split(0);
  const SmoothField elev = smooth_field(nc, nr, spec.window, terrain, 150.0, 1000.0, 12);
  for (std::size_t j = 0; j < s; ++j) {
    std::vector<double> values;
    if (j == 0) {
      values = elev.value;
    } else if (j == 1) {
      values = elev.gradient;
    } else {
      Rng soil = master.split(100 + j);
      const SmoothField coarse = smooth_field(50, 25, spec.window, soil, 100.0, 600.0, 10);
      const RasterGrid g(50, 25, spec.window, coarse.value);
      values = resample_grid(g, nc, nr).values();
    }
    x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(values.data(), n_cells);
    standardize_column(x.col(static_cast<Eigen::Index>(j)));
  }

  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::MatrixXd z;
  if (spec.extras == ExtraSource::gaussian_white_noise) {
    Rng noise = master.split(1);
    for (std::size_t j = s; j < p; ++j) {
      for (Eigen::Index c = 0; c < n_cells; ++c) x(c, static_cast<Eigen::Index>(j)) = noise.normal();
    }
    omega = collinearity_matrix(spec);
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(omega).matrixL();
    // Row-wise z(u) = L x(u).
    z = x * l.transpose();
  } else {
    if (p > s) {
      const CovariateStack real = load_covariate_dir(spec.grid_dir, false, MissingPolicy::mean_impute);
      if (real.n_covariates() < p - s) {
        std::ostringstream msg;
        msg << "grid_dir '" << spec.grid_dir.string() << "' holds " << real.n_covariates()
            << " grids but the scenario needs " << (p - s);
        throw DataError(msg.str());
      }
      if (!same_window(real.window(), spec.window)) {
        throw DataError("grid_dir covariates do not cover the scenario window");
      }
      for (std::size_t j = s; j < p; ++j) {
        const RasterGrid g = resample_grid(real.grids()[j - s], nc, nr);
        x.col(static_cast<Eigen::Index>(j)) =
            Eigen::Map<const Eigen::VectorXd>(g.values().data(), n_cells);
      }
    }
    z = x;
  }
  for (Eigen::Index j = 0; j < z.cols(); ++j) standardize_column(z.col(j));

  std::vector<RasterGrid> grids;
  grids.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = z.col(static_cast<Eigen::Index>(j));
    grids.emplace_back(nc, nr, spec.window, std::vector<double>(col.data(), col.data() + n_cells),
                       "z" + std::to_string(j + 1));
  }
  CovariateStack stack(std::move(grids), true);
  Eigen::VectorXd rest = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < s; ++j) rest(static_cast<Eigen::Index>(j)) = spec.beta_true[j];
  Eigen::VectorXd beta0(static_cast<Eigen::Index>(p + 1));
  beta0(0) = calibrate_intercept(stack, rest, spec.target_count);
  beta0.tail(static_cast<Eigen::Index>(p)) = rest;
  IntensityModel model(stack, beta0);
  return Scenario{std::move(stack), std::move(beta0), std::move(model), std::move(omega)};
}

SelectionMetrics selection_metrics(const std::vector<std::size_t>& true_support,
                                   const std::vector<std::size_t>& estimated_support, std::size_t p) {
  const std::set<std::size_t> truth(true_support.begin(), true_support.end());
  const std::set<std::size_t> est(estimated_support.begin(), estimated_support.end());
  for (std::size_t j : truth) {
    if (j < 1 || j > p) throw ParameterError("true support index outside 1..p");
  }
  for (std::size_t j : est) {
    if (j < 1 || j > p) throw ParameterError("estimated support index outside 1..p");
  }
  std::size_t hits = 0;
  for (std::size_t j : est) hits += truth.count(j);
  const std::size_t false_pos = est.size() - hits;
  SelectionMetrics m;
  m.tpr = truth.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
  m.fpr = p > truth.size() ? 100.0 * static_cast<double>(false_pos) / static_cast<double>(p - truth.size()) : 0.0;
  m.ppv = est.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(est.size());
  return m;
}

PredictionMetrics prediction_metrics(const Eigen::MatrixXd& betas, const Eigen::VectorXd& beta0) {
  if (betas.rows() < 2) throw ParameterError("prediction metrics need at least 2 replicates");
  if (betas.cols() != beta0.size()) throw ParameterError("replicate coefficients do not match beta0");
  const double r = static_cast<double>(betas.rows());
  const Eigen::VectorXd mean = betas.colwise().sum().transpose() / r;
  const Eigen::MatrixXd centered = betas.rowwise() - mean.transpose();
  const Eigen::MatrixXd err = betas.rowwise() - beta0.transpose();
  PredictionMetrics m;
  m.bias = std::sqrt((mean - beta0).squaredNorm());
  m.sd = std::sqrt(centered.array().square().sum() / r);
  m.rmse = std::sqrt(err.array().square().sum() / r);
  return m;
}

std::string StudyReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "method,penalty,likelihood,weights,kappa,TPR,FPR,PPV,Bias,SD,RMSE,n_ok,n_failed\n";
  for (const auto& r : rows) {
    out << r.method << "," << r.penalty << "," << r.likelihood << "," << r.weights << "," << r.kappa
        << "," << r.selection.tpr << "," << r.selection.fpr << "," << r.selection.ppv << ","
        << r.prediction.bias << "," << r.prediction.sd << "," << r.prediction.rmse << "," << r.n_ok
        << "," << r.n_failed << "\n";
  }
  return out.str();
}

namespace {

struct MethodOutcome {
  bool ok = false;
  std::vector<std::size_t> support;  // 1-based covariate numbers
  Eigen::VectorXd beta;              // p non-intercept coefficients
};

struct ReplicateOutcome {
  std::size_t n_points = 0;
  std::vector<MethodOutcome> methods;
};

ReplicateOutcome run_replicate(const StudyConfig& cfg, const Scenario& sc, const ThomasParams& params,
                               Rng rng) {
  ReplicateOutcome out;
  out.methods.resize(cfg.methods.size());
  const PointPattern pattern = simulate_thomas(sc.model, params, rng);
  out.n_points = pattern.size();
  const QuadratureScheme scheme =
      build_scheme(pattern, sc.stack, cfg.scenario.grid_cols, cfg.scenario.grid_rows);
  const Eigen::VectorXd ones = unit_weights(scheme);
  std::optional<Eigen::VectorXd> wpl;
  const double radius = cfg.scenario.wpl_radius > 0.0 ? cfg.scenario.wpl_radius : 4.0 * params.omega;
  const auto p = static_cast<Eigen::Index>(cfg.scenario.n_covariates);

  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    const MethodSpec& method = cfg.methods[m];
    try {
      const Likelihood lik = method.likelihood == LikelihoodKind::poisson
                                 ? Likelihood::poisson()
                                 : Likelihood::logistic(scheme);
      const Eigen::VectorXd* w = &ones;
      if (method.wpl) {
        if (!wpl) {
          // Pilot intensity from the unpenalized Poisson fit.
          const FitResult pilot = fit_penalized(scheme, ones, Likelihood::poisson(),
                                                PenaltySpec(PenaltyKind::lasso, 0.0), cfg.solver);
          wpl = compute_wpl_weights(fitted_intensity(scheme, pilot.beta),
                                    PairCorrelation::thomas(params), radius);
        }
        w = &*wpl;
      }
      const SelectedFit sel = fit_selected(scheme, *w, lik, method.penalty, cfg.solver, method.gamma);
      MethodOutcome& o = out.methods[m];
      o.beta = sel.fit.beta.tail(p);
      for (std::size_t j : sel.fit.support) o.support.push_back(j);  // design index == covariate number
      o.ok = true;
    } catch (const Error&) {
      out.methods[m].ok = false;
    }
  }
  return out;
}

}  // namespace

StudyReport run_study(const StudyConfig& cfg) {
  cfg.scenario.validate();
  cfg.solver.validate();
  if (cfg.scenario.replicates == 0) throw ParameterError("study needs at least one replicate");
  if (cfg.methods.empty()) throw ParameterError("study needs at least one method");
  if (cfg.kappas.empty()) throw ParameterError("study needs at least one kappa");
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = build_scenario(cfg.scenario, Rng(cfg.seed).split(0).key());
  const std::size_t p = cfg.scenario.n_covariates;
  std::vector<std::size_t> truth;
  for (std::size_t j = 1; j <= cfg.scenario.beta_true.size(); ++j) truth.push_back(j);
  const Eigen::VectorXd beta0 = sc.beta0.tail(static_cast<Eigen::Index>(p));

  StudyReport report;
  report.replicates = cfg.scenario.replicates;
  const unsigned threads = std::max(1u, cfg.threads);
  for (std::size_t k = 0; k < cfg.kappas.size(); ++k) {
    ThomasParams params{cfg.kappas[k], cfg.scenario.omega, 1.0};
    params.validate();
    const Rng stream = Rng(cfg.seed).split(1 + k);
    const std::size_t n_rep = cfg.scenario.replicates;
    std::vector<ReplicateOutcome> outcomes(n_rep);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (std::size_t r = next++; r < n_rep; r = next++) {
        try {
          outcomes[r] = run_replicate(cfg, sc, params, stream.split(r));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < std::min<std::size_t>(threads, n_rep); ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    double total_points = 0.0;
    for (const auto& o : outcomes) total_points += static_cast<double>(o.n_points);
    report.mean_points.push_back(total_points / static_cast<double>(n_rep));

    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      const MethodSpec& method = cfg.methods[m];
      StudyRow row;
      row.method = method.label.empty() ? to_string(method.penalty) : method.label;
      row.penalty = to_string(method.penalty);
      row.likelihood = method.likelihood == LikelihoodKind::poisson ? "poisson" : "logistic";
      row.weights = method.wpl ? "wpl" : "none";
      row.kappa = cfg.kappas[k];
      std::vector<const MethodOutcome*> ok;
      for (const auto& o : outcomes) {
        if (o.methods[m].ok) ok.push_back(&o.methods[m]);
      }
      row.n_ok = ok.size();
      row.n_failed = n_rep - ok.size();
      if (!ok.empty()) {
        for (const auto* o : ok) {
          const SelectionMetrics s = selection_metrics(truth, o->support, p);
          row.selection.tpr += s.tpr;
          row.selection.fpr += s.fpr;
          row.selection.ppv += s.ppv;
        }
        const double n = static_cast<double>(ok.size());
        row.selection.tpr /= n;
        row.selection.fpr /= n;
        row.selection.ppv /= n;
      }
      if (ok.size() >= 2) {
        Eigen::MatrixXd betas(static_cast<Eigen::Index>(ok.size()), static_cast<Eigen::Index>(p));
        for (std::size_t i = 0; i < ok.size(); ++i) betas.row(static_cast<Eigen::Index>(i)) = ok[i]->beta.transpose();
        row.prediction = prediction_metrics(betas, beta0);
      } else {
        row.prediction = {std::nan(""), std::nan(""), std::nan("")};
      }
      report.rows.push_back(std::move(row));
    }
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace ppreg
