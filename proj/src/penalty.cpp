#include "ppreg/penalty.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "ppreg/error.hpp"

namespace ppreg {

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::ridge: return "ridge";
    case PenaltyKind::lasso: return "lasso";
    case PenaltyKind::enet: return "enet";
    case PenaltyKind::adaptive_lasso: return "adaptive_lasso";
    case PenaltyKind::adaptive_enet: return "adaptive_enet";
    case PenaltyKind::scad: return "scad";
    case PenaltyKind::mcplus: return "mcplus";
  }
  return "unknown";
}

PenaltyKind penalty_kind_from_string(const std::string& name) {
  static const std::array<PenaltyKind, 7> kinds = {
      PenaltyKind::ridge, PenaltyKind::lasso, PenaltyKind::enet, PenaltyKind::adaptive_lasso,
      PenaltyKind::adaptive_enet, PenaltyKind::scad, PenaltyKind::mcplus};
  for (auto k : kinds) {
    if (to_string(k) == name) return k;
  }
  if (name == "al") return PenaltyKind::adaptive_lasso;
  if (name == "aenet") return PenaltyKind::adaptive_enet;
  if (name == "mcp" || name == "mc+") return PenaltyKind::mcplus;
  throw ParameterError("unknown penalty '" + name + "'");
}

double default_gamma(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::enet:
    case PenaltyKind::adaptive_enet: return 0.5;
    case PenaltyKind::scad: return 3.7;
    case PenaltyKind::mcplus: return 3.0;
    default: return 0.0;
  }
}

bool is_convex(PenaltyKind kind) {
  return kind != PenaltyKind::scad && kind != PenaltyKind::mcplus;
}

PenaltySpec::PenaltySpec(PenaltyKind kind, double lambda, std::optional<double> gamma,
                         std::vector<double> multipliers)
    : kind_(kind), lambda_(lambda), gamma_(gamma.value_or(default_gamma(kind))),
      multipliers_(std::move(multipliers)) {
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) {
    throw ParameterError("penalty lambda must be finite and non-negative");
  }
  for (double m : multipliers_) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw ParameterError("per-coordinate lambda multipliers must be finite and non-negative");
    }
  }
  std::ostringstream msg;
  switch (kind_) {
    case PenaltyKind::enet:
    case PenaltyKind::adaptive_enet:
      if (!(gamma_ > 0.0 && gamma_ < 1.0)) msg << to_string(kind_) << " needs 0 < gamma < 1";
      break;
    case PenaltyKind::scad:
      if (!(gamma_ > 2.0) || !std::isfinite(gamma_)) msg << "scad needs gamma > 2";
      break;
    case PenaltyKind::mcplus:
      if (!(gamma_ > 1.0) || !std::isfinite(gamma_)) msg << "mcplus needs gamma > 1";
      break;
    default: break;
  }
  if (!msg.str().empty()) {
    msg << " (got " << gamma_ << ")";
    throw ParameterError(msg.str());
  }
}

PenaltySpec PenaltySpec::with_lambda(double lambda) const {
  return PenaltySpec(kind_, lambda, gamma_, multipliers_);
}

namespace {

void require_nonnegative(double theta) {
  if (!(theta >= 0.0)) {
    std::ostringstream msg;
    msg << "penalty argument must be non-negative (got " << theta << ")";
    throw DomainError(msg.str());
  }
}

void require_positive(double theta) {
  if (!(theta > 0.0)) {
    std::ostringstream msg;
    msg << "penalty derivative needs a positive argument (got " << theta << ")";
    throw DomainError(msg.str());
  }
}

}  // namespace

double value(const PenaltySpec& spec, std::size_t j, double t) {
  require_nonnegative(t);
  const double lam = spec.lambda_j(j);
  const double g = spec.gamma();
  switch (spec.kind()) {
    case PenaltyKind::ridge: return 0.5 * lam * t * t;
    case PenaltyKind::lasso:
    case PenaltyKind::adaptive_lasso: return lam * t;
    case PenaltyKind::enet:
    case PenaltyKind::adaptive_enet: return lam * (g * t + 0.5 * (1.0 - g) * t * t);
    case PenaltyKind::scad:
      if (t <= lam) return lam * t;
      if (t <= g * lam) return (g * lam * t - 0.5 * (t * t + lam * lam)) / (g - 1.0);
      return lam * lam * (g * g - 1.0) / (2.0 * (g - 1.0));
    case PenaltyKind::mcplus:
      if (t <= g * lam) return lam * t - t * t / (2.0 * g);
      return 0.5 * g * lam * lam;
  }
  return 0.0;
}

double dvalue(const PenaltySpec& spec, std::size_t j, double t) {
  require_positive(t);
  const double lam = spec.lambda_j(j);
  const double g = spec.gamma();
  switch (spec.kind()) {
    case PenaltyKind::ridge: return lam * t;
    case PenaltyKind::lasso:
    case PenaltyKind::adaptive_lasso: return lam;
    case PenaltyKind::enet:
    case PenaltyKind::adaptive_enet: return lam * (g + (1.0 - g) * t);
    case PenaltyKind::scad:
      if (t <= lam) return lam;
      if (t <= g * lam) return (g * lam - t) / (g - 1.0);
      return 0.0;
    case PenaltyKind::mcplus:
      if (t <= g * lam) return lam - t / g;
      return 0.0;
  }
  return 0.0;
}

double d2value(const PenaltySpec& spec, std::size_t j, double t) {
  require_positive(t);
  const double lam = spec.lambda_j(j);
  const double g = spec.gamma();
  switch (spec.kind()) {
    case PenaltyKind::ridge: return lam;
    case PenaltyKind::lasso:
    case PenaltyKind::adaptive_lasso: return 0.0;
    case PenaltyKind::enet:
    case PenaltyKind::adaptive_enet: return lam * (1.0 - g);
    case PenaltyKind::scad:
      if (t <= lam) return 0.0;
      if (t <= g * lam) return -1.0 / (g - 1.0);
      return 0.0;
    case PenaltyKind::mcplus:
      if (t <= g * lam) return -1.0 / g;
      return 0.0;
  }
  return 0.0;
}

double dvalue_at_zero(const PenaltySpec& spec, std::size_t j) {
  const double lam = spec.lambda_j(j);
  switch (spec.kind()) {
    case PenaltyKind::ridge: return 0.0;
    case PenaltyKind::enet:
    case PenaltyKind::adaptive_enet: return lam * spec.gamma();
    default: return lam;
  }
}

namespace {

double soft(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

double threshold(const PenaltySpec& spec, std::size_t j, double z, double tau) {
  const double lam = spec.lambda_j(j);
  const double g = spec.gamma();
  switch (spec.kind()) {
    case PenaltyKind::ridge: return z / (1.0 + tau * lam);
    case PenaltyKind::lasso:
    case PenaltyKind::adaptive_lasso: return soft(z, tau * lam);
    case PenaltyKind::enet:
    case PenaltyKind::adaptive_enet: return soft(z, tau * lam * g) / (1.0 + tau * lam * (1.0 - g));
    case PenaltyKind::scad:
    case PenaltyKind::mcplus: break;
  }
  if (lam == 0.0) return z;
  // Minimize over theta >= 0 of (theta - a)^2 / 2 + tau p(theta); the sign
  // follows z.
  const double a = std::abs(z);
  const double knot = g * lam;
  std::array<double, 6> cand{};
  std::size_t n = 0;
  cand[n++] = 0.0;
  cand[n++] = knot;
  cand[n++] = std::max(a, knot);
  if (spec.kind() == PenaltyKind::scad) {
    cand[n++] = lam;
    cand[n++] = std::clamp(a - tau * lam, 0.0, lam);
    const double slope = 1.0 - tau / (g - 1.0);
    if (slope > 0.0) cand[n++] = std::clamp((a - tau * g * lam / (g - 1.0)) / slope, lam, knot);
  } else {
    const double slope = 1.0 - tau / g;
    if (slope > 0.0) cand[n++] = std::clamp((a - tau * lam) / slope, 0.0, knot);
  }
  double best = 0.0;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = cand[k];
    const double f = 0.5 * (t - a) * (t - a) + tau * value(spec, j, t);
    if (f < best_f || (f == best_f && t < best)) {
      best_f = f;
      best = t;
    }
  }
  return z < 0.0 ? -best : best;
}

AdaptiveLambdas adaptive_lambdas(double base_lambda, const Eigen::VectorXd& ridge_fit) {
  if (!ridge_fit.allFinite()) throw ParameterError("ridge coefficients must be finite");
  AdaptiveLambdas out;
  out.lambdas.resize(static_cast<std::size_t>(ridge_fit.size()));
  out.capped.resize(out.lambdas.size());
  for (Eigen::Index j = 0; j < ridge_fit.size(); ++j) {
    const double b = std::abs(ridge_fit(j));
    const bool cap = b < kAdaptiveFloor;
    out.lambdas[static_cast<std::size_t>(j)] = base_lambda / (cap ? kAdaptiveFloor : b);
    out.capped[static_cast<std::size_t>(j)] = cap;
  }
  return out;
}

PenaltySequences sequences_abc(const PenaltySpec& spec, const Eigen::VectorXd& beta0,
                               std::size_t p_n, double domain_area, double k1) {
  if (static_cast<std::size_t>(beta0.size()) != p_n) {
    throw ParameterError("true coefficient vector must have length p_n");
  }
  if (!(k1 > 0.0)) throw ParameterError("K1 must be positive");
  if (!(domain_area > 0.0)) throw ParameterError("domain area must be positive");
  if (!spec.multipliers().empty() && spec.multipliers().size() < p_n) {
    throw ParameterError("per-coordinate lambdas must cover all p_n coordinates");
  }
  PenaltySequences out;
  while (out.s < p_n && beta0(static_cast<Eigen::Index>(out.s)) != 0.0) ++out.s;
  if (out.s == 0) throw ParameterError("true coefficient vector needs at least one leading nonzero");
  for (std::size_t j = out.s; j < p_n; ++j) {
    if (beta0(static_cast<Eigen::Index>(j)) != 0.0) {
      throw ParameterError("nonzero true coefficients must lead the vector");
    }
  }
  for (std::size_t j = 0; j < out.s; ++j) {
    const double t = std::abs(beta0(static_cast<Eigen::Index>(j)));
    out.a_n = std::max(out.a_n, std::abs(dvalue(spec, j, t)));
    out.c_n = std::max(out.c_n, std::abs(d2value(spec, j, t)));
  }
  out.epsilon_n = k1 * std::sqrt(static_cast<double>(p_n) / domain_area);
  constexpr int kGrid = 1000;
  constexpr double kDecades = 12.0;
  out.b_n = std::numeric_limits<double>::infinity();
  for (std::size_t j = out.s; j < p_n; ++j) {
    for (int k = 0; k < kGrid; ++k) {
      const double t =
          out.epsilon_n * std::pow(10.0, -kDecades + kDecades * static_cast<double>(k) / (kGrid - 1));
      out.b_n = std::min(out.b_n, dvalue(spec, j, t));
    }
  }
  return out;
}

}  // namespace ppreg
