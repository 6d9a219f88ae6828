#ifndef PPREG_PENALTY_HPP
#define PPREG_PENALTY_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ppreg {

enum class PenaltyKind { ridge, lasso, enet, adaptive_lasso, adaptive_enet, scad, mcplus };

std::string to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& name);

// enet / adaptive enet 0.5, SCAD 3.7, MC+ 3; unused kinds return 0.
double default_gamma(PenaltyKind kind);
bool is_convex(PenaltyKind kind);

// Penalty identity, base lambda and shape gamma. Coordinate j (0-based over
// the penalized coefficients, intercept excluded) uses
// lambda_j = lambda * multiplier_j, with all multipliers 1 when none are set.
//
//   ridge   p(t) = lambda t^2 / 2
//   lasso   p(t) = lambda t
//   enet    p(t) = lambda (gamma t + (1 - gamma) t^2 / 2),      0 < gamma < 1
//   SCAD    p(t) = lambda t                                     t <= lambda
//                  (gamma lambda t - (t^2 + lambda^2)/2)/(gamma-1)  lambda < t <= gamma lambda
//                  lambda^2 (gamma + 1) / 2                      t > gamma lambda,  gamma > 2
//   MC+     p(t) = lambda t - t^2 / (2 gamma)                    t <= gamma lambda
//                  gamma lambda^2 / 2                            t > gamma lambda,  gamma > 1
//
// The adaptive kinds use the lasso / enet formulas with per-coordinate lambdas.
class PenaltySpec {
 public:
  // gamma = nullopt selects default_gamma(kind). Throws ParameterError on an
  // out-of-domain lambda, gamma or multiplier.
  PenaltySpec(PenaltyKind kind, double lambda, std::optional<double> gamma = std::nullopt,
              std::vector<double> multipliers = {});

  PenaltyKind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& multipliers() const { return multipliers_; }
  double lambda_j(std::size_t j) const {
    return multipliers_.empty() ? lambda_ : lambda_ * multipliers_.at(j);
  }
  PenaltySpec with_lambda(double lambda) const;

 private:
  PenaltyKind kind_;
  double lambda_;
  double gamma_;
  std::vector<double> multipliers_;
};

// Penalty value and analytic derivatives for coordinate j. At the SCAD and
// MC+ knots the derivatives take the left-branch value.
double value(const PenaltySpec& spec, std::size_t j, double theta);
double dvalue(const PenaltySpec& spec, std::size_t j, double theta);
double d2value(const PenaltySpec& spec, std::size_t j, double theta);
// lim_{t -> 0+} p'(t): the subgradient bound at zero.
double dvalue_at_zero(const PenaltySpec& spec, std::size_t j);

// Minimizer over b of (b - z)^2 / 2 + tau * p_{lambda_j}(|b|); tau > 0.
// Non-convex kinds compare every branch candidate and break ties toward
// the smaller |b|.
double threshold(const PenaltySpec& spec, std::size_t j, double z, double tau);

struct AdaptiveLambdas {
  std::vector<double> lambdas;
  // Coordinates whose ridge estimate was below 1e-10 in magnitude and whose
  // lambda was capped at base_lambda / 1e-10.
  std::vector<bool> capped;
};

constexpr double kAdaptiveFloor = 1e-10;

AdaptiveLambdas adaptive_lambdas(double base_lambda, const Eigen::VectorXd& ridge_fit);

struct PenaltySequences {
  double a_n = 0.0;
  double b_n = 0.0;
  double c_n = 0.0;
  double epsilon_n = 0.0;
  std::size_t s = 0;
};

// beta0 holds the p_n penalized true coefficients: s >= 1 leading nonzeros
// followed by zeros. a_n and c_n maximize |p'| and |p''| at |beta0_j| over the
// support; b_n is the infimum of p'_{lambda_j}(t) over j outside the support
// and t in (0, eps_n], eps_n = K1 sqrt(p_n / area), evaluated on 1000
// log-spaced points spanning [1e-12 eps_n, eps_n].
PenaltySequences sequences_abc(const PenaltySpec& spec, const Eigen::VectorXd& beta0,
                               std::size_t p_n, double domain_area, double k1);

}  // namespace ppreg

#endif  // PPREG_PENALTY_HPP
