#include "ppreg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ppreg/error.hpp"

namespace ppreg {

namespace {

// Mean of g - 1 over all sub-point pairs of two cells whose centers differ by
// (dx, dy). Differences of sub-point offsets k in [-(m-1), m-1] occur m - |k| times.
double cell_pair_kernel(const PairCorrelation& g, double dx, double dy, double cw, double ch, int m) {
  double total = 0.0;
  for (int kx = -(m - 1); kx <= m - 1; ++kx) {
    const double ox = dx + cw * kx / m;
    const double wx = m - std::abs(kx);
    for (int ky = -(m - 1); ky <= m - 1; ++ky) {
      const double oy = dy + ch * ky / m;
      total += wx * (m - std::abs(ky)) * (g(std::hypot(ox, oy)) - 1.0);
    }
  }
  const double mm = static_cast<double>(m) * m;
  return total / (mm * mm);
}

double kernel_range(const PairCorrelation& g, double cell) {
  const double g0 = std::abs(g(0.0) - 1.0);
  if (g0 == 0.0) return 0.0;
  double r = cell;
  for (int i = 0; i < 60; ++i, r *= 1.25) {
    if (std::abs(g(r) - 1.0) <= 1e-10 * g0) return r;
  }
  return r;
}

}  // namespace

SandwichMatrices compute_abc(const CovariateStack& stack, const Eigen::VectorXd& beta,
                             const PairCorrelation& g, const SandwichOptions& opt) {
  const auto dim = static_cast<Eigen::Index>(stack.dimension());
  if (beta.size() != dim) throw ParameterError("coefficient length does not match the covariate stack");
  if (!beta.allFinite()) throw ParameterError("coefficients must be finite");
  const std::size_t n_cells = stack.n_cells();
  if (opt.cell_weights.size() != 0 && opt.cell_weights.size() != static_cast<Eigen::Index>(n_cells)) {
    throw ParameterError("cell weight vector does not match the covariate grid");
  }
  const bool logistic = opt.likelihood == LikelihoodKind::logistic;
  if (logistic && !(opt.delta > 0.0)) throw ParameterError("logistic sandwich needs a positive delta");
  if (opt.kernel_subsamples < 1) throw ParameterError("kernel_subsamples must be >= 1");

  SandwichMatrices out;
  out.indices = opt.indices;
  if (out.indices.empty()) {
    for (std::size_t j = 0; j < stack.dimension(); ++j) out.indices.push_back(j);
  }
  for (std::size_t j : out.indices) {
    if (j >= stack.dimension()) throw ParameterError("sandwich index out of range");
  }
  const auto k = static_cast<Eigen::Index>(out.indices.size());
  const Eigen::MatrixXd design = stack.design_matrix();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n_cells), k);
  for (Eigen::Index c = 0; c < k; ++c) z.col(c) = design.col(static_cast<Eigen::Index>(out.indices[c]));

  const Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd rho(static_cast<Eigen::Index>(n_cells));
  Eigen::VectorXd w(static_cast<Eigen::Index>(n_cells));
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    rho(i) = std::exp(std::min(eta(i), kEtaClamp));
    double wi = opt.cell_weights.size() ? opt.cell_weights(i) : 1.0;
    if (logistic) wi *= opt.delta / (rho(i) + opt.delta);
    w(i) = wi;
  }
  const double area = stack.geometry().cell_area();
  const Eigen::VectorXd wa = (w.array() * rho.array() * area).matrix();
  const Eigen::VectorXd wb = (w.array().square() * rho.array() * area).matrix();
  out.a = z.transpose() * wa.asDiagonal() * z;
  out.b = z.transpose() * wb.asDiagonal() * z;
  out.c = Eigen::MatrixXd::Zero(k, k);
  if (g.is_poisson()) return out;

  // f_c = a w_c rho_c z_c
  const Eigen::MatrixXd f = (w.array() * rho.array() * area).matrix().asDiagonal() * z;
  const RasterGrid& geo = stack.geometry();
  const auto nr = static_cast<long>(geo.n_rows());
  const auto nc = static_cast<long>(geo.n_cols());

  if (g.is_isotropic()) {
    const double cw = geo.cell_width();
    const double ch = geo.cell_height();
    const double range = opt.radius > 0.0 ? opt.radius : kernel_range(g, std::max(cw, ch));
    const long max_dc = std::min(nc - 1, static_cast<long>(std::ceil(range / cw)) + 1);
    const long max_dr = std::min(nr - 1, static_cast<long>(std::ceil(range / ch)) + 1);
    for (long dr = -max_dr; dr <= max_dr; ++dr) {
      for (long dc = -max_dc; dc <= max_dc; ++dc) {
        // Row index grows downward, so a row offset is a negative y offset;
        // g is isotropic and the sign does not matter.
        const double kern = cell_pair_kernel(g, dc * cw, dr * ch, cw, ch, opt.kernel_subsamples);
        if (kern == 0.0) continue;
        const long c0 = std::max(0L, -dc);
        const long c1 = std::min(nc, nc - dc);
        const long len = c1 - c0;
        if (len <= 0) continue;
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k, k);
        for (long r = std::max(0L, -dr); r < std::min(nr, nr - dr); ++r) {
          const auto lhs = f.middleRows(r * nc + c0, len);
          const auto rhs = f.middleRows((r + dr) * nc + c0 + dc, len);
          acc.noalias() += lhs.transpose() * rhs;
        }
        out.c += kern * acc;
      }
    }
  } else {
    if (n_cells > opt.full_sum_max_cells) {
      std::ostringstream msg;
      msg << "non-isotropic pair correlation on a " << geo.n_cols() << "x" << geo.n_rows()
          << " grid is unsupported (full double sum limited to " << opt.full_sum_max_cells << " cells)";
      throw UnsupportedError(msg.str());
    }
    std::vector<Point> centers(n_cells);
    for (std::size_t i = 0; i < n_cells; ++i) centers[i] = geo.cell_center(i);
    for (std::size_t i = 0; i < n_cells; ++i) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
      for (std::size_t j = 0; j < n_cells; ++j) {
        acc += (g(centers[i], centers[j]) - 1.0) * f.row(static_cast<Eigen::Index>(j)).transpose();
      }
      out.c += f.row(static_cast<Eigen::Index>(i)).transpose() * acc.transpose();
    }
  }
  out.c = 0.5 * (out.c + out.c.transpose()).eval();
  if (!out.a.allFinite() || !out.b.allFinite() || !out.c.allFinite()) {
    throw NumericalError("sandwich matrices have non-finite entries");
  }
  return out;
}

CovarianceEstimate compute_sigma(const SandwichMatrices& mats, const PenaltySpec& spec,
                                 const Eigen::VectorXd& beta_hat, double domain_area,
                                 std::size_t first_penalized, const std::vector<std::string>& names) {
  const auto k = static_cast<Eigen::Index>(mats.indices.size());
  if (k == 0) throw ParameterError("empty support");
  if (mats.a.rows() != k || mats.b.rows() != k || mats.c.rows() != k) {
    throw ParameterError("sandwich matrices do not match their index set");
  }
  if (!(domain_area > 0.0)) throw ParameterError("domain area must be positive");
  CovarianceEstimate out;
  out.support = mats.indices;
  out.pi = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const std::size_t j = mats.indices[static_cast<std::size_t>(i)];
    if (j >= static_cast<std::size_t>(beta_hat.size())) throw ParameterError("support index out of range");
    const double b = std::abs(beta_hat(static_cast<Eigen::Index>(j)));
    if (j >= first_penalized && b > 0.0) out.pi(i) = d2value(spec, j - first_penalized, b);
  }
  const Eigen::MatrixXd m = mats.a + domain_area * Eigen::MatrixXd(out.pi.asDiagonal());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smin = sv(k - 1);
  out.condition_number = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  if (!(out.condition_number < kMaxConditionNumber)) {
    const Eigen::VectorXd null_dir = svd.matrixV().col(k - 1);
    std::ostringstream msg;
    msg << "A11 + |D| Pi is rank deficient (condition number " << out.condition_number
        << "); offending covariates:";
    for (Eigen::Index i = 0; i < k; ++i) {
      if (std::abs(null_dir(i)) > 0.1) {
        const std::size_t j = mats.indices[static_cast<std::size_t>(i)];
        msg << " " << (j < names.size() ? names[j] : "#" + std::to_string(j));
      }
    }
    throw NumericalError(msg.str());
  }
  const Eigen::MatrixXd minv = m.inverse();
  Eigen::MatrixXd sigma = domain_area * minv * (mats.b + mats.c) * minv.transpose();
  out.sigma = 0.5 * (sigma + sigma.transpose());
  out.standard_errors.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.standard_errors(i) = std::sqrt(std::max(0.0, out.sigma(i, i)) / domain_area);
  }
  return out;
}

}  // namespace ppreg
