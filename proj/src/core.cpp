#include "ppreg/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ppreg/error.hpp"

namespace ppreg {

Window::Window(double x_min, double x_max, double y_min, double y_max)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
        std::isfinite(y_max))) {
    throw DataError("window coordinates must be finite");
  }
  if (!(x_max > x_min) || !(y_max > y_min)) {
    std::ostringstream msg;
    msg << "degenerate window [" << x_min << ", " << x_max << "] x [" << y_min << ", "
        << y_max << "]";
    throw DataError(msg.str());
  }
}

bool Window::contains(Point u) const {
  return u.x >= x_min_ && u.x <= x_max_ && u.y >= y_min_ && u.y <= y_max_;
}

bool same_window(const Window& a, const Window& b, double rel_tol) {
  const double scale = std::max({a.width(), a.height(), b.width(), b.height()});
  const double tol = rel_tol * scale;
  return std::abs(a.x_min() - b.x_min()) <= tol && std::abs(a.x_max() - b.x_max()) <= tol &&
         std::abs(a.y_min() - b.y_min()) <= tol && std::abs(a.y_max() - b.y_max()) <= tol;
}

PointPattern::PointPattern(std::vector<Point> points, Window window)
    : points_(std::move(points)), window_(window) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Point& u = points_[i];
    if (!window_.contains(u)) {
      std::ostringstream msg;
      msg << "point " << i << " (" << u.x << ", " << u.y << ") lies outside the window";
      throw DataError(msg.str());
    }
  }
  std::vector<Point> sorted = points_;
  std::sort(sorted.begin(), sorted.end(),
            [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1]) ++duplicates_;
  }
}

RasterGrid::RasterGrid(std::size_t n_cols, std::size_t n_rows, Window window,
                       std::vector<double> values, std::string name)
    : n_cols_(n_cols), n_rows_(n_rows), window_(window), values_(std::move(values)),
      name_(std::move(name)) {
  if (n_cols_ == 0 || n_rows_ == 0) throw DataError("grid '" + name_ + "' has no cells");
  if (values_.size() != n_cols_ * n_rows_) {
    std::ostringstream msg;
    msg << "grid '" << name_ << "' expects " << n_cols_ * n_rows_ << " values, got "
        << values_.size();
    throw DataError(msg.str());
  }
  for (double v : values_) {
    if (std::isnan(v)) throw DataError("grid '" + name_ + "' contains NaN cells");
  }
}

std::size_t RasterGrid::cell_index(Point u) const {
  if (!window_.contains(u)) {
    std::ostringstream msg;
    msg << "location (" << u.x << ", " << u.y << ") outside grid '" << name_ << "' window";
    throw DomainError(msg.str());
  }
  auto col = static_cast<std::size_t>(std::floor((u.x - window_.x_min()) / cell_width()));
  auto row_from_bottom =
      static_cast<std::size_t>(std::floor((u.y - window_.y_min()) / cell_height()));
  col = std::min(col, n_cols_ - 1);
  row_from_bottom = std::min(row_from_bottom, n_rows_ - 1);
  return (n_rows_ - 1 - row_from_bottom) * n_cols_ + col;
}

Point RasterGrid::cell_center(std::size_t cell) const {
  const std::size_t row = cell / n_cols_;
  const std::size_t col = cell % n_cols_;
  return {window_.x_min() + (static_cast<double>(col) + 0.5) * cell_width(),
          window_.y_max() - (static_cast<double>(row) + 0.5) * cell_height()};
}

bool RasterGrid::same_geometry(const RasterGrid& other) const {
  return n_cols_ == other.n_cols_ && n_rows_ == other.n_rows_ &&
         same_window(window_, other.window_);
}

RasterGrid RasterGrid::renamed(std::string name) const {
  return RasterGrid(n_cols_, n_rows_, window_, values_, std::move(name));
}

RasterGrid resample_grid(const RasterGrid& grid, std::size_t n_cols, std::size_t n_rows) {
  if (n_cols == 0 || n_rows == 0) throw ParameterError("resample target dimensions must be positive");
  if (n_cols == grid.n_cols() && n_rows == grid.n_rows()) return grid;
  RasterGrid target(n_cols, n_rows, grid.window(), std::vector<double>(n_cols * n_rows, 0.0),
                    grid.name());
  std::vector<double> values(n_cols * n_rows);
  for (std::size_t cell = 0; cell < values.size(); ++cell) {
    values[cell] = grid.value_at(target.cell_center(cell));
  }
  return RasterGrid(n_cols, n_rows, grid.window(), std::move(values), grid.name());
}

CovariateStack::CovariateStack(std::vector<RasterGrid> grids, bool includes_intercept)
    : grids_(std::move(grids)), includes_intercept_(includes_intercept) {
  if (grids_.empty()) throw DataError("covariate stack needs at least one grid");
  for (const auto& g : grids_) {
    if (!g.same_geometry(grids_.front())) {
      throw DataError("grid '" + g.name() + "' does not share the geometry of grid '" +
                      grids_.front().name() + "'");
    }
  }
}

std::vector<std::string> CovariateStack::names() const {
  std::vector<std::string> out;
  out.reserve(grids_.size());
  for (const auto& g : grids_) out.push_back(g.name());
  return out;
}

Eigen::VectorXd CovariateStack::evaluate(Point u) const {
  return cell_design(grids_.front().cell_index(u));
}

Eigen::VectorXd CovariateStack::cell_design(std::size_t cell) const {
  Eigen::VectorXd z(dimension());
  Eigen::Index k = 0;
  if (includes_intercept_) z(k++) = 1.0;
  for (const auto& g : grids_) z(k++) = g[cell];
  return z;
}

Eigen::MatrixXd CovariateStack::design_matrix() const {
  const auto n = static_cast<Eigen::Index>(n_cells());
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(dimension()));
  Eigen::Index k = 0;
  if (includes_intercept_) z.col(k++).setOnes();
  for (const auto& g : grids_) {
    z.col(k++) = Eigen::Map<const Eigen::VectorXd>(g.values().data(), n);
  }
  return z;
}

StandardizedStack standardize(const CovariateStack& stack) {
  std::vector<RasterGrid> grids;
  std::vector<double> means, sds;
  for (const auto& g : stack.grids()) {
    const auto& v = g.values();
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    const double scale = std::max(std::abs(mean), 1.0);
    if (!(var > 1e-24 * scale * scale)) {
      throw DataError("covariate '" + g.name() + "' has zero variance over grid cells");
    }
    const double sd = std::sqrt(var);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
    grids.emplace_back(g.n_cols(), g.n_rows(), g.window(), std::move(out), g.name());
    means.push_back(mean);
    sds.push_back(sd);
  }
  return {CovariateStack(std::move(grids), stack.includes_intercept()), std::move(means),
          std::move(sds)};
}

Eigen::VectorXd unstandardize_coefficients(const Eigen::VectorXd& beta,
                                           const StandardizedStack& s) {
  const bool icpt = s.stack.includes_intercept();
  const auto offset = static_cast<Eigen::Index>(icpt ? 1 : 0);
  Eigen::VectorXd out = beta;
  double shift = 0.0;
  for (std::size_t j = 0; j < s.means.size(); ++j) {
    const auto k = offset + static_cast<Eigen::Index>(j);
    out(k) = beta(k) / s.sds[j];
    shift += out(k) * s.means[j];
  }
  if (icpt) out(0) = beta(0) - shift;
  return out;
}

}  // namespace ppreg
