#ifndef PPREG_CORE_HPP
#define PPREG_CORE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ppreg {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned rectangular observation window.
class Window {
 public:
  Window(double x_min, double x_max, double y_min, double y_max);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }

  // Boundary inclusive.
  bool contains(Point u) const;

  friend bool operator==(const Window&, const Window&) = default;

 private:
  double x_min_, x_max_, y_min_, y_max_;
};

// Windows that agree up to floating-point noise in the corner coordinates.
bool same_window(const Window& a, const Window& b, double rel_tol = 1e-9);

class PointPattern {
 public:
  // Throws DataError if any point lies outside the window.
  PointPattern(std::vector<Point> points, Window window);

  const std::vector<Point>& points() const { return points_; }
  const Window& window() const { return window_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  // Number of points whose coordinates repeat an earlier point.
  std::size_t duplicate_count() const { return duplicates_; }

 private:
  std::vector<Point> points_;
  Window window_;
  std::size_t duplicates_ = 0;
};

// Row-major pixel image. Row 0 is the top row (largest y), matching the
// ESRI ASCII layout. Cell (r, c) covers the half-open rectangle
// [x_lo, x_hi) x [y_lo, y_hi); the right and top window edges are closed.
class RasterGrid {
 public:
  RasterGrid(std::size_t n_cols, std::size_t n_rows, Window window,
             std::vector<double> values, std::string name = {});

  std::size_t n_cols() const { return n_cols_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cells() const { return n_cols_ * n_rows_; }
  const Window& window() const { return window_; }
  const std::vector<double>& values() const { return values_; }
  const std::string& name() const { return name_; }
  double cell_width() const { return window_.width() / static_cast<double>(n_cols_); }
  double cell_height() const { return window_.height() / static_cast<double>(n_rows_); }
  double cell_area() const { return cell_width() * cell_height(); }

  double at(std::size_t row, std::size_t col) const { return values_[row * n_cols_ + col]; }
  double operator[](std::size_t cell) const { return values_[cell]; }

  // Flat cell index containing u. Throws DomainError outside the window.
  std::size_t cell_index(Point u) const;
  Point cell_center(std::size_t cell) const;
  double value_at(Point u) const { return values_[cell_index(u)]; }

  bool same_geometry(const RasterGrid& other) const;
  RasterGrid renamed(std::string name) const;

 private:
  std::size_t n_cols_, n_rows_;
  Window window_;
  std::vector<double> values_;
  std::string name_;
};

// Nearest-cell resampling onto the same window.
RasterGrid resample_grid(const RasterGrid& grid, std::size_t n_cols, std::size_t n_rows);

// p gridded covariates sharing one geometry, optionally preceded by an
// intercept column in every design row.
class CovariateStack {
 public:
  CovariateStack(std::vector<RasterGrid> grids, bool includes_intercept);

  const std::vector<RasterGrid>& grids() const { return grids_; }
  bool includes_intercept() const { return includes_intercept_; }
  std::size_t n_covariates() const { return grids_.size(); }
  // Length of z(u): p, or p + 1 with the intercept.
  std::size_t dimension() const { return grids_.size() + (includes_intercept_ ? 1 : 0); }
  const Window& window() const { return grids_.front().window(); }
  std::size_t n_cols() const { return grids_.front().n_cols(); }
  std::size_t n_rows() const { return grids_.front().n_rows(); }
  std::size_t n_cells() const { return grids_.front().n_cells(); }
  const RasterGrid& geometry() const { return grids_.front(); }
  std::vector<std::string> names() const;

  Eigen::VectorXd evaluate(Point u) const;
  Eigen::VectorXd cell_design(std::size_t cell) const;
  // n_cells x dimension() matrix of design rows at every cell.
  Eigen::MatrixXd design_matrix() const;

 private:
  std::vector<RasterGrid> grids_;
  bool includes_intercept_;
};

inline Eigen::VectorXd evaluate_covariates(const CovariateStack& stack, Point u) {
  return stack.evaluate(u);
}

struct StandardizedStack {
  CovariateStack stack;
  // Per covariate (intercept excluded): z_std = (z - mean) / sd.
  std::vector<double> means;
  std::vector<double> sds;
};

// Centers and scales every covariate over grid cells using the population
// (divide-by-N) variance. Throws DataError naming any constant covariate.
StandardizedStack standardize(const CovariateStack& stack);

// Maps coefficients estimated on standardized covariates back to the
// original covariate scale. beta has length stack.dimension().
Eigen::VectorXd unstandardize_coefficients(const Eigen::VectorXd& beta,
                                           const StandardizedStack& standardized);

}  // namespace ppreg

#endif  // PPREG_CORE_HPP
