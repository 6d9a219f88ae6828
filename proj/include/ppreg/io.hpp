#ifndef PPREG_IO_HPP
#define PPREG_IO_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "ppreg/core.hpp"

namespace ppreg {

enum class MissingPolicy { reject, mean_impute };

// Point patterns: CSV whose header starts with the columns `x,y`; further
// columns are ignored. Values are written with 17 significant digits so a
// save/load round trip is exact.
PointPattern read_points_csv(const std::filesystem::path& path, const Window& window);
void write_points_csv(const PointPattern& pattern, const std::filesystem::path& path);

// ESRI ASCII grid. Header keys are case-insensitive and may appear in any
// order: ncols, nrows, xllcorner|xllcenter, yllcorner|yllcenter, cellsize
// (or the GDAL pair dx, dy for non-square cells),
// optional NODATA_value. Values follow row-major, top row first. Cells equal
// to NODATA_value (or NaN) are missing and handled per MissingPolicy.
RasterGrid read_ascii_grid(const std::filesystem::path& path,
                           MissingPolicy missing = MissingPolicy::reject);
void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path,
                      double nodata = -9999.0);

// CSV matrix (no header, one raster row per line, top row first) with a JSON
// sidecar `<stem>.json` holding {"x_min","x_max","y_min","y_max"} and an
// optional "nodata" value.
RasterGrid read_csv_grid(const std::filesystem::path& path,
                         MissingPolicy missing = MissingPolicy::reject);

// Loads every `*.asc` grid and every `*.csv` grid with a sidecar in `dir`,
// sorted by file name; grid names are file stems.
CovariateStack load_covariate_dir(const std::filesystem::path& dir, bool includes_intercept,
                                  MissingPolicy missing = MissingPolicy::reject);

}  // namespace ppreg

#endif  // PPREG_IO_HPP
