#include "ppreg/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "ppreg/error.hpp"

namespace ppreg {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& token, const std::filesystem::path& path, std::size_t line) {
  const std::string t = trim(token);
  if (lower(t) == "nan" || lower(t) == "na") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || t.empty()) {
    std::ostringstream msg;
    msg << path.string() << ":" << line << ": cannot parse number '" << t << "'";
    throw DataError(msg.str());
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

void resolve_missing(std::vector<double>& values, std::optional<double> nodata,
                     MissingPolicy policy, const std::filesystem::path& path) {
  std::size_t missing = 0;
  double sum = 0.0;
  for (double& v : values) {
    if (nodata && v == *nodata) v = std::numeric_limits<double>::quiet_NaN();
    if (std::isnan(v)) {
      ++missing;
    } else {
      sum += v;
    }
  }
  if (missing == 0) return;
  if (policy == MissingPolicy::reject) {
    std::ostringstream msg;
    msg << path.string() << ": " << missing << " missing cells (use mean imputation to accept)";
    throw DataError(msg.str());
  }
  if (missing == values.size()) throw DataError(path.string() + ": every cell is missing");
  const double mean = sum / static_cast<double>(values.size() - missing);
  for (double& v : values) {
    if (std::isnan(v)) v = mean;
  }
}

}  // namespace

PointPattern read_points_csv(const std::filesystem::path& path, const Window& window) {
  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<Point> points;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields.size() < 2 || lower(fields[0]) != "x" || lower(fields[1]) != "y") {
        throw DataError(path.string() + ": expected header 'x,y'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() < 2) {
      std::ostringstream msg;
      msg << path.string() << ":" << lineno << ": expected two columns";
      throw DataError(msg.str());
    }
    const Point u{parse_double(fields[0], path, lineno), parse_double(fields[1], path, lineno)};
    if (!std::isfinite(u.x) || !std::isfinite(u.y)) {
      std::ostringstream msg;
      msg << path.string() << ":" << lineno << ": non-finite coordinate";
      throw DataError(msg.str());
    }
    points.push_back(u);
  }
  if (!header_seen) throw DataError(path.string() + ": empty file, expected header 'x,y'");
  return PointPattern(std::move(points), window);
}

void write_points_csv(const PointPattern& pattern, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "x,y\n";
  for (const auto& u : pattern.points()) out << u.x << "," << u.y << "\n";
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

RasterGrid read_ascii_grid(const std::filesystem::path& path, MissingPolicy missing) {
  auto in = open_input(path);
  std::map<std::string, double> header;
  std::string token;
  std::vector<double> values;
  // Header keys are alphabetic tokens each followed by one number; the first
  // numeric token that is not preceded by a key starts the data block.
  while (in >> token) {
    if (!token.empty() && (std::isalpha(static_cast<unsigned char>(token[0])) != 0) &&
        lower(token) != "nan") {
      std::string value;
      if (!(in >> value)) throw DataError(path.string() + ": header key '" + token + "' without value");
      header[lower(token)] = parse_double(value, path, 0);
    } else {
      values.push_back(parse_double(token, path, 0));
      break;
    }
  }
  auto require = [&](const std::string& key) {
    auto it = header.find(key);
    if (it == header.end()) throw DataError(path.string() + ": missing header '" + key + "'");
    return it->second;
  };
  const double ncols_d = require("ncols");
  const double nrows_d = require("nrows");
  if (ncols_d < 1 || nrows_d < 1 || ncols_d != std::floor(ncols_d) || nrows_d != std::floor(nrows_d)) {
    throw DataError(path.string() + ": ncols/nrows must be positive integers");
  }
  const auto ncols = static_cast<std::size_t>(ncols_d);
  const auto nrows = static_cast<std::size_t>(nrows_d);
  double dx = 0.0, dy = 0.0;
  if (header.count("cellsize")) {
    dx = dy = header["cellsize"];
  } else if (header.count("dx") && header.count("dy")) {
    dx = header["dx"];
    dy = header["dy"];
  } else {
    throw DataError(path.string() + ": missing header 'cellsize'");
  }
  if (!(dx > 0) || !(dy > 0)) throw DataError(path.string() + ": cell size must be positive");
  double xll = 0.0, yll = 0.0;
  if (header.count("xllcorner")) {
    xll = header["xllcorner"];
  } else if (header.count("xllcenter")) {
    xll = header["xllcenter"] - 0.5 * dx;
  } else {
    throw DataError(path.string() + ": missing header 'xllcorner'");
  }
  if (header.count("yllcorner")) {
    yll = header["yllcorner"];
  } else if (header.count("yllcenter")) {
    yll = header["yllcenter"] - 0.5 * dy;
  } else {
    throw DataError(path.string() + ": missing header 'yllcorner'");
  }
  std::optional<double> nodata;
  if (header.count("nodata_value")) nodata = header["nodata_value"];

  values.reserve(ncols * nrows);
  while (in >> token) values.push_back(parse_double(token, path, 0));
  if (values.size() != ncols * nrows) {
    std::ostringstream msg;
    msg << path.string() << ": expected " << ncols * nrows << " values, found " << values.size();
    throw DataError(msg.str());
  }
  resolve_missing(values, nodata, missing, path);
  Window window(xll, xll + dx * static_cast<double>(ncols), yll,
                yll + dy * static_cast<double>(nrows));
  return RasterGrid(ncols, nrows, window, std::move(values), path.stem().string());
}

void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path, double nodata) {
  auto out = open_output(path);
  out << "ncols " << grid.n_cols() << "\n"
      << "nrows " << grid.n_rows() << "\n"
      << "xllcorner " << grid.window().x_min() << "\n"
      << "yllcorner " << grid.window().y_min() << "\n";
  // Non-square cells use the GDAL dx/dy extension instead of cellsize.
  if (std::abs(grid.cell_width() - grid.cell_height()) <= 1e-12 * grid.cell_width()) {
    out << "cellsize " << grid.cell_width() << "\n";
  } else {
    out << "dx " << grid.cell_width() << "\n"
        << "dy " << grid.cell_height() << "\n";
  }
  out << "NODATA_value " << nodata << "\n";
  for (std::size_t r = 0; r < grid.n_rows(); ++r) {
    for (std::size_t c = 0; c < grid.n_cols(); ++c) {
      if (c) out << ' ';
      out << grid.at(r, c);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

RasterGrid read_csv_grid(const std::filesystem::path& path, MissingPolicy missing) {
  auto sidecar = path;
  sidecar.replace_extension(".json");
  auto meta_in = open_input(sidecar);
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(sidecar.string() + ": " + e.what());
  }
  auto get = [&](const char* key) {
    if (!meta.contains(key) || !meta[key].is_number()) {
      throw DataError(sidecar.string() + ": missing numeric '" + key + "'");
    }
    return meta[key].get<double>();
  };
  Window window(get("x_min"), get("x_max"), get("y_min"), get("y_max"));
  std::optional<double> nodata;
  if (meta.contains("nodata")) nodata = get("nodata");

  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0, ncols = 0, nrows = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (ncols == 0) ncols = fields.size();
    if (fields.size() != ncols) {
      std::ostringstream msg;
      msg << path.string() << ":" << lineno << ": expected " << ncols << " columns";
      throw DataError(msg.str());
    }
    for (const auto& f : fields) values.push_back(parse_double(f, path, lineno));
    ++nrows;
  }
  if (nrows == 0) throw DataError(path.string() + ": empty grid");
  resolve_missing(values, nodata, missing, path);
  return RasterGrid(ncols, nrows, window, std::move(values), path.stem().string());
}

CovariateStack load_covariate_dir(const std::filesystem::path& dir, bool includes_intercept,
                                  MissingPolicy missing) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("covariate directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = lower(entry.path().extension().string());
    if (ext == ".asc") {
      files.push_back(entry.path());
    } else if (ext == ".csv") {
      auto sidecar = entry.path();
      sidecar.replace_extension(".json");
      if (std::filesystem::exists(sidecar)) files.push_back(entry.path());
    }
  }
  if (files.empty()) throw DataError("no covariate grids found in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  std::vector<RasterGrid> grids;
  for (const auto& f : files) {
    if (lower(f.extension().string()) == ".asc") {
      grids.push_back(read_ascii_grid(f, missing));
    } else {
      grids.push_back(read_csv_grid(f, missing));
    }
  }
  return CovariateStack(std::move(grids), includes_intercept);
}

}  // namespace ppreg
