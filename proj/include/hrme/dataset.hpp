#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hrme/numeric.hpp"

namespace hrme::dataset {

struct Dataset {
  numeric::Matrix features;                // n x d
  numeric::Vector targets;                 // n
  std::vector<std::string> feature_names;  // empty, or one name per column

  std::size_t n() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

// Raw numeric CSV contents: header plus an all-numeric value matrix.
struct CsvTable {
  std::vector<std::string> header;
  numeric::Matrix values;
};

// RFC-4180-style reader: quoted fields allowed, '.' decimal separator,
// header row required. Throws IoError / ParseError(row, col) with 1-based
// data-row and column positions.
CsvTable read_csv_table(const std::filesystem::path& path);

// Target column addressed by header name or 0-based column index.
using TargetColumn = std::variant<std::string, std::size_t>;

Dataset load_csv(const std::filesystem::path& path, const TargetColumn& target);

// Writes header + rows with 17-significant-digit reals so that a
// load_csv round trip reproduces every value exactly.
void save_csv(const Dataset& ds, const std::filesystem::path& path,
              const std::string& target_name = "y");

// Seeded disjoint partition; test size = round(n * test_fraction).
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);

// Per-column affine scaling fitted on training features only. Columns
// whose raw standard deviation falls below 1e-12 store std 1.0 and map
// to zeros.
struct Standardizer {
  numeric::Vector means;
  numeric::Vector stds;

  std::size_t dim() const { return means.size(); }
  static Standardizer identity(std::size_t dim);

  numeric::Vector apply_row(std::span<const double> x) const;
  numeric::Matrix apply(const numeric::Matrix& x) const;
  numeric::Matrix invert(const numeric::Matrix& x) const;
};

Standardizer fit_standardizer(const Dataset& ds);
Dataset apply_standardizer(const Standardizer& s, const Dataset& ds);
Dataset invert_standardizer(const Standardizer& s, const Dataset& ds);

// One generating line of the synthetic dataset. A line without its own
// x_range samples over the spec's global range.
struct LineSpec {
  double slope = 0.0;
  double intercept = 0.0;
  double noise_std = 0.0;
  std::optional<std::pair<double, double>> x_range;
};

struct ThreeLinesSpec {
  std::vector<LineSpec> lines;
  std::pair<double, double> x_range{-10.0, 10.0};
  std::size_t n_total = 2500;
  std::uint64_t seed = 0;

  // Three crossing segments with distinct noise levels. The segments
  // occupy different (partially overlapping) x intervals so that the
  // conditional mean is strongly nonlinear and region-aware routing has
  // something to exploit.
  static ThreeLinesSpec defaults();
};

// Each sample: line index uniform, x uniform on the line's range,
// y = slope * x + intercept + N(0, noise_std^2). Deterministic per seed.
Dataset generate_three_lines(const ThreeLinesSpec& spec);

}  // namespace hrme::dataset
