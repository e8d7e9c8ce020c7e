#include "hrme/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hrme/rng.hpp"

namespace hrme::dataset {

namespace {

std::vector<std::vector<std::string>> parse_csv_records(const std::string& text,
                                                        const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    fields.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(fields));
    fields.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;  // a field follows the comma, possibly empty
        break;
      case '\r':
        break;
      case '\n':
        if (!fields.empty() || field_started || !field.empty()) end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
        break;
    }
  }
  if (in_quotes) throw IoError(origin + ": unterminated quoted field");
  if (!fields.empty() || field_started || !field.empty()) end_record();
  return records;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || first == last) {
    throw ParseError(row, col,
                     "cannot parse '" + cell + "' as a number at data row " +
                         std::to_string(row) + ", column " + std::to_string(col));
  }
  if (!std::isfinite(value)) {
    throw ParseError(row, col, "non-finite value at data row " + std::to_string(row) +
                                   ", column " + std::to_string(col));
  }
  return value;
}

void format_real(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");

  const auto records = parse_csv_records(buf.str(), path.string());
  if (records.empty()) throw IoError("'" + path.string() + "' is empty");
  if (records.size() < 2) {
    throw ParseError(0, 0, "'" + path.string() + "' has a header but no data rows");
  }

  CsvTable table;
  table.header = records.front();
  const std::size_t width = table.header.size();
  table.values = numeric::Matrix(records.size() - 1, width);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != width) {
      throw ParseError(r, rec.size(),
                       "data row " + std::to_string(r) + " has " +
                           std::to_string(rec.size()) + " fields, expected " +
                           std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      table.values(r - 1, c) = parse_cell(rec[c], r, c + 1);
    }
  }
  return table;
}

Dataset load_csv(const std::filesystem::path& path, const TargetColumn& target) {
  CsvTable table = read_csv_table(path);
  const std::size_t width = table.header.size();

  std::size_t target_idx = width;
  if (const auto* name = std::get_if<std::string>(&target)) {
    for (std::size_t c = 0; c < width; ++c) {
      if (table.header[c] == *name) {
        target_idx = c;
        break;
      }
    }
    if (target_idx == width) {
      throw MissingTargetError("target column '" + *name + "' not found in '" +
                               path.string() + "'");
    }
  } else {
    target_idx = std::get<std::size_t>(target);
    if (target_idx >= width) {
      throw MissingTargetError("target column index " + std::to_string(target_idx) +
                               " out of range for " + std::to_string(width) + " columns");
    }
  }
  if (width < 2) throw MissingTargetError("'" + path.string() + "' has no feature columns");

  Dataset ds;
  const std::size_t n = table.values.rows();
  ds.features = numeric::Matrix(n, width - 1);
  ds.targets.resize(n);
  for (std::size_t c = 0, out = 0; c < width; ++c) {
    if (c == target_idx) continue;
    ds.feature_names.push_back(table.header[c]);
    for (std::size_t r = 0; r < n; ++r) ds.features(r, out) = table.values(r, c);
    ++out;
  }
  for (std::size_t r = 0; r < n; ++r) ds.targets[r] = table.values(r, target_idx);
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path,
              const std::string& target_name) {
  std::string out;
  const std::size_t d = ds.dim();
  for (std::size_t c = 0; c < d; ++c) {
    out += ds.feature_names.size() == d ? ds.feature_names[c]
                                        : "x" + std::to_string(c);
    out += ',';
  }
  out += target_name;
  out += '\n';
  for (std::size_t r = 0; r < ds.n(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      format_real(out, ds.features(r, c));
      out += ',';
    }
    format_real(out, ds.targets[r]);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << out;
  if (!f) throw IoError("write failure on '" + path.string() + "'");
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.features = ds.features.gather_rows(rows);
  out.targets.reserve(rows.size());
  for (std::size_t r : rows) out.targets.push_back(ds.targets[r]);
  out.feature_names = ds.feature_names;
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw EmptySplitError("test_fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.n();
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  if (n_test == 0 || n_test >= n) {
    throw EmptySplitError("split of " + std::to_string(n) + " rows at fraction " +
                          std::to_string(test_fraction) + " leaves an empty part");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> test_rows(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train_rows(order.begin() + n_test, order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

Standardizer Standardizer::identity(std::size_t dim) {
  return {numeric::Vector(dim, 0.0), numeric::Vector(dim, 1.0)};
}

numeric::Vector Standardizer::apply_row(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw DimensionMismatch("standardizer expects " + std::to_string(dim()) +
                            " features, got " + std::to_string(x.size()));
  }
  numeric::Vector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - means[j]) / stds[j];
  return out;
}

numeric::Matrix Standardizer::apply(const numeric::Matrix& x) const {
  if (x.cols() != dim()) {
    throw DimensionMismatch("standardizer expects " + std::to_string(dim()) +
                            " features, got " + std::to_string(x.cols()));
  }
  numeric::Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) = (x(i, j) - means[j]) / stds[j];
    }
  }
  return out;
}

numeric::Matrix Standardizer::invert(const numeric::Matrix& x) const {
  if (x.cols() != dim()) {
    throw DimensionMismatch("standardizer expects " + std::to_string(dim()) +
                            " features, got " + std::to_string(x.cols()));
  }
  numeric::Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) = x(i, j) * stds[j] + means[j];
    }
  }
  return out;
}

Standardizer fit_standardizer(const Dataset& ds) {
  const std::size_t n = ds.n();
  const std::size_t d = ds.dim();
  if (n == 0 || d == 0) throw DimensionMismatch("fit_standardizer: empty dataset");
  Standardizer s;
  s.means.assign(d, 0.0);
  s.stds.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += ds.features(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dlt = ds.features(i, j) - mean;
      var += dlt * dlt;
    }
    const double std = std::sqrt(var / static_cast<double>(n));
    s.means[j] = mean;
    s.stds[j] = std < 1e-12 ? 1.0 : std;
  }
  return s;
}

Dataset apply_standardizer(const Standardizer& s, const Dataset& ds) {
  Dataset out = ds;
  out.features = s.apply(ds.features);
  return out;
}

Dataset invert_standardizer(const Standardizer& s, const Dataset& ds) {
  Dataset out = ds;
  out.features = s.invert(ds.features);
  return out;
}

ThreeLinesSpec ThreeLinesSpec::defaults() {
  ThreeLinesSpec s;
  s.lines = {
      {1.0, 0.0, 1.0, {{-10.0, 1.0}}},
      {-1.0, 0.0, 2.0, {{-1.0, 4.0}}},
      {0.25, 5.0, 0.5, {{4.0, 10.0}}},
  };
  s.x_range = {-10.0, 10.0};
  s.n_total = 2500;
  s.seed = 0;
  return s;
}

Dataset generate_three_lines(const ThreeLinesSpec& spec) {
  if (spec.lines.empty()) throw InvalidSpecError("three-lines spec has no lines");
  if (spec.n_total < 3) throw InvalidSpecError("three-lines spec needs n_total >= 3");
  if (!(spec.x_range.first < spec.x_range.second)) {
    throw InvalidSpecError("three-lines spec: x_range lo must be < hi");
  }
  for (const auto& line : spec.lines) {
    if (!std::isfinite(line.slope) || !std::isfinite(line.intercept) ||
        !std::isfinite(line.noise_std) || line.noise_std < 0.0) {
      throw InvalidSpecError("three-lines spec: invalid line parameters");
    }
    if (line.x_range && !(line.x_range->first < line.x_range->second)) {
      throw InvalidSpecError("three-lines spec: per-line x_range lo must be < hi");
    }
  }

  Dataset ds;
  ds.features = numeric::Matrix(spec.n_total, 1);
  ds.targets.resize(spec.n_total);
  ds.feature_names = {"x"};

  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.n_total; ++i) {
    const auto k = static_cast<std::size_t>(rng.next_below(spec.lines.size()));
    const auto& line = spec.lines[k];
    const auto [lo, hi] = line.x_range ? *line.x_range : spec.x_range;
    const double x = lo + (hi - lo) * rng.next_uniform();
    const double y = line.slope * x + line.intercept + line.noise_std * rng.next_normal();
    ds.features(i, 0) = x;
    ds.targets[i] = y;
  }
  return ds;
}

}  // namespace hrme::dataset
