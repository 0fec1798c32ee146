#include "ccmv/data_model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ccmv {

namespace {

std::uint64_t low_bits(std::size_t width) {
  return width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t line_no, std::string_view column) {
  if (cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan") {
    throw DataError("line " + std::to_string(line_no) + ", column '" + std::string(column) +
                    "': literal '" + std::string(cell) +
                    "' is not a missing marker; leave the cell empty instead");
  }
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + std::string(column) +
                    "': non-numeric cell '" + std::string(cell) + "'");
  }
  return value;
}

}  // namespace

ResponsePattern::ResponsePattern(std::size_t width, std::uint64_t bits) : width_(width), bits_(bits) {
  if (width > max_width) {
    throw std::invalid_argument("response pattern wider than 64 variables");
  }
  if ((bits & ~low_bits(width)) != 0) {
    throw std::invalid_argument("response pattern has bits beyond its width");
  }
}

ResponsePattern ResponsePattern::complete(std::size_t width) {
  return ResponsePattern(width, low_bits(width));
}

ResponsePattern ResponsePattern::from_string(std::string_view text) {
  std::uint64_t bits = 0;
  for (std::size_t j = 0; j < text.size(); ++j) {
    if (text[j] == '1') {
      bits |= std::uint64_t{1} << j;
    } else if (text[j] != '0') {
      throw std::invalid_argument("response pattern string must contain only 0/1");
    }
  }
  return ResponsePattern(text.size(), bits);
}

std::size_t ResponsePattern::observed_count() const {
  return static_cast<std::size_t>(std::popcount(bits_));
}

bool ResponsePattern::is_complete() const { return bits_ == low_bits(width_); }

std::vector<std::size_t> ResponsePattern::observed_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < width_; ++j) {
    if (observed(j)) out.push_back(j);
  }
  return out;
}

std::string ResponsePattern::to_string() const {
  std::string s(width_, '0');
  for (std::size_t j = 0; j < width_; ++j) {
    if (observed(j)) s[j] = '1';
  }
  return s;
}

Dataset::Dataset(std::vector<Column> columns, Eigen::MatrixXd values, std::string outcome)
    : columns_(std::move(columns)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.cols()) != columns_.size()) {
    throw DataError("value matrix has " + std::to_string(values_.cols()) + " columns, header has " +
                    std::to_string(columns_.size()));
  }
  outcome_ = column_index(outcome);
  const std::size_t d = columns_.size();
  masks_.reserve(rows());
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = values_(i, static_cast<Eigen::Index>(j));
      if (std::isnan(v)) continue;
      if (!std::isfinite(v)) {
        throw DataError("row " + std::to_string(i) + ", column '" + columns_[j].name +
                        "': non-finite value");
      }
      if (columns_[j].kind == ColumnKind::binary && v != 0.0 && v != 1.0) {
        throw DataError("row " + std::to_string(i) + ", column '" + columns_[j].name +
                        "': binary column holds a value other than 0/1");
      }
      bits |= std::uint64_t{1} << j;
    }
    masks_.emplace_back(d, bits);
  }
}

std::size_t Dataset::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return j;
  }
  throw DataError("column '" + std::string(name) + "' not found");
}

double Dataset::at(std::size_t row, std::size_t col) const {
  if (!masks_.at(row).observed(col)) {
    throw MaskedReadError("read of unobserved cell (row " + std::to_string(row) + ", column '" +
                          columns_.at(col).name + "')");
  }
  return values_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

Eigen::VectorXd Dataset::complete_row(std::size_t row) const {
  if (!masks_.at(row).is_complete()) {
    throw MaskedReadError("row " + std::to_string(row) + " is not a complete case");
  }
  return values_.row(static_cast<Eigen::Index>(row)).transpose();
}

std::vector<Interval> Dataset::observed_domain() const {
  std::vector<Interval> out(cols());
  for (std::size_t j = 0; j < cols(); ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < rows(); ++i) {
      if (!observed(i, j)) continue;
      lo = std::min(lo, at(i, j));
      hi = std::max(hi, at(i, j));
    }
    out[j] = lo <= hi ? Interval{lo, hi} : Interval{0.0, 0.0};
  }
  return out;
}

Dataset Dataset::select(std::span<const std::string> names) const {
  std::vector<Column> cols;
  Eigen::MatrixXd values(values_.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto j = column_index(names[k]);
    cols.push_back(columns_[j]);
    values.col(static_cast<Eigen::Index>(k)) = values_.col(static_cast<Eigen::Index>(j));
  }
  return Dataset(std::move(cols), std::move(values), outcome_name());
}

Dataset parse_dataset(std::istream& in, std::string_view outcome_col, const TypeHints& hints) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: header row expected");
  // Tolerate a UTF-8 byte order mark.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  std::vector<Column> columns;
  for (const auto h : header) {
    if (h.empty()) throw DataError("header contains an empty column name");
    for (const auto& c : columns) {
      if (c.name == h) throw DataError("duplicate column name '" + std::string(h) + "'");
    }
    columns.push_back(Column{std::string(h), ColumnKind::continuous});
  }
  const std::size_t d = columns.size();
  if (std::none_of(columns.begin(), columns.end(),
                   [&](const Column& c) { return c.name == outcome_col; })) {
    throw DataError("outcome column '" + std::string(outcome_col) + "' not found in header");
  }
  for (const auto& [name, kind] : hints) {
    auto it = std::find_if(columns.begin(), columns.end(), [&](const Column& c) { return c.name == name; });
    if (it == columns.end()) throw DataError("type hint names unknown column '" + name + "'");
  }

  std::vector<double> cells;
  std::size_t n = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != d) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(d) +
                      " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      cells.push_back(fields[j].empty() ? std::numeric_limits<double>::quiet_NaN()
                                        : parse_cell(fields[j], line_no, columns[j].name));
    }
    ++n;
  }

  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i * d + j];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (auto it = hints.find(columns[j].name); it != hints.end()) {
      columns[j].kind = it->second;
      continue;
    }
    const auto col = values.col(static_cast<Eigen::Index>(j));
    const bool binary = (col.array().isNaN() || col.array() == 0.0 || col.array() == 1.0).all();
    columns[j].kind = binary ? ColumnKind::binary : ColumnKind::continuous;
  }
  return Dataset(std::move(columns), std::move(values), std::string(outcome_col));
}

Dataset parse_dataset_string(std::string_view csv, std::string_view outcome_col, const TypeHints& hints) {
  std::istringstream in{std::string(csv)};
  return parse_dataset(in, outcome_col, hints);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    out << (j ? "," : "") << ds.column(j).name;
  }
  out << '\n';
  std::ostringstream cell;
  cell << std::setprecision(17);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      if (j) out << ',';
      if (!ds.observed(i, j)) continue;
      cell.str({});
      cell << ds.at(i, j);
      out << cell.str();
    }
    out << '\n';
  }
}

const std::vector<std::size_t>& PatternIndex::complete_ids() const {
  static const std::vector<std::size_t> empty;
  return complete_ ? groups_[*complete_].rows : empty;
}

bool PatternIndex::contains(const ResponsePattern& r) const {
  return std::any_of(groups_.begin(), groups_.end(),
                     [&](const PatternGroup& g) { return g.pattern == r; });
}

std::vector<ResponsePattern> PatternIndex::incomplete_patterns() const {
  std::vector<ResponsePattern> out;
  for (const auto& g : groups_) {
    if (!g.pattern.is_complete()) out.push_back(g.pattern);
  }
  return out;
}

PatternIndex index_patterns(const Dataset& ds) {
  PatternIndex ix;
  std::map<std::string, std::size_t, std::greater<>> order;
  std::vector<PatternGroup> groups;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto key = ds.mask(i).to_string();
    auto [it, inserted] = order.try_emplace(key, groups.size());
    if (inserted) groups.push_back(PatternGroup{ds.mask(i), {}});
    groups[it->second].rows.push_back(i);
  }
  for (const auto& [key, pos] : order) {
    if (groups[pos].pattern.is_complete()) ix.complete_ = ix.groups_.size();
    ix.groups_.push_back(std::move(groups[pos]));
  }
  ix.total_rows_ = ds.rows();
  return ix;
}

const std::vector<std::size_t>& pattern_rows(const PatternIndex& ix, const ResponsePattern& r) {
  for (const auto& g : ix.groups()) {
    if (g.pattern == r) return g.rows;
  }
  throw std::out_of_range("response pattern " + r.to_string() + " does not occur in the data");
}

}  // namespace ccmv
