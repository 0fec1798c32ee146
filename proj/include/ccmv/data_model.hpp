#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace ccmv {

/// Malformed input data: bad CSV, unknown column, invalid cell.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when code tries to read a cell that the row's response pattern marks as missing.
class MaskedReadError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Which variables of a record are observed. Bit j set means column j is observed.
class ResponsePattern {
 public:
  static constexpr std::size_t max_width = 64;

  ResponsePattern() = default;
  ResponsePattern(std::size_t width, std::uint64_t bits);

  static ResponsePattern complete(std::size_t width);
  /// Parses "1101": character j is column j.
  static ResponsePattern from_string(std::string_view text);

  std::size_t width() const { return width_; }
  std::uint64_t bits() const { return bits_; }
  bool observed(std::size_t j) const { return (bits_ >> j) & 1U; }
  std::size_t observed_count() const;
  bool is_complete() const;
  std::vector<std::size_t> observed_indices() const;
  std::string to_string() const;

  auto operator<=>(const ResponsePattern&) const = default;

 private:
  std::size_t width_ = 0;
  std::uint64_t bits_ = 0;
};

enum class ColumnKind { continuous, binary };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Partially observed table. Missing cells are stored as NaN, but every read goes
/// through `at()`, which refuses masked cells.
class Dataset {
 public:
  Dataset() = default;

  /// `values` is rows x columns; NaN marks a missing cell.
  Dataset(std::vector<Column> columns, Eigen::MatrixXd values, std::string outcome);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t j) const { return columns_.at(j); }
  std::size_t column_index(std::string_view name) const;
  std::size_t outcome_index() const { return outcome_; }
  const std::string& outcome_name() const { return columns_[outcome_].name; }

  const ResponsePattern& mask(std::size_t row) const { return masks_.at(row); }
  bool observed(std::size_t row, std::size_t col) const { return masks_.at(row).observed(col); }

  /// Guarded cell read.
  double at(std::size_t row, std::size_t col) const;

  /// Copies the full row; throws MaskedReadError unless the row is complete.
  Eigen::VectorXd complete_row(std::size_t row) const;

  /// Range of observed values per column. Columns with no observed values get [0, 0].
  std::vector<Interval> observed_domain() const;

  /// New dataset restricted to the named columns, in that order.
  Dataset select(std::span<const std::string> names) const;

 private:
  std::vector<Column> columns_;
  Eigen::MatrixXd values_;
  std::vector<ResponsePattern> masks_;
  std::size_t outcome_ = 0;
};

using TypeHints = std::map<std::string, ColumnKind, std::less<>>;

/// Reads a comma-separated table with a header row. Empty cells are missing.
/// Columns without a hint are binary iff every observed value is 0 or 1.
Dataset parse_dataset(std::istream& in, std::string_view outcome_col, const TypeHints& hints = {});
Dataset parse_dataset_string(std::string_view csv, std::string_view outcome_col,
                             const TypeHints& hints = {});

void write_csv(const Dataset& ds, std::ostream& out);

struct PatternGroup {
  ResponsePattern pattern;
  std::vector<std::size_t> rows;
};

/// Rows grouped by response pattern. Groups are ordered by descending mask string,
/// so the complete pattern (if present) comes first.
class PatternIndex {
 public:
  const std::vector<PatternGroup>& groups() const { return groups_; }
  std::size_t pattern_count() const { return groups_.size(); }
  std::size_t total_rows() const { return total_rows_; }
  bool has_complete() const { return complete_.has_value(); }
  /// Rows of the complete pattern; empty when absent.
  const std::vector<std::size_t>& complete_ids() const;
  bool contains(const ResponsePattern& r) const;
  /// Missing (non-complete) patterns in group order.
  std::vector<ResponsePattern> incomplete_patterns() const;

  friend PatternIndex index_patterns(const Dataset& ds);

 private:
  std::vector<PatternGroup> groups_;
  std::optional<std::size_t> complete_;
  std::size_t total_rows_ = 0;
};

PatternIndex index_patterns(const Dataset& ds);

/// Row indices whose mask equals `r`, in input order. Throws std::out_of_range for
/// a pattern that does not occur.
const std::vector<std::size_t>& pattern_rows(const PatternIndex& ix, const ResponsePattern& r);

}  // namespace ccmv
