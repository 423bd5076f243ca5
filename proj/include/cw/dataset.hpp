#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cw {

// A single named column. Numeric columns hold doubles with NaN marking a
// missing cell; categorical columns hold codes into an explicit level set
// (-1 marks a missing cell).
class Column {
 public:
  enum class Type { Numeric, Categorical };

  static Column numeric(std::string name, std::vector<double> values);
  // Levels are derived from the values and stored in natural order.
  static Column categorical(std::string name, const std::vector<std::optional<std::string>>& values);

  const std::string& name() const noexcept { return name_; }
  Type type() const noexcept { return type_; }
  bool is_numeric() const noexcept { return type_ == Type::Numeric; }
  std::size_t size() const noexcept;

  bool is_missing(std::size_t row) const;
  double number(std::size_t row) const;  // numeric columns only
  int code(std::size_t row) const;       // categorical columns only
  const std::vector<std::string>& levels() const noexcept { return levels_; }
  std::span<const double> numbers() const noexcept { return numbers_; }

  // Cell rendered as text: numbers via shortest round-trip form, categorical
  // cells as their level; nullopt for missing.
  std::optional<std::string> text(std::size_t row) const;

  // Distinct non-missing values as text, in natural order. For categorical
  // columns this equals levels() restricted to levels that occur.
  std::vector<std::string> distinct_values() const;

  Column subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Column& a, const Column& b);

 private:
  Column() = default;

  std::string name_;
  Type type_ = Type::Numeric;
  std::vector<double> numbers_;
  std::vector<std::int32_t> codes_;
  std::vector<std::string> levels_;
};

// Orders text values numerically when every value parses as a number,
// lexicographically otherwise.
void sort_natural(std::vector<std::string>& values);

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }

  const Column* find(std::string_view name) const;
  // Throws a name error when absent.
  const Column& column(std::string_view name) const;

  Dataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset& a, const Dataset& b) = default;

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

enum class Separator { Comma, Semicolon, Tab };
enum class Quote { None, Double, Single };

struct CsvOptions {
  bool header = true;
  Separator separator = Separator::Comma;
  Quote quote = Quote::Double;
};

char separator_char(Separator s);
Separator parse_separator(std::string_view name);
Quote parse_quote(std::string_view name);

Dataset load_csv(std::string_view bytes, const CsvOptions& options = {});

// Writes a header row and one line per row; numbers in shortest round-trip
// form, missing cells as NA, text fields double-quoted when needed.
std::string export_csv(const Dataset& data, Separator separator = Separator::Comma);

// Appends one CSV/TSV record to `out` (shared by the data+weights export).
void append_csv_record(std::string& out, const std::vector<std::string>& fields, char separator);

struct NumericSummary {
  std::string name;
  std::size_t n = 0;  // non-missing count
  std::optional<double> mean, sd, median, min, max;
};

struct CategoricalSummary {
  std::string name;
  std::vector<std::pair<std::string, std::size_t>> counts;  // level -> count
  std::size_t missing = 0;
};

struct SummaryTable {
  std::size_t n_rows = 0;
  std::vector<NumericSummary> numeric;
  std::vector<CategoricalSummary> categorical;
};

struct GroupedSummary {
  std::string group_by;
  std::vector<std::pair<std::string, SummaryTable>> groups;
};

NumericSummary summarize_numeric(std::string name, std::span<const double> values);
SummaryTable summarize(const Dataset& data);
// One table per distinct non-missing value of `group_by`.
GroupedSummary summarize(const Dataset& data, std::string_view group_by);

// Linear-interpolation quantile on sorted data (the common "type 7" rule).
double quantile_sorted(std::span<const double> sorted, double prob);

}  // namespace cw
