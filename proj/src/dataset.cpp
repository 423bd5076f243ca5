#include "cw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

#include "cw/error.hpp"
#include "cw/format.hpp"

namespace cw {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool is_missing_marker(std::string_view raw) {
  const std::string t = trim(raw);
  return t.empty() || t == "NA";
}

}  // namespace

void sort_natural(std::vector<std::string>& values) {
  const bool all_numeric = std::all_of(values.begin(), values.end(),
                                       [](const std::string& v) { return parse_number(v).has_value(); });
  if (all_numeric) {
    std::stable_sort(values.begin(), values.end(), [](const std::string& a, const std::string& b) {
      const double x = *parse_number(a);
      const double y = *parse_number(b);
      return x < y || (x == y && a < b);
    });
  } else {
    std::sort(values.begin(), values.end());
  }
}

// ---- Column ----------------------------------------------------------------

Column Column::numeric(std::string name, std::vector<double> values) {
  Column c;
  c.name_ = std::move(name);
  c.type_ = Type::Numeric;
  c.numbers_ = std::move(values);
  return c;
}

Column Column::categorical(std::string name, const std::vector<std::optional<std::string>>& values) {
  Column c;
  c.name_ = std::move(name);
  c.type_ = Type::Categorical;
  std::set<std::string> distinct;
  for (const auto& v : values)
    if (v) distinct.insert(*v);
  c.levels_.assign(distinct.begin(), distinct.end());
  sort_natural(c.levels_);
  c.codes_.reserve(values.size());
  for (const auto& v : values) {
    if (!v) {
      c.codes_.push_back(-1);
      continue;
    }
    const auto it = std::find(c.levels_.begin(), c.levels_.end(), *v);
    c.codes_.push_back(static_cast<std::int32_t>(it - c.levels_.begin()));
  }
  return c;
}

std::size_t Column::size() const noexcept {
  return type_ == Type::Numeric ? numbers_.size() : codes_.size();
}

bool Column::is_missing(std::size_t row) const {
  return type_ == Type::Numeric ? std::isnan(numbers_.at(row)) : codes_.at(row) < 0;
}

double Column::number(std::size_t row) const {
  if (type_ != Type::Numeric) throw Error(ErrorKind::Input, "column '" + name_ + "' is not numeric");
  return numbers_.at(row);
}

int Column::code(std::size_t row) const {
  if (type_ != Type::Categorical) throw Error(ErrorKind::Input, "column '" + name_ + "' is not categorical");
  return codes_.at(row);
}

std::optional<std::string> Column::text(std::size_t row) const {
  if (is_missing(row)) return std::nullopt;
  if (type_ == Type::Numeric) return format_number(numbers_[row]);
  return levels_[static_cast<std::size_t>(codes_[row])];
}

std::vector<std::string> Column::distinct_values() const {
  if (type_ == Type::Categorical) {
    std::vector<bool> seen(levels_.size(), false);
    for (auto c : codes_)
      if (c >= 0) seen[static_cast<std::size_t>(c)] = true;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < levels_.size(); ++i)
      if (seen[i]) out.push_back(levels_[i]);
    return out;
  }
  std::set<double> distinct;
  for (double v : numbers_)
    if (!std::isnan(v)) distinct.insert(v);
  std::vector<std::string> out;
  for (double v : distinct) out.push_back(format_number(v));
  return out;
}

Column Column::subset(std::span<const std::size_t> rows) const {
  Column c;
  c.name_ = name_;
  c.type_ = type_;
  c.levels_ = levels_;
  if (type_ == Type::Numeric) {
    c.numbers_.reserve(rows.size());
    for (auto r : rows) c.numbers_.push_back(numbers_.at(r));
  } else {
    c.codes_.reserve(rows.size());
    for (auto r : rows) c.codes_.push_back(codes_.at(r));
  }
  return c;
}

bool operator==(const Column& a, const Column& b) {
  if (a.name_ != b.name_ || a.type_ != b.type_ || a.size() != b.size()) return false;
  if (a.type_ == Column::Type::Categorical) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a.text(i) != b.text(i)) return false;
    return true;
  }
  for (std::size_t i = 0; i < a.numbers_.size(); ++i) {
    const double x = a.numbers_[i];
    const double y = b.numbers_[i];
    if (std::isnan(x) != std::isnan(y)) return false;
    if (!std::isnan(x) && x != y) return false;
  }
  return true;
}

// ---- Dataset ---------------------------------------------------------------

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& c = columns_[i];
    if (c.name().empty()) throw Error(ErrorKind::Schema, "column " + std::to_string(i + 1) + " has an empty name");
    if (!names.insert(c.name()).second) throw Error(ErrorKind::Schema, "duplicate column name '" + c.name() + "'");
    if (i == 0) {
      n_rows_ = c.size();
    } else if (c.size() != n_rows_) {
      throw Error(ErrorKind::Schema, "column '" + c.name() + "' has " + std::to_string(c.size()) +
                                         " rows, expected " + std::to_string(n_rows_));
    }
  }
}

const Column* Dataset::find(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name() == name) return &c;
  return nullptr;
}

const Column& Dataset::column(std::string_view name) const {
  const Column* c = find(name);
  if (c == nullptr) throw Error(ErrorKind::Name, "no column named '" + std::string(name) + "'");
  return *c;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) cols.push_back(c.subset(rows));
  return Dataset(std::move(cols));
}

// ---- CSV -------------------------------------------------------------------

char separator_char(Separator s) {
  switch (s) {
    case Separator::Comma: return ',';
    case Separator::Semicolon: return ';';
    case Separator::Tab: return '\t';
  }
  return ',';
}

Separator parse_separator(std::string_view name) {
  if (name == "comma" || name == ",") return Separator::Comma;
  if (name == "semicolon" || name == ";") return Separator::Semicolon;
  if (name == "tab" || name == "\t") return Separator::Tab;
  throw Error(ErrorKind::Input, "unknown separator '" + std::string(name) + "' (expected comma, semicolon or tab)");
}

Quote parse_quote(std::string_view name) {
  if (name == "none") return Quote::None;
  if (name == "double") return Quote::Double;
  if (name == "single") return Quote::Single;
  throw Error(ErrorKind::Input, "unknown quote '" + std::string(name) + "' (expected none, double or single)");
}

namespace {

std::vector<std::vector<std::string>> split_records(std::string_view bytes, char sep, Quote quote) {
  const char q = quote == Quote::Double ? '"' : quote == Quote::Single ? '\'' : '\0';
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool line_has_content = false;
  std::size_t i = 0;
  const std::size_t n = bytes.size();

  auto end_record = [&] {
    if (line_has_content) {
      fields.push_back(std::move(field));
      records.push_back(std::move(fields));
    }
    fields.clear();
    field.clear();
    line_has_content = false;
  };

  while (i < n) {
    const char c = bytes[i];
    if (in_quotes) {
      if (c == q) {
        if (i + 1 < n && bytes[i + 1] == q) {
          field.push_back(q);
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field.push_back(c);
      }
      ++i;
      continue;
    }
    if (q != '\0' && c == q && trim(field).empty()) {
      field.clear();
      in_quotes = true;
      line_has_content = true;
    } else if (c == sep) {
      fields.push_back(std::move(field));
      field.clear();
      line_has_content = true;
    } else if (c == '\n' || c == '\r') {
      end_record();
      if (c == '\r' && i + 1 < n && bytes[i + 1] == '\n') ++i;
    } else {
      field.push_back(c);
      line_has_content = true;
    }
    ++i;
  }
  if (in_quotes) throw ParseError(records.size() + 1, "unterminated quoted field");
  end_record();
  return records;
}

}  // namespace

Dataset load_csv(std::string_view bytes, const CsvOptions& options) {
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xEF &&
      static_cast<unsigned char>(bytes[1]) == 0xBB && static_cast<unsigned char>(bytes[2]) == 0xBF)
    bytes.remove_prefix(3);

  const auto records = split_records(bytes, separator_char(options.separator), options.quote);
  if (records.empty()) throw Error(ErrorKind::EmptyData, "input contains no records");

  const std::size_t width = records.front().size();
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != width)
      throw ParseError(r + 1, "expected " + std::to_string(width) + " fields, found " +
                                  std::to_string(records[r].size()));
  }

  std::vector<std::string> names;
  std::size_t first_data = 0;
  if (options.header) {
    for (const auto& h : records.front()) names.push_back(trim(h));
    first_data = 1;
  } else {
    for (std::size_t j = 0; j < width; ++j) names.push_back("V" + std::to_string(j + 1));
  }
  std::set<std::string> seen;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j].empty()) throw Error(ErrorKind::Schema, "header field " + std::to_string(j + 1) + " is empty");
    if (!seen.insert(names[j]).second) throw Error(ErrorKind::Schema, "duplicate header name '" + names[j] + "'");
  }
  const std::size_t n_rows = records.size() - first_data;
  if (n_rows == 0) throw Error(ErrorKind::EmptyData, "input has a header but no data rows");

  std::vector<Column> columns;
  columns.reserve(width);
  for (std::size_t j = 0; j < width; ++j) {
    std::vector<double> numbers(n_rows, kMissing);
    bool numeric = true;
    for (std::size_t r = 0; r < n_rows && numeric; ++r) {
      const auto& raw = records[first_data + r][j];
      if (is_missing_marker(raw)) continue;
      if (auto v = parse_number(raw)) {
        numbers[r] = *v;
      } else {
        numeric = false;
      }
    }
    if (numeric) {
      columns.push_back(Column::numeric(names[j], std::move(numbers)));
      continue;
    }
    std::vector<std::optional<std::string>> text(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
      const auto& raw = records[first_data + r][j];
      if (!is_missing_marker(raw)) text[r] = raw;
    }
    columns.push_back(Column::categorical(names[j], text));
  }
  return Dataset(std::move(columns));
}

void append_csv_record(std::string& out, const std::vector<std::string>& fields, char separator) {
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (j > 0) out.push_back(separator);
    const auto& f = fields[j];
    const bool needs_quotes = f.find_first_of(std::string{separator, '"', '\n', '\r'}) != std::string::npos ||
                              (!f.empty() && (f.front() == ' ' || f.back() == ' '));
    if (!needs_quotes) {
      out += f;
      continue;
    }
    out.push_back('"');
    for (char c : f) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    out.push_back('"');
  }
  out.push_back('\n');
}

std::string export_csv(const Dataset& data, Separator separator) {
  const char sep = separator_char(separator);
  std::string out;
  std::vector<std::string> fields;
  for (const auto& c : data.columns()) fields.push_back(c.name());
  append_csv_record(out, fields, sep);
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    fields.clear();
    for (const auto& c : data.columns()) fields.push_back(c.text(r).value_or("NA"));
    append_csv_record(out, fields, sep);
  }
  return out;
}

// ---- summaries -------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) return kMissing;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

NumericSummary summarize_numeric(std::string name, std::span<const double> values) {
  NumericSummary s;
  s.name = std::move(name);
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values)
    if (!std::isnan(x)) v.push_back(x);
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  s.mean = mean;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  s.median = quantile_sorted(v, 0.5);
  s.min = v.front();
  s.max = v.back();
  return s;
}

SummaryTable summarize(const Dataset& data) {
  SummaryTable table;
  table.n_rows = data.n_rows();
  for (const auto& c : data.columns()) {
    if (c.is_numeric()) {
      table.numeric.push_back(summarize_numeric(c.name(), c.numbers()));
      continue;
    }
    CategoricalSummary s;
    s.name = c.name();
    std::vector<std::size_t> counts(c.levels().size(), 0);
    for (std::size_t r = 0; r < c.size(); ++r) {
      const int code = c.code(r);
      if (code < 0)
        ++s.missing;
      else
        ++counts[static_cast<std::size_t>(code)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) s.counts.emplace_back(c.levels()[k], counts[k]);
    table.categorical.push_back(std::move(s));
  }
  return table;
}

GroupedSummary summarize(const Dataset& data, std::string_view group_by) {
  const Column& g = data.column(group_by);
  GroupedSummary out;
  out.group_by = std::string(group_by);
  for (const auto& value : g.distinct_values()) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < data.n_rows(); ++r)
      if (g.text(r) == value) rows.push_back(r);
    out.groups.emplace_back(value, summarize(data.subset(rows)));
  }
  return out;
}

}  // namespace cw
