#ifndef STARSEL_DATA_HPP
#define STARSEL_DATA_HPP

// Tabular input: CSV ingestion with typed columns and the optional benchmark
// preprocessing pass.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starsel/error.hpp"

namespace starsel {

enum class ColumnType { numeric, factor };

struct Column {
  std::string name;
  ColumnType type = ColumnType::numeric;
  std::vector<double> num;       // NaN marks a missing numeric cell
  std::vector<std::string> str;  // raw cells; empty marks a missing factor cell

  std::size_t size() const { return str.size(); }
  bool missing(std::size_t i) const {
    return type == ColumnType::numeric ? std::isnan(num[i]) : str[i].empty();
  }
};

class DataTable {
 public:
  std::vector<Column> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  bool has(const std::string& name) const { return find(name) != nullptr; }

  const Column* find(const std::string& name) const {
    for (const auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }
  Column* find(const std::string& name) {
    for (auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }

  const Column& column(const std::string& name) const {
    const Column* c = find(name);
    if (!c) throw DataError("no column named '" + name + "'");
    return *c;
  }

  Eigen::VectorXd numeric(const std::string& name) const {
    const Column& c = column(name);
    if (c.type != ColumnType::numeric) throw DataError("column '" + name + "' is not numeric");
    Eigen::VectorXd v(static_cast<Eigen::Index>(c.num.size()));
    for (std::size_t i = 0; i < c.num.size(); ++i) {
      if (std::isnan(c.num[i]))
        throw DataError("missing value in column '" + name + "', data row " +
                        std::to_string(i + 1));
      v(static_cast<Eigen::Index>(i)) = c.num[i];
    }
    return v;
  }

  std::vector<std::string> labels(const std::string& name) const {
    const Column& c = column(name);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c.missing(i))
        throw DataError("missing value in column '" + name + "', data row " +
                        std::to_string(i + 1));
    return c.str;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& c : columns) n.push_back(c.name);
    return n;
  }

  /// Keeps the rows flagged in `keep`.
  void filter_rows(const std::vector<bool>& keep) {
    for (auto& c : columns) {
      std::vector<double> num;
      std::vector<std::string> str;
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        num.push_back(c.num[i]);
        str.push_back(c.str[i]);
      }
      c.num = std::move(num);
      c.str = std::move(str);
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool is_missing_token(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "."; }

inline std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Splits one CSV record; double quotes protect commas, "" is a literal quote.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = was_quoted = true;
    } else if (ch == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += ch;
    }
  }
  if (quoted) throw DataError("unterminated quote on line " + std::to_string(line_no));
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

}  // namespace detail

/// Column types requested by the caller; unlisted columns are inferred
/// (numeric when every present cell parses as a number).
using Schema = std::map<std::string, ColumnType>;

inline DataTable read_csv(std::istream& in, const Schema& schema = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line, line_no);
      break;
    }
  }
  if (header.empty()) throw DataError("CSV input has no header row");
  std::set<std::string> seen;
  for (const auto& h : header) {
    if (h.empty()) throw DataError("empty column name in header");
    if (!seen.insert(h).second) throw DataError("duplicate column name '" + h + "'");
  }
  for (const auto& [name, type] : schema)
    if (!seen.count(name)) throw DataError("schema names unknown column '" + name + "'");

  DataTable t;
  t.columns.resize(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) t.columns[k].name = header[k];
  std::vector<std::size_t> source_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line, line_no);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    for (std::size_t k = 0; k < cells.size(); ++k)
      t.columns[k].str.push_back(detail::is_missing_token(cells[k]) ? "" : cells[k]);
    source_line.push_back(line_no);
  }

  std::vector<std::string> bad;
  for (auto& c : t.columns) {
    auto it = schema.find(c.name);
    bool numeric = true;
    std::vector<double> num(c.str.size(), std::nan(""));
    for (std::size_t i = 0; i < c.str.size(); ++i) {
      if (c.str[i].empty()) continue;
      auto v = detail::parse_double(c.str[i]);
      if (v) {
        num[i] = *v;
      } else {
        numeric = false;
        if (it != schema.end() && it->second == ColumnType::numeric)
          bad.push_back("line " + std::to_string(source_line[i]) + ", column '" + c.name +
                        "': cannot parse '" + c.str[i] + "' as a number");
      }
    }
    const ColumnType type = it != schema.end() ? it->second
                                               : (numeric ? ColumnType::numeric : ColumnType::factor);
    c.type = type;
    if (type == ColumnType::numeric) c.num = std::move(num);
    else c.num.assign(c.str.size(), 0.0);
  }
  if (!bad.empty()) {
    std::string msg = std::to_string(bad.size()) + " unparseable cell(s):";
    for (const auto& b : bad) msg += "\n  " + b;
    throw DataError(msg);
  }
  return t;
}

inline DataTable read_csv_file(const std::string& path, const Schema& schema = {}) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open data file '" + path + "'");
  return read_csv(f, schema);
}

inline void write_csv(std::ostream& os, const DataTable& t) {
  const auto n = t.rows();
  for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k].name;
  os << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < t.columns.size(); ++k) {
      const auto& c = t.columns[k];
      os << (k ? "," : "");
      if (c.missing(i)) os << "NA";
      else if (c.type == ColumnType::numeric) {
        char buf[32];
        auto r = std::to_chars(buf, buf + sizeof buf, c.num[i]);
        os.write(buf, r.ptr - buf);
      } else {
        os << c.str[i];
      }
    }
    os << "\n";
  }
}

inline Column numeric_column(std::string name, const Eigen::VectorXd& v) {
  Column c;
  c.name = std::move(name);
  c.type = ColumnType::numeric;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    c.num.push_back(v(i));
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v(i));
    c.str.emplace_back(buf, r.ptr);
  }
  return c;
}

inline double sample_skewness(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

struct PreprocessOptions {
  int factor_threshold = 6;  // fewer unique values than this: factor
  double skew_threshold = 2.0;
  std::set<std::string> exclude;  // response, offset, ... left untouched
};

/// Benchmark preprocessing: drop incomplete rows, reject constant columns,
/// recode low-cardinality numerics as factors, log-transform strongly skewed
/// numerics and standardize them. Returns one log line per action.
inline std::vector<std::string> preprocess_uci(DataTable& t, const PreprocessOptions& opt = {}) {
  std::vector<std::string> log;
  const std::size_t n0 = t.rows();
  std::vector<bool> keep(n0, true);
  for (const auto& c : t.columns)
    for (std::size_t i = 0; i < n0; ++i)
      if (c.missing(i)) keep[i] = false;
  const auto kept = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
  log.push_back("dropped " + std::to_string(n0 - kept) + " incomplete row(s) of " +
                std::to_string(n0));
  t.filter_rows(keep);
  if (t.rows() < 2) throw DataError("fewer than two complete rows after preprocessing");

  for (auto& c : t.columns) {
    if (opt.exclude.count(c.name)) continue;
    std::set<std::string> uniq(c.str.begin(), c.str.end());
    if (c.type == ColumnType::numeric) {
      std::set<double> u(c.num.begin(), c.num.end());
      if (u.size() < 2) throw DataError("column '" + c.name + "' is constant (zero variance)");
      if (static_cast<int>(u.size()) < opt.factor_threshold) {
        c.type = ColumnType::factor;
        log.push_back("column '" + c.name + "': " + std::to_string(u.size()) +
                      " unique values, treated as factor");
        continue;
      }
      const double sk = sample_skewness(c.num);
      if (std::abs(sk) > opt.skew_threshold) {
        const double mn = *std::min_element(c.num.begin(), c.num.end());
        const double shift = mn > 0.0 ? 0.0 : 1.0 - mn;
        for (double& v : c.num) v = std::log(v + shift);
        std::ostringstream os;
        os << "column '" << c.name << "': skewness " << sk << ", log-transformed";
        if (shift > 0.0) os << " after shifting by " << shift;
        log.push_back(os.str());
      }
      double mean = 0.0;
      for (double v : c.num) mean += v;
      mean /= static_cast<double>(c.num.size());
      double ss = 0.0;
      for (double v : c.num) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(c.num.size() - 1));
      for (double& v : c.num) v = (v - mean) / sd;
      log.push_back("column '" + c.name + "': standardized");
    } else if (uniq.size() < 2) {
      throw DataError("column '" + c.name + "' is constant (single level)");
    }
  }
  return log;
}

}  // namespace starsel

#endif  // STARSEL_DATA_HPP
