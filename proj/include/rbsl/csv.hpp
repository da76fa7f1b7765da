#pragma once

// Plain comma-separated tables: no quoting, one header line.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rbsl/common.hpp"

namespace rbsl {

/// Shortest text that reads back to the same double; "nan" for NaN.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError(1, name, "missing column");
  }

  /// Numeric column; "nan" cells read as NaN.
  std::vector<double> numbers(const std::string& name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string& s = rows[r][c];
      if (s == "nan") {
        out.push_back(std::nan(""));
        continue;
      }
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError(r + 2, name, "not a number: '" + s + "'");
      out.push_back(v);
    }
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Reads a table; every row must have as many cells as the header.
inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError(n, "row", "expected " + std::to_string(t.header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace rbsl
