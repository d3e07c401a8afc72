#pragma once

// Minimal CSV layer for the dialect used throughout: comma separated, one
// header row, UTF-8, '.' decimal separator, no quoting (field values in this
// domain never contain commas).

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fedehr/errors.hpp"
#include "fedehr/util.hpp"

namespace fedehr {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

inline CsvTable read_csv_table(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!have_header) {
      table.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;  // tolerate trailing blank lines
    table.rows.push_back(split_csv_line(line));
  }
  if (!have_header) throw Error("CSV input has no header row");
  return table;
}

inline void write_csv_table(std::ostream& out, const CsvTable& table) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << ',';
    out << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
}

}  // namespace fedehr
