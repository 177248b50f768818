#pragma once

// Minimal RFC-4180-style CSV reader for the corpus adapters. Handles quoted
// fields, escaped quotes, embedded commas and newlines, and both LF and CRLF
// line endings. Header lookup is case-insensitive.

#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sig/text.hpp"

namespace sig::csv {

inline std::vector<std::vector<std::string>> read_rows(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
    any = false;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      any = true;
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty() || !row.empty()) end_row();
        break;
      default:
        field.push_back(c);
        any = true;
        break;
    }
  }
  if (any || !field.empty() || !row.empty()) end_row();
  return rows;
}

class Table {
 public:
  explicit Table(std::istream& in) {
    auto rows = read_rows(in);
    if (rows.empty()) return;
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
      columns_[normalize_name(rows[0][i])] = i;
    }
    rows_.assign(rows.begin() + 1, rows.end());
  }

  std::optional<std::size_t> column(std::string_view name) const {
    auto it = columns_.find(normalize_name(name));
    if (it == columns_.end()) return std::nullopt;
    return it->second;
  }

  // First matching column among several accepted header spellings.
  std::optional<std::size_t> column_any(std::initializer_list<std::string_view> names) const {
    for (auto n : names) {
      if (auto c = column(n)) return c;
    }
    return std::nullopt;
  }

  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  static std::string cell(const std::vector<std::string>& row, std::optional<std::size_t> col) {
    if (!col || *col >= row.size()) return {};
    return row[*col];
  }

 private:
  std::map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace sig::csv
