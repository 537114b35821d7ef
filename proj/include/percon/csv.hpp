#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "percon/common.hpp"

namespace percon {

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& file, int line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(file + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

inline long parse_long(const std::string& s, const std::string& file, int line) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(file + ":" + std::to_string(line) + ": not an integer: '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string path;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ConfigError(path + ": missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  CsvTable t;
  t.path = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (lineno == 1) {
      t.header = fields;
    } else {
      if (fields.size() != t.header.size()) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.header.size()) + " fields, got " +
                          std::to_string(fields.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw ConfigError(path + ": empty file");
  return t;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path), path_(path) {
    if (!out_) throw ConfigError(path + ": cannot open for writing");
  }

  void row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace percon
