#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ncham/errors.hpp"

namespace ncham {

/// 17 significant digits: enough to round-trip any double exactly.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw InvalidInput("cannot open for writing: " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void raw_line(const std::string& line) { out_ << line << '\n'; }

 private:
  std::ofstream out_;
};

}  // namespace ncham
