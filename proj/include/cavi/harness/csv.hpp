#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cavi::harness {

/// Raised on any output failure; the message carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lossless decimal form: 17 significant digits, "nan" / "inf" / "-inf" for
/// non-finite values.
inline std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_bool(bool b) { return b ? "true" : "false"; }

/// Row-oriented CSV writer with a fixed header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
      : path_(path), columns_(header.size()) {
    if (path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
      if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    std::vector<std::string> h(header.begin(), header.end());
    row(h);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw std::logic_error("csv row width mismatch for " + path_.string());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("write failed for " + path_.string());
  }

  void close() {
    out_.close();
    if (out_.fail()) throw IoError("close failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
};

/// Reads a numeric CSV (optionally skipping a header line) into rows.
inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                         bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && has_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::vector<double> r;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = line.find(',', pos);
      const std::string cell = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      try {
        r.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("non-numeric cell '" + cell + "' in " + path.string());
      }
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace cavi::harness
