#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "shredder/error.hpp"

namespace shredder::cli {

// Shortest round-trip text for a double; identical across runs.
inline std::string format_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

inline std::string format_number(std::size_t value) { return std::to_string(value); }

// RFC 4180 output: header row, CRLF-free rows, fields quoted when needed.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << quote(fields[i]);
    }
    out_ << '\n';
    if (!out_) throw Error("write failed: " + path_.string());
  }

 private:
  static std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    return quoted + '"';
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace shredder::cli
