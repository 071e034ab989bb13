#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include "styleguide/errors.hpp"

namespace styleguide {

// Shortest round-trip formatting, so CSVs are exact and reproducible.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Minimal CSV writer: fields never contain commas, quotes or newlines.
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::initializer_list<const char*> header)
      : path_(std::move(path)), out_(path_) {
    if (!out_) throw IoError("cannot open " + path_.string() + " for writing");
    bool first = true;
    for (const char* h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
    if (!out_) throw IoError("failed writing " + path_.string());
  }

  // Flushes and closes; throws if anything failed.
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  static std::string cell(double v) { return format_real(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(unsigned long v) { return std::to_string(v); }
  static std::string cell(unsigned long long v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace styleguide
