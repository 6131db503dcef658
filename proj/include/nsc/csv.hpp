#pragma once

#include <concepts>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace nsc {

/// Shortest decimal text that round-trips the double ('.' decimal point).
std::string format_double(double v);

/// Minimal CSV emitter: ',' separator, header row, LF line endings.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header);
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::string line;
    bool first = true;
    ((append(line, first, cell(fields))), ...);
    line.push_back('\n');
    out_ << line;
  }

 private:
  static void append(std::string& line, bool& first, const std::string& cell) {
    if (!first) line.push_back(',');
    line += cell;
    first = false;
  }
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <std::integral T>
  static std::string cell(T v) {
    return std::to_string(v);
  }

  std::ostream& out_;
};

}  // namespace nsc
