#include "nsc/csv.hpp"

#include <charconv>
#include <cmath>

namespace nsc {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

CsvWriter::CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header) : out_(out) {
  std::string line;
  bool first = true;
  for (auto h : header) append(line, first, std::string(h));
  out_ << line << '\n';
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
  std::string line;
  bool first = true;
  for (const auto& h : header) append(line, first, h);
  out_ << line << '\n';
}

}  // namespace nsc
