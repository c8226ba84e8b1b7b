#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mrieval {

/// Minimal comma-separated table: no quoting, `#` lines and blank lines are
/// skipped, fields are whitespace-trimmed.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::string_view text);
CsvTable load_csv(const std::string& path);
std::string write_csv(const CsvTable& t);

/// Throws Error naming `what` when the field is not a complete real number.
double parse_real(std::string_view field, std::string_view what);
/// Shortest representation that parses back to the same double.
std::string format_real(double v);
/// Fixed-point with `decimals` digits.
std::string format_fixed(double v, int decimals);

}  // namespace mrieval
