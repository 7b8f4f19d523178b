#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace extmil {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);
/// Strict parse of a full string; throws RuntimeFailure on garbage.
double parse_double(std::string_view text);

/// Minimal CSV table: optional leading '#' comment lines, one header row,
/// comma-separated fields without quoting. LF line endings on output.
struct CsvTable {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws if absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const CsvTable& table);
/// Writes to `path` via a temporary file and rename, so readers never see a partial file.
void write_csv_file(const std::string& path, const CsvTable& table);

}  // namespace extmil
