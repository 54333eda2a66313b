#pragma once

// Minimal RFC 4180 reader/writer. Fields containing a comma, quote, CR or LF
// are quoted on output; doubled quotes inside quoted fields are unescaped.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vtv::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by header name; throws Error(Parse) when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

// The first record is the header. Blank lines are skipped. Every row must
// have as many fields as the header.
CsvTable parse_csv(std::string_view text);
std::string write_csv(const CsvTable& table);

std::string csv_field(std::string_view value);

// Shortest representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

// Throws Error(Parse) unless `table.header` equals `expected`.
void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace vtv::io
