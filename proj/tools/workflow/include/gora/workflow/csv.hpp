#pragma once

// Minimal RFC 4180 tables: fields containing a comma, quote or line break are
// quoted, quotes doubled.

#include <filesystem>
#include <string>
#include <vector>

#include "gora/errors.hpp"

namespace gora::workflow {

class CsvError : public Error {
 public:
  using Error::Error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_double(double value);  // 17 significant digits
double parse_double(const std::string& field, const std::string& column);

std::string write_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

void write_csv_file(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv_file(const std::filesystem::path& path);

}  // namespace gora::workflow
