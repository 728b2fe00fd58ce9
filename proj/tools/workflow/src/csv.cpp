#include "gora/workflow/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace gora::workflow {

namespace {

bool needs_quotes(const std::string& field) {
  return field.find_first_of(",\"\r\n") != std::string::npos;
}

void append_field(std::string& out, const std::string& field) {
  if (!needs_quotes(field)) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void append_record(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    append_field(out, fields[i]);
  }
  out += '\n';
}

}  // namespace

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

double parse_double(const std::string& field, const std::string& column) {
  if (field.empty()) throw CsvError(fmt::format("column '{}': empty numeric field", column));
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size()) {
    throw CsvError(fmt::format("column '{}': '{}' is not a number", column, field));
  }
  return v;
}

std::string write_csv(const CsvTable& table) {
  std::string out;
  append_record(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw CsvError(fmt::format("row has {} fields, header has {}", row.size(), table.header.size()));
    }
    append_record(out, row);
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
      ++line;
    } else if (c == '\r') {
      // tolerated before '\n'
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw CsvError(fmt::format("unterminated quoted field near line {}", line));
  if (field_started || !record.empty()) end_record();

  if (records.empty()) throw CsvError("empty CSV: no header");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw CsvError(fmt::format("record {} has {} fields, header has {}", r + 1, records[r].size(),
                                 table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

void write_csv_file(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError(fmt::format("cannot write '{}'", path.string()));
  out << write_csv(table);
  if (!out) throw CsvError(fmt::format("write to '{}' failed", path.string()));
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_csv(text.str());
}

}  // namespace gora::workflow
