#include "skillforge/common/csv.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "skillforge/common/error.h"

namespace skillforge {

namespace {

std::vector<std::string> splitLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
      field.pop_back();
    }
    size_t start = field.find_first_not_of(' ');
    fields.push_back(start == std::string::npos ? std::string() : field.substr(start));
  }
  return fields;
}

}  // namespace

size_t CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw InvalidInput("csv: missing column '" + name + "'");
}

CsvTable readCsv(const std::string& path) {
  std::ifstream in(path);
  throwIf(!in, "csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  size_t lineNumber = 0;
  while (std::getline(in, line)) {
    ++lineNumber;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    auto fields = splitLine(line);
    if (table.header.empty()) {
      table.header = fields;
      continue;
    }
    throwIf(
        fields.size() != table.header.size(),
        path + ":" + std::to_string(lineNumber) + ": expected " +
            std::to_string(table.header.size()) + " fields, got " +
            std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (size_t i = 0; i < fields.size(); ++i) {
      const auto& f = fields[i];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
      throwIf(
          ec != std::errc() || ptr != f.data() + f.size(),
          path + ":" + std::to_string(lineNumber) + ": column '" + table.header[i] +
              "' is not a number: '" + f + "'");
    }
    table.rows.push_back(std::move(row));
  }
  throwIf(table.header.empty(), "csv: '" + path + "' has no header");
  return table;
}

void writeCsv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  throwIf(!out, "csv: cannot write '" + path + "'");
  for (size_t i = 0; i < table.header.size(); ++i) {
    out << (i ? "," : "") << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << formatDouble(row[i]);
    }
    out << '\n';
  }
}

std::string formatDouble(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

}  // namespace skillforge
