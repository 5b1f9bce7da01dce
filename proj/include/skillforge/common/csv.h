#pragma once

#include <string>
#include <vector>

namespace skillforge {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Index of a named column; throws InvalidInput when absent.
  size_t column(const std::string& name) const;
};

CsvTable readCsv(const std::string& path);
void writeCsv(const std::string& path, const CsvTable& table);

// Shortest representation that parses back to the identical double.
std::string formatDouble(double value);

}  // namespace skillforge
