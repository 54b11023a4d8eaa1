#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace thermocc::csv {

// Minimal comma-separated table: header row plus string cells. No quoting.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by exact header name; -1 when absent.
  int find(const std::string& name) const;
  int require(const std::string& name, const std::filesystem::path& source) const;
};

Table read(const std::filesystem::path& path);
std::vector<std::string> split_line(const std::string& line);

}  // namespace thermocc::csv
