#include "csv.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "thermocc/config_io.hpp"
#include "thermocc/errors.hpp"

namespace thermocc::csv {

int Table::find(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int Table::require(const std::string& name, const std::filesystem::path& source) const {
  const int idx = find(name);
  if (idx < 0) throw ValidationError(fmt::format("{}: missing column '{}'", source.string(), name));
  return idx;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(config_values::trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (config_values::trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ValidationError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), line_no,
                                        t.header.size(), cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ValidationError(fmt::format("{}: empty file", path.string()));
  return t;
}

}  // namespace thermocc::csv
