#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "thermocc/core_model.hpp"
#include "thermocc/units.hpp"

namespace thermocc {

/// Reads a scenario file with [layout], [thermal] and [scenario] sections and
/// validates it. Relative ambient profile paths resolve against the file's
/// directory.
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(std::string_view text,
                              const std::filesystem::path& base_dir = {});

/// Writes every field explicitly (per-room lists, edge list, temperatures in
/// K at full precision) so that load_scenario(save_scenario(c)) == c.
void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path);
std::string format_scenario(const ScenarioConfig& cfg);

// Value parsers shared by every structured text file in the project.
namespace config_values {

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

// "0.25", "1e-6" or a simple fraction "1/60".
double parse_real(std::string_view s, std::string_view what);
long long parse_integer(std::string_view s, std::string_view what);
std::vector<double> parse_real_list(std::string_view s, std::string_view what);
std::vector<int> parse_int_list(std::string_view s, std::string_view what);

struct TaggedTemperature {
  double value = 0.0;
  TemperatureUnit unit = TemperatureUnit::Kelvin;
};
// "70 F", "299.8 K", "21.5C". The unit suffix is mandatory.
TaggedTemperature parse_tagged_temperature(std::string_view s, std::string_view what);
double parse_temperature_k(std::string_view s, std::string_view what);
// Same syntax, but converted as a difference (std deviations, spreads).
double parse_temperature_delta_k(std::string_view s, std::string_view what);

std::string format_real(double v);

}  // namespace config_values

}  // namespace thermocc
