#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "thermocc/core_model.hpp"
#include "thermocc/simulator.hpp"
#include "thermocc/units.hpp"

namespace thermocc {

enum class TimeFormat { Hours, Minutes, Seconds, Iso8601 };

struct ColumnBinding {
  std::string name;
  std::optional<TemperatureUnit> unit;  // required for temperature roles
};

/// Binds CSV headers to roles. Room keys are 1-based as in the file.
struct ColumnMap {
  ColumnBinding time;
  TimeFormat time_format = TimeFormat::Hours;
  std::map<int, ColumnBinding> room_temp;
  std::map<int, ColumnBinding> hvac_state;
  std::map<int, ColumnBinding> hvac_temp;
  std::optional<ColumnBinding> ambient;
};

ColumnMap parse_column_map(std::string_view text);
ColumnMap load_column_map(const std::filesystem::path& path);

struct FromColumn {};
struct SyntheticGaussian {
  double mean_k = 0.0;
  double std_k = 0.0;
  int smoothing_window = 1;
};
struct AlwaysOff {};
struct ManualWindows {
  // Room (1-based) -> [start, end) step ranges with the AC on.
  std::map<int, std::vector<std::pair<int, int>>> windows;
  // Same, as clock times in hours of day; converted with the trace's t0.
  std::map<int, std::vector<std::pair<double, double>>> clock_windows;
};
struct ConstantTemperature {
  double value_k = 0.0;
};
struct DropRoom {};

/// Where each SensorTrace channel comes from when the raw data lacks it.
struct ImputationPolicy {
  std::variant<FromColumn, SyntheticGaussian> ambient;
  std::variant<FromColumn, AlwaysOff, ManualWindows> hvac_state;
  std::variant<FromColumn, ConstantTemperature> hvac_temp;
  // Rooms of the layout without a temperature column.
  std::optional<std::variant<DropRoom, ConstantTemperature>> missing_neighbor_temp;
  std::optional<double> delta_t;  // h
  std::uint64_t seed = 0;

  void validate(const ColumnMap& columns) const;
};

ImputationPolicy parse_policy(std::string_view text);
ImputationPolicy load_policy(const std::filesystem::path& path);

/// 0-based layout rooms that survive ingestion, in order. Rooms without a
/// temperature column are dropped or kept according to the policy.
std::vector<int> kept_rooms(const ColumnMap& columns, const ImputationPolicy& policy, const BuildingLayout& layout);

/// Resamples a raw sensor CSV onto a uniform grid of step delta_t (h)
/// starting at the first timestamp, filling missing channels per policy.
/// Rooms dropped by the policy are removed from the returned trace's layout.
/// Refuses to interpolate across raw gaps longer than 5 * delta_t.
SensorTrace ingest_csv(const std::filesystem::path& path, const ColumnMap& columns,
                       const ImputationPolicy& policy, double delta_t, const BuildingLayout& layout);

/// Maximum raw-sample gap, in grid steps, that ingestion will interpolate over.
inline constexpr double kMaxGapSteps = 5.0;

}  // namespace thermocc
