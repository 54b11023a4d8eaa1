#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace thermocc {

enum class RoomClass { BigConference, SmallConference, Office };

std::string_view room_class_name(RoomClass c);
RoomClass parse_room_class(std::string_view name);

/// Floor plan: which rooms share walls and which touch the outside.
///
/// Rooms are indexed from 0 internally; files and user-facing output number
/// them from 1.
struct BuildingLayout {
  int k = 0;
  // Undirected edges (i < j), sorted.
  std::vector<std::pair<int, int>> edges;
  std::vector<bool> ambient_exposed;
  std::vector<RoomClass> room_class;
  // Occupant placement weights w_i.
  std::vector<double> weights;

  /// Rows x cols grid with 4-neighbour adjacency, rooms numbered row-major.
  static BuildingLayout grid(int rows, int cols);

  std::vector<std::vector<int>> neighbors() const;
  /// w_i / sum(w).
  std::vector<double> placement_probabilities() const;
  void validate() const;

  bool operator==(const BuildingLayout&) const = default;
};

/// Reduced coefficients of the room heat balance, in K, h, J and W.
struct ThermalParams {
  double alpha = 0.0;   // ambient conduction rate, 1/h
  double beta = 0.0;    // inter-room conduction rate, 1/h
  double omega = 0.0;   // internal-device heating rate, K/h
  double gamma = 0.0;   // inverse heat capacity, K/J
  double phi = 0.0;     // HVAC coupling rate, 1/h
  std::vector<double> t_hvac;  // supply-air temperature per room, K
  double t_min = 0.0;   // K
  double t_max = 0.0;   // K
  double delta_t = 0.0; // h
  double q_mean = 0.0;  // per-person emitted power, W
  double q_std = 0.0;   // W

  void validate(int k) const;

  bool operator==(const ThermalParams&) const = default;
};

struct SyntheticAmbient {
  double mean_k = 0.0;
  double std_k = 0.0;
  int smoothing_window = 5;

  bool operator==(const SyntheticAmbient&) const = default;
};

struct AmbientFile {
  std::filesystem::path path;

  bool operator==(const AmbientFile&) const = default;
};

using AmbientProfile = std::variant<SyntheticAmbient, AmbientFile>;

struct ScenarioConfig {
  BuildingLayout layout;
  ThermalParams params;
  int n_people = 0;
  int horizon_steps = 0;
  int time_range_steps = 0;
  AmbientProfile ambient_profile;
  double noise_std = 0.0;  // K
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const ScenarioConfig&) const = default;
};

/// The 16-room reference office floor: one big and one small conference
/// room, fourteen offices, 45 people, a 10 h day at one-minute steps.
ScenarioConfig default_reference_scenario();

/// Room heat capacity the reduced coefficients are derived from, J/K.
inline constexpr double kReferenceHeatCapacity = 1.0e6;

}  // namespace thermocc
