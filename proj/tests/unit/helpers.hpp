#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "thermocc/core_model.hpp"
#include "thermocc/units.hpp"

namespace thermocc::testing {

inline std::filesystem::path data_dir() { return THERMOCC_DATA_DIR; }
inline std::filesystem::path fixtures_dir() { return THERMOCC_FIXTURES_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("thermocc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Reference constants on a smaller floor.
inline ScenarioConfig small_scenario(int rows, int cols, int people, int steps, int tr) {
  ScenarioConfig c = default_reference_scenario();
  c.layout = BuildingLayout::grid(rows, cols);
  c.params.t_hvac.assign(static_cast<std::size_t>(rows * cols), fahrenheit_to_kelvin(55.0));
  c.n_people = people;
  c.horizon_steps = steps;
  c.time_range_steps = tr;
  return c;
}

// Random valid scenario: grid shape, head count, horizon and window length
// drawn from `rng`; some interior rooms lose their ambient exposure.
inline ScenarioConfig random_scenario(std::mt19937_64& rng) {
  // Head counts stay below what the supply air can remove from one room
  // (about a dozen people at these constants).
  std::uniform_int_distribution<int> dim(1, 4), windows(1, 6), tr(5, 40);
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  const int rows = dim(rng), cols = dim(rng);
  const int w = windows(rng), t = tr(rng);
  std::uniform_int_distribution<int> people(0, 2 * rows * cols);
  ScenarioConfig c = small_scenario(rows, cols, people(rng), w * t, t);
  for (int r = 1; r + 1 < rows; ++r)
    for (int col = 1; col + 1 < cols; ++col) c.layout.ambient_exposed[static_cast<std::size_t>(r * cols + col)] = false;
  for (auto& wi : c.layout.weights) wi = weight(rng);
  c.seed = rng();
  return c;
}

}  // namespace thermocc::testing
