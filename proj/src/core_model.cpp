#include "thermocc/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "thermocc/errors.hpp"
#include "thermocc/units.hpp"

namespace thermocc {

std::string_view room_class_name(RoomClass c) {
  switch (c) {
    case RoomClass::BigConference: return "big_conference";
    case RoomClass::SmallConference: return "small_conference";
    case RoomClass::Office: return "office";
  }
  return "office";
}

RoomClass parse_room_class(std::string_view name) {
  if (name == "big_conference" || name == "B") return RoomClass::BigConference;
  if (name == "small_conference" || name == "S") return RoomClass::SmallConference;
  if (name == "office" || name == "O") return RoomClass::Office;
  throw ValidationError("unknown room class '" + std::string(name) + "'");
}

BuildingLayout BuildingLayout::grid(int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw ValidationError("layout.grid: dimensions must be positive");
  BuildingLayout layout;
  layout.k = rows * cols;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) layout.edges.emplace_back(i, i + 1);
      if (r + 1 < rows) layout.edges.emplace_back(i, i + cols);
    }
  }
  std::sort(layout.edges.begin(), layout.edges.end());
  layout.ambient_exposed.assign(layout.k, true);
  layout.room_class.assign(layout.k, RoomClass::Office);
  layout.weights.assign(layout.k, 1.0);
  return layout;
}

std::vector<std::vector<int>> BuildingLayout::neighbors() const {
  std::vector<std::vector<int>> out(k);
  for (auto [i, j] : edges) {
    out[i].push_back(j);
    out[j].push_back(i);
  }
  for (auto& list : out) std::sort(list.begin(), list.end());
  return out;
}

std::vector<double> BuildingLayout::placement_probabilities() const {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> p(weights.size());
  std::transform(weights.begin(), weights.end(), p.begin(), [&](double w) { return w / total; });
  return p;
}

void BuildingLayout::validate() const {
  if (k <= 0) throw ValidationError("layout: room count must be positive");
  const auto n = static_cast<std::size_t>(k);
  if (ambient_exposed.size() != n || room_class.size() != n || weights.size() != n)
    throw ValidationError("layout: per-room lists must have exactly " + std::to_string(k) + " entries");
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= k || j >= k)
      throw ValidationError("layout.edges: room index out of range");
    if (i == j) throw ValidationError("layout.edges: room " + std::to_string(i + 1) + " adjacent to itself");
    if (i > j) throw ValidationError("layout.edges: edges must be stored with i < j");
  }
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end() ||
      !std::is_sorted(edges.begin(), edges.end()))
    throw ValidationError("layout.edges: edge list must be sorted and free of duplicates");
  const auto nb = neighbors();
  for (int i = 0; i < k; ++i) {
    if (nb[i].empty() && !ambient_exposed[i])
      throw ValidationError("layout: room " + std::to_string(i + 1) +
                            " has no neighbours and no ambient exposure");
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw ValidationError("layout.weights: weight of room " + std::to_string(i + 1) +
                            " must be strictly positive");
  }
}

void ThermalParams::validate(int k) const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string("thermal.") + name + " must be > 0");
  };
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(gamma, "gamma");
  positive(phi, "phi");
  positive(delta_t, "delta_t");
  positive(q_mean, "q_mean");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw ValidationError("thermal.omega must be >= 0");
  if (!(q_std >= 0.0) || !std::isfinite(q_std)) throw ValidationError("thermal.q_std must be >= 0");
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || !(t_min < t_max))
    throw ValidationError("thermal setpoints: t_min must be below t_max");
  if (t_hvac.size() != static_cast<std::size_t>(k))
    throw ValidationError("thermal.t_hvac: expected one supply temperature per room");
  for (std::size_t i = 0; i < t_hvac.size(); ++i) {
    if (!std::isfinite(t_hvac[i]) || !(t_hvac[i] < t_min))
      throw ValidationError("thermal.t_hvac: supply temperature of room " + std::to_string(i + 1) +
                            " must be below t_min");
  }
}

void ScenarioConfig::validate() const {
  layout.validate();
  params.validate(layout.k);
  if (n_people < 0) throw ValidationError("scenario.n_people must be >= 0");
  if (horizon_steps < 2) throw ValidationError("scenario.horizon_steps must be >= 2");
  if (time_range_steps < 1) throw ValidationError("scenario.time_range_steps must be >= 1");
  if (time_range_steps > horizon_steps)
    throw ValidationError("scenario.time_range_steps must not exceed horizon_steps");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ValidationError("scenario.noise_std must be >= 0");
  if (const auto* synth = std::get_if<SyntheticAmbient>(&ambient_profile)) {
    if (!std::isfinite(synth->mean_k) || !(synth->mean_k > 0.0))
      throw ValidationError("scenario.ambient_mean must be a positive absolute temperature");
    if (!(synth->std_k >= 0.0) || !std::isfinite(synth->std_k))
      throw ValidationError("scenario.ambient_std must be >= 0");
    if (synth->smoothing_window < 1)
      throw ValidationError("scenario.ambient_smoothing must be >= 1");
  } else if (std::get<AmbientFile>(ambient_profile).path.empty()) {
    throw ValidationError("scenario.ambient_file must not be empty");
  }
}

ScenarioConfig default_reference_scenario() {
  ScenarioConfig cfg;
  auto layout = BuildingLayout::grid(4, 4);
  for (int room : {6, 7, 10, 11}) layout.ambient_exposed[room - 1] = false;
  layout.room_class[0] = RoomClass::BigConference;
  layout.room_class[15] = RoomClass::SmallConference;
  for (int i = 0; i < layout.k; ++i) {
    switch (layout.room_class[i]) {
      case RoomClass::BigConference: layout.weights[i] = 5.0; break;
      case RoomClass::SmallConference: layout.weights[i] = 3.0; break;
      case RoomClass::Office: layout.weights[i] = 1.0; break;
    }
  }
  cfg.layout = layout;

  ThermalParams& p = cfg.params;
  p.alpha = 0.1;
  p.beta = 0.1;
  p.omega = 1.36;
  p.gamma = 1.0 / kReferenceHeatCapacity;
  p.phi = 0.6;
  p.t_min = fahrenheit_to_kelvin(70.0);
  p.t_max = fahrenheit_to_kelvin(80.0);
  p.t_hvac.resize(layout.k);
  for (int i = 0; i < layout.k; ++i) {
    p.t_hvac[i] = fahrenheit_to_kelvin(layout.room_class[i] == RoomClass::BigConference ? 50.0 : 55.0);
  }
  p.delta_t = 1.0 / 60.0;
  p.q_mean = 110.0;
  p.q_std = 1.0;

  cfg.n_people = 45;
  cfg.horizon_steps = 600;
  cfg.time_range_steps = 60;
  cfg.ambient_profile = SyntheticAmbient{
      fahrenheit_to_kelvin(85.0),
      convert_temperature_delta(4.33, TemperatureUnit::Fahrenheit, TemperatureUnit::Kelvin), 5};
  cfg.noise_std = 0.1;
  cfg.seed = 1;
  return cfg;
}

}  // namespace thermocc
