#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "thermocc/core_model.hpp"

namespace thermocc {

using Rng = std::mt19937_64;

// Room-by-step matrices: row i is room i, column t is step t.
using HvacStates = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct OccupancySchedule {
  Eigen::MatrixXi n;                      // occupant count, k x z
  std::vector<double> per_person_power;   // q_m, W, one per person
  // Room of each person during each Time Range window: [window][person].
  std::vector<std::vector<int>> assignment;
  int time_range_steps = 1;
};

struct SimulationTrace {
  BuildingLayout layout;
  double delta_t = 0.0;            // h
  Eigen::MatrixXd temps;           // K, k x z
  Eigen::VectorXd ambient;         // K, z
  HvacStates hvac_state;           // k x z, 0/1
  Eigen::MatrixXd mob_heat;        // W, k x z
  Eigen::VectorXd t_hvac;          // K, per room
  OccupancySchedule schedule;

  int rooms() const { return static_cast<int>(temps.rows()); }
  int steps() const { return static_cast<int>(temps.cols()); }
};

/// What the estimator sees: one noisy reading per sensor per step and the
/// exact controller states.
struct SensorTrace {
  BuildingLayout layout;
  double delta_t = 0.0;            // h
  double t0_hours = 0.0;
  Eigen::MatrixXd temps_meas;      // K, k x z
  Eigen::VectorXd ambient_meas;    // K, z
  Eigen::MatrixXd hvac_temp_meas;  // K, k x z
  HvacStates hvac_state;           // k x z, 0/1

  int rooms() const { return static_cast<int>(temps_meas.rows()); }
  int steps() const { return static_cast<int>(temps_meas.cols()); }
  void validate() const;
};

/// Ambient temperature series of length cfg.horizon_steps, in K.
Eigen::VectorXd generate_ambient(const ScenarioConfig& cfg, Rng& rng);

/// i.i.d. Gaussian deviations around the mean, smoothed by a centred moving
/// average (the window shrinks at the series ends).
Eigen::VectorXd synthetic_ambient(const SyntheticAmbient& spec, int steps, Rng& rng);

/// Reads a one-column temperature profile and resamples it linearly onto
/// `steps` evenly spaced points covering the whole profile.
Eigen::VectorXd load_ambient_profile(const std::filesystem::path& path, int steps);

/// Draws q_m once per person, then redraws every person's room independently
/// at each Time Range boundary with probability w_i / sum(w).
OccupancySchedule generate_schedule(const ScenarioConfig& cfg, Rng& rng);

/// Sum of q_m over the people assigned to each room, W, k x z.
Eigen::MatrixXd mob_heat_from_schedule(const OccupancySchedule& schedule, int rooms,
                                       int steps);

/// Explicit Euler step of the room heat balance. Caches the neighbour lists.
class HeatBalance {
 public:
  HeatBalance(const ThermalParams& params, const BuildingLayout& layout);

  // dT/dt in K/h for every room.
  Eigen::VectorXd rate(const Eigen::VectorXd& temps, double t_ext,
                       const Eigen::Ref<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>& u,
                       const Eigen::VectorXd& mob_heat_w) const;

  Eigen::VectorXd step(const Eigen::VectorXd& temps, double t_ext,
                       const Eigen::Ref<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>& u,
                       const Eigen::VectorXd& mob_heat_w) const;

 private:
  ThermalParams params_;
  BuildingLayout layout_;
  std::vector<std::vector<int>> neighbors_;
};

Eigen::VectorXd step_temperature(const Eigen::VectorXd& temps, double t_ext,
                                 const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>& u,
                                 const Eigen::VectorXd& mob_heat_w,
                                 const ThermalParams& params, const BuildingLayout& layout);

/// Bang-bang thermostat with hysteresis between the setpoints.
std::uint8_t controller_update(double temp_k, std::uint8_t u_prev, const ThermalParams& params);

/// Full trajectory. RNG draws happen in a fixed order: ambient, schedule,
/// initial temperatures.
SimulationTrace simulate(const ScenarioConfig& cfg, Rng& rng);

/// Adds one independent N(0, eta_std^2) draw per sensor per step to room,
/// ambient and supply-air temperatures. Controller states are copied as is.
SensorTrace add_sensor_noise(const SimulationTrace& trace, double eta_std, Rng& rng);

}  // namespace thermocc
