#pragma once

#include <filesystem>

#include <Eigen/Core>

#include "thermocc/simulator.hpp"

namespace thermocc {

// sensors.csv: step, t_hours, T_ext_meas_K, u_1..u_k, Thvac_meas_1_K..,
// T_meas_1_K..
void write_sensors_csv(const SensorTrace& trace, const std::filesystem::path& path);
SensorTrace read_sensors_csv(const std::filesystem::path& path, const BuildingLayout& layout);

// truth.csv: step, T_ext_K, T_1_K.., n_1.., mobheat_1_W..
void write_truth_csv(const SimulationTrace& trace, const std::filesystem::path& path);

struct TruthTable {
  Eigen::VectorXd ambient;    // K
  Eigen::MatrixXd temps;      // K, k x z
  Eigen::MatrixXi counts;     // k x z
  Eigen::MatrixXd mob_heat;   // W, k x z
};
TruthTable read_truth_csv(const std::filesystem::path& path);

}  // namespace thermocc
