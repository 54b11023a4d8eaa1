#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "thermocc/simulator.hpp"

namespace thermocc {

/// Occupant counts per room per Time Range window.
struct MobilityMap {
  Eigen::MatrixXi counts;  // rooms x windows
  int tr_steps = 1;

  int rooms() const { return static_cast<int>(counts.rows()); }
  int windows() const { return static_cast<int>(counts.cols()); }
};

struct ReconstructionScore {
  // One entry per room; rooms listed in excluded_rooms hold 0 and do not
  // enter the TRE.
  std::vector<double> nmae_per_room;
  std::vector<int> excluded_rooms;  // 0-based
  double tre = 0.0;
};

/// round(x / q_avg) per step, half away from zero, clamped at 0.
Eigen::MatrixXi per_step_counts(const Eigen::MatrixXd& mob_heat_w, double q_avg_w);

/// Lower median (element (n-1)/2 of the sorted values).
int lower_median(std::vector<int> values);

/// Per-step counts reduced to one count per complete window by the lower
/// median. A trailing partial window is dropped.
MobilityMap to_mobility_map(const Eigen::MatrixXd& mob_heat_w, double q_avg_w, int tr_steps);

/// Ground-truth counts sampled at each window start (counts are constant
/// within a window by construction).
MobilityMap truth_map(const Eigen::MatrixXi& counts, int tr_steps);

/// NMAE_i = mean_w |n_i - n^_i| / mean_w n_i and TRE = mean NMAE over rooms
/// with non-zero mean occupancy.
ReconstructionScore score(const MobilityMap& truth, const MobilityMap& inferred);
ReconstructionScore score(const OccupancySchedule& truth, const MobilityMap& inferred);

// mobility_map.csv: window, room, count_inferred[, count_true]
void write_mobility_map_csv(const MobilityMap& inferred, const std::optional<MobilityMap>& truth,
                            const std::filesystem::path& path);
MobilityMap read_mobility_map_csv(const std::filesystem::path& path, int tr_steps,
                                  std::optional<MobilityMap>* truth = nullptr);

// score.json: {"tre": .., "nmae": [..], "excluded_rooms": [..]}; rooms 1-based.
void write_score_json(const ReconstructionScore& s, const std::filesystem::path& path);

}  // namespace thermocc
