#include "thermocc/mobility_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "thermocc/log.hpp"
#include "thermocc/config_io.hpp"
#include "thermocc/errors.hpp"

namespace thermocc {

Eigen::MatrixXi per_step_counts(const Eigen::MatrixXd& mob_heat_w, double q_avg_w) {
  if (!(q_avg_w > 0.0) || !std::isfinite(q_avg_w)) throw ValidationError("mobility map: q_avg must be > 0");
  Eigen::MatrixXi out(mob_heat_w.rows(), mob_heat_w.cols());
  for (Eigen::Index j = 0; j < mob_heat_w.cols(); ++j)
    for (Eigen::Index i = 0; i < mob_heat_w.rows(); ++i)
      out(i, j) = static_cast<int>(std::max(0.0, std::round(mob_heat_w(i, j) / q_avg_w)));
  return out;
}

int lower_median(std::vector<int> values) {
  if (values.empty()) throw ValidationError("median of an empty window");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

MobilityMap to_mobility_map(const Eigen::MatrixXd& mob_heat_w, double q_avg_w, int tr_steps) {
  if (tr_steps < 1) throw ValidationError("mobility map: tr_steps must be >= 1");
  const Eigen::MatrixXi per_step = per_step_counts(mob_heat_w, q_avg_w);
  const auto windows = static_cast<int>(per_step.cols() / tr_steps);
  MobilityMap map;
  map.tr_steps = tr_steps;
  map.counts.resize(per_step.rows(), windows);
  std::vector<int> buf(static_cast<std::size_t>(tr_steps));
  for (Eigen::Index i = 0; i < per_step.rows(); ++i) {
    for (int w = 0; w < windows; ++w) {
      for (int s = 0; s < tr_steps; ++s) buf[s] = per_step(i, w * tr_steps + s);
      map.counts(i, w) = lower_median(buf);
    }
  }
  return map;
}

MobilityMap truth_map(const Eigen::MatrixXi& counts, int tr_steps) {
  if (tr_steps < 1) throw ValidationError("mobility map: tr_steps must be >= 1");
  const auto windows = static_cast<int>(counts.cols() / tr_steps);
  MobilityMap map;
  map.tr_steps = tr_steps;
  map.counts.resize(counts.rows(), windows);
  for (int w = 0; w < windows; ++w) map.counts.col(w) = counts.col(static_cast<Eigen::Index>(w) * tr_steps);
  return map;
}

ReconstructionScore score(const MobilityMap& truth, const MobilityMap& inferred) {
  if (truth.rooms() != inferred.rooms() || truth.windows() != inferred.windows() ||
      truth.tr_steps != inferred.tr_steps)
    throw ValidationError(fmt::format("score: window mismatch (truth {}x{} @ {} steps, inferred {}x{} @ {} steps)",
                                      truth.rooms(), truth.windows(), truth.tr_steps, inferred.rooms(),
                                      inferred.windows(), inferred.tr_steps));
  if (truth.windows() == 0) throw ValidationError("score: no complete Time Range window");
  ReconstructionScore s;
  s.nmae_per_room.assign(static_cast<std::size_t>(truth.rooms()), 0.0);
  double total = 0.0;
  int included = 0;
  for (int i = 0; i < truth.rooms(); ++i) {
    const double mean_true = truth.counts.row(i).cast<double>().mean();
    if (mean_true <= 0.0) {
      s.excluded_rooms.push_back(i);
      continue;
    }
    const double mae = (truth.counts.row(i) - inferred.counts.row(i)).cwiseAbs().cast<double>().mean();
    s.nmae_per_room[i] = mae / mean_true;
    total += s.nmae_per_room[i];
    ++included;
  }
  if (!s.excluded_rooms.empty())
    log::warn("score: {} room(s) empty in every window, excluded from TRE", s.excluded_rooms.size());
  s.tre = included > 0 ? total / included : 0.0;
  return s;
}

ReconstructionScore score(const OccupancySchedule& truth, const MobilityMap& inferred) {
  return score(truth_map(truth.n, inferred.tr_steps), inferred);
}

void write_mobility_map_csv(const MobilityMap& inferred, const std::optional<MobilityMap>& truth,
                            const std::filesystem::path& path) {
  if (truth && (truth->rooms() != inferred.rooms() || truth->windows() != inferred.windows()))
    throw ValidationError("mobility map: truth and inferred maps differ in shape");
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "window,room,count_inferred" << (truth ? ",count_true" : "") << '\n';
  for (int w = 0; w < inferred.windows(); ++w) {
    for (int i = 0; i < inferred.rooms(); ++i) {
      out << w << ',' << i + 1 << ',' << inferred.counts(i, w);
      if (truth) out << ',' << truth->counts(i, w);
      out << '\n';
    }
  }
  if (!out) throw IoError(fmt::format("error writing '{}'", path.string()));
}

MobilityMap read_mobility_map_csv(const std::filesystem::path& path, int tr_steps,
                                  std::optional<MobilityMap>* truth) {
  const auto table = csv::read(path);
  const int c_w = table.require("window", path);
  const int c_r = table.require("room", path);
  const int c_inf = table.require("count_inferred", path);
  const int c_true = table.find("count_true");
  int rooms = 0, windows = 0;
  for (const auto& row : table.rows) {
    rooms = std::max(rooms, static_cast<int>(config_values::parse_integer(row[c_r], "room")));
    windows = std::max(windows, static_cast<int>(config_values::parse_integer(row[c_w], "window")) + 1);
  }
  MobilityMap inferred{Eigen::MatrixXi::Constant(rooms, windows, -1), tr_steps};
  MobilityMap truth_out{Eigen::MatrixXi::Constant(rooms, windows, -1), tr_steps};
  for (const auto& row : table.rows) {
    const auto w = static_cast<int>(config_values::parse_integer(row[c_w], "window"));
    const auto r = static_cast<int>(config_values::parse_integer(row[c_r], "room")) - 1;
    if (w < 0 || r < 0) throw ValidationError(fmt::format("{}: negative window or room", path.string()));
    inferred.counts(r, w) = static_cast<int>(config_values::parse_integer(row[c_inf], "count_inferred"));
    if (c_true >= 0)
      truth_out.counts(r, w) = static_cast<int>(config_values::parse_integer(row[c_true], "count_true"));
  }
  if ((inferred.counts.array() < 0).any())
    throw ValidationError(fmt::format("{}: incomplete or negative counts", path.string()));
  if (truth) {
    if (c_true >= 0) *truth = truth_out;
    else truth->reset();
  }
  return inferred;
}

void write_score_json(const ReconstructionScore& s, const std::filesystem::path& path) {
  nlohmann::json j;
  j["tre"] = s.tre;
  nlohmann::json nmae = nlohmann::json::array();
  for (std::size_t i = 0; i < s.nmae_per_room.size(); ++i) {
    const bool excluded =
        std::find(s.excluded_rooms.begin(), s.excluded_rooms.end(), static_cast<int>(i)) != s.excluded_rooms.end();
    if (excluded) nmae.push_back(nullptr);
    else nmae.push_back(s.nmae_per_room[i]);
  }
  j["nmae"] = nmae;
  nlohmann::json excl = nlohmann::json::array();
  for (int r : s.excluded_rooms) excl.push_back(r + 1);
  j["excluded_rooms"] = excl;
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << '\n';
}

}  // namespace thermocc
