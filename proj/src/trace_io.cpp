#include "thermocc/trace_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "csv.hpp"
#include "thermocc/config_io.hpp"
#include "thermocc/errors.hpp"

namespace thermocc {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(fmt::format("error writing '{}'", path.string()));
}

double cell_real(const csv::Table& t, std::size_t row, int col, const std::filesystem::path& src) {
  return config_values::parse_real(t.rows[row][col],
                                   fmt::format("{} row {} column {}", src.string(), row + 2, t.header[col]));
}

}  // namespace

void write_sensors_csv(const SensorTrace& trace, const std::filesystem::path& path) {
  const int k = trace.rooms();
  auto out = open_output(path);
  out << "step,t_hours,T_ext_meas_K";
  for (int i = 1; i <= k; ++i) out << ",u_" << i;
  for (int i = 1; i <= k; ++i) out << ",Thvac_meas_" << i << "_K";
  for (int i = 1; i <= k; ++i) out << ",T_meas_" << i << "_K";
  out << '\n';
  for (int t = 0; t < trace.steps(); ++t) {
    out << fmt::format("{},{:.17g},{:.17g}", t, trace.t0_hours + t * trace.delta_t, trace.ambient_meas[t]);
    for (int i = 0; i < k; ++i) out << ',' << static_cast<int>(trace.hvac_state(i, t));
    for (int i = 0; i < k; ++i) out << fmt::format(",{:.17g}", trace.hvac_temp_meas(i, t));
    for (int i = 0; i < k; ++i) out << fmt::format(",{:.17g}", trace.temps_meas(i, t));
    out << '\n';
  }
  finish(out, path);
}

SensorTrace read_sensors_csv(const std::filesystem::path& path, const BuildingLayout& layout) {
  const auto table = csv::read(path);
  const int k = layout.k;
  const auto z = static_cast<int>(table.rows.size());
  if (z < 2) throw ValidationError(fmt::format("{}: need at least 2 data rows", path.string()));

  const int c_t = table.require("t_hours", path);
  const int c_ext = table.require("T_ext_meas_K", path);
  std::vector<int> c_u(k), c_hvac(k), c_temp(k);
  for (int i = 0; i < k; ++i) {
    c_u[i] = table.require(fmt::format("u_{}", i + 1), path);
    c_hvac[i] = table.require(fmt::format("Thvac_meas_{}_K", i + 1), path);
    c_temp[i] = table.require(fmt::format("T_meas_{}_K", i + 1), path);
  }
  if (table.find(fmt::format("T_meas_{}_K", k + 1)) >= 0)
    throw ValidationError(fmt::format("{}: has more rooms than the layout ({})", path.string(), k));

  SensorTrace s;
  s.layout = layout;
  s.temps_meas.resize(k, z);
  s.hvac_temp_meas.resize(k, z);
  s.hvac_state.resize(k, z);
  s.ambient_meas.resize(z);
  std::vector<double> hours(z);
  for (int t = 0; t < z; ++t) {
    hours[t] = cell_real(table, t, c_t, path);
    s.ambient_meas[t] = cell_real(table, t, c_ext, path);
    for (int i = 0; i < k; ++i) {
      const double u = cell_real(table, t, c_u[i], path);
      if (u != 0.0 && u != 1.0)
        throw ValidationError(fmt::format("{} row {}: u_{} must be 0 or 1", path.string(), t + 2, i + 1));
      s.hvac_state(i, t) = static_cast<std::uint8_t>(u);
      s.hvac_temp_meas(i, t) = cell_real(table, t, c_hvac[i], path);
      s.temps_meas(i, t) = cell_real(table, t, c_temp[i], path);
    }
  }
  s.t0_hours = hours.front();
  s.delta_t = (hours.back() - hours.front()) / (z - 1);
  for (int t = 1; t < z; ++t) {
    if (std::abs(hours[t] - hours[t - 1] - s.delta_t) > 1e-9 * std::max(1.0, s.delta_t))
      throw ValidationError(fmt::format("{}: t_hours is not uniformly spaced at row {}", path.string(), t + 2));
  }
  s.validate();
  return s;
}

void write_truth_csv(const SimulationTrace& trace, const std::filesystem::path& path) {
  const int k = trace.rooms();
  auto out = open_output(path);
  out << "step,T_ext_K";
  for (int i = 1; i <= k; ++i) out << ",T_" << i << "_K";
  for (int i = 1; i <= k; ++i) out << ",n_" << i;
  for (int i = 1; i <= k; ++i) out << ",mobheat_" << i << "_W";
  out << '\n';
  for (int t = 0; t < trace.steps(); ++t) {
    out << fmt::format("{},{:.17g}", t, trace.ambient[t]);
    for (int i = 0; i < k; ++i) out << fmt::format(",{:.17g}", trace.temps(i, t));
    for (int i = 0; i < k; ++i) out << ',' << trace.schedule.n(i, t);
    for (int i = 0; i < k; ++i) out << fmt::format(",{:.17g}", trace.mob_heat(i, t));
    out << '\n';
  }
  finish(out, path);
}

TruthTable read_truth_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  int k = 0;
  while (table.find(fmt::format("n_{}", k + 1)) >= 0) ++k;
  if (k == 0) throw ValidationError(fmt::format("{}: no n_<room> columns", path.string()));
  const auto z = static_cast<int>(table.rows.size());
  TruthTable t;
  t.ambient.resize(z);
  t.temps.resize(k, z);
  t.counts.resize(k, z);
  t.mob_heat.resize(k, z);
  const int c_ext = table.require("T_ext_K", path);
  for (int s = 0; s < z; ++s) {
    t.ambient[s] = cell_real(table, s, c_ext, path);
    for (int i = 0; i < k; ++i) {
      t.temps(i, s) = cell_real(table, s, table.require(fmt::format("T_{}_K", i + 1), path), path);
      t.counts(i, s) = static_cast<int>(config_values::parse_integer(
          table.rows[s][table.require(fmt::format("n_{}", i + 1), path)], "truth.csv n"));
      t.mob_heat(i, s) = cell_real(table, s, table.require(fmt::format("mobheat_{}_W", i + 1), path), path);
    }
  }
  return t;
}

}  // namespace thermocc
