#include "thermocc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "thermocc/config_io.hpp"
#include "thermocc/errors.hpp"
#include "thermocc/units.hpp"

namespace thermocc {

void SensorTrace::validate() const {
  const auto k = layout.k;
  const auto z = temps_meas.cols();
  if (temps_meas.rows() != k || hvac_temp_meas.rows() != k || hvac_state.rows() != k)
    throw ValidationError(fmt::format("sensor trace: expected {} rooms", k));
  if (hvac_temp_meas.cols() != z || hvac_state.cols() != z || ambient_meas.size() != z)
    throw ValidationError("sensor trace: channels have different lengths");
  if (!(delta_t > 0.0)) throw ValidationError("sensor trace: delta_t must be > 0");
  if (!temps_meas.allFinite() || !ambient_meas.allFinite() || !hvac_temp_meas.allFinite())
    throw ValidationError("sensor trace: non-finite measurement");
  if ((hvac_state.array() > 1).any()) throw ValidationError("sensor trace: hvac state must be 0 or 1");
}

Eigen::VectorXd synthetic_ambient(const SyntheticAmbient& spec, int steps, Rng& rng) {
  if (steps < 1) throw ValidationError("ambient: need at least one step");
  if (spec.smoothing_window < 1) throw ValidationError("ambient: smoothing window must be >= 1");
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd dev(steps);
  for (int t = 0; t < steps; ++t) dev[t] = spec.std_k * noise(rng);

  const int half = spec.smoothing_window / 2;
  Eigen::VectorXd out(steps);
  for (int t = 0; t < steps; ++t) {
    const int lo = std::max(0, t - half);
    const int hi = std::min(steps - 1, t + half);
    out[t] = spec.mean_k + dev.segment(lo, hi - lo + 1).mean();
  }
  return out;
}

Eigen::VectorXd load_ambient_profile(const std::filesystem::path& path, int steps) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open ambient profile '{}'", path.string()));
  std::string line;
  std::vector<double> values;
  std::optional<TemperatureUnit> unit;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = config_values::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!unit) {
      // Header names the unit: T_ext_K, T_ext_F or T_ext_C.
      if (t.rfind("T_ext_", 0) != 0 || t.size() != 7)
        throw ValidationError(fmt::format("{}: header must be T_ext_K, T_ext_F or T_ext_C", path.string()));
      unit = parse_temperature_unit(t.substr(6));
      continue;
    }
    const double v = config_values::parse_real(t, fmt::format("{}:{}", path.string(), line_no));
    values.push_back(convert_temperature(v, *unit, TemperatureUnit::Kelvin));
  }
  if (values.size() < 2)
    throw ValidationError(fmt::format("{}: ambient profile needs at least 2 points", path.string()));

  Eigen::VectorXd out(steps);
  const double last = static_cast<double>(values.size() - 1);
  for (int t = 0; t < steps; ++t) {
    const double pos = steps == 1 ? 0.0 : last * t / (steps - 1);
    const auto i0 = static_cast<std::size_t>(std::floor(pos));
    const std::size_t i1 = std::min(i0 + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(i0);
    out[t] = frac == 0.0 ? values[i0] : values[i0] + frac * (values[i1] - values[i0]);
  }
  return out;
}

Eigen::VectorXd generate_ambient(const ScenarioConfig& cfg, Rng& rng) {
  if (const auto* synth = std::get_if<SyntheticAmbient>(&cfg.ambient_profile))
    return synthetic_ambient(*synth, cfg.horizon_steps, rng);
  return load_ambient_profile(std::get<AmbientFile>(cfg.ambient_profile).path, cfg.horizon_steps);
}

OccupancySchedule generate_schedule(const ScenarioConfig& cfg, Rng& rng) {
  const int k = cfg.layout.k;
  const int z = cfg.horizon_steps;
  const int tr = cfg.time_range_steps;
  OccupancySchedule s;
  s.time_range_steps = tr;
  s.n = Eigen::MatrixXi::Zero(k, z);

  std::normal_distribution<double> power(cfg.params.q_mean, cfg.params.q_std);
  s.per_person_power.resize(cfg.n_people);
  for (auto& q : s.per_person_power) q = cfg.params.q_std > 0.0 ? power(rng) : cfg.params.q_mean;

  std::discrete_distribution<int> room(cfg.layout.weights.begin(), cfg.layout.weights.end());
  for (int start = 0; start < z; start += tr) {
    std::vector<int> where(cfg.n_people);
    for (auto& r : where) r = room(rng);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (int r : where) ++counts[r];
    const int len = std::min(tr, z - start);
    s.n.middleCols(start, len) = counts.replicate(1, len);
    s.assignment.push_back(std::move(where));
  }
  return s;
}

Eigen::MatrixXd mob_heat_from_schedule(const OccupancySchedule& schedule, int rooms, int steps) {
  Eigen::MatrixXd heat = Eigen::MatrixXd::Zero(rooms, steps);
  const int tr = schedule.time_range_steps;
  for (std::size_t w = 0; w < schedule.assignment.size(); ++w) {
    Eigen::VectorXd per_room = Eigen::VectorXd::Zero(rooms);
    const auto& where = schedule.assignment[w];
    for (std::size_t m = 0; m < where.size(); ++m) per_room[where[m]] += schedule.per_person_power[m];
    const int start = static_cast<int>(w) * tr;
    const int len = std::min(tr, steps - start);
    heat.middleCols(start, len) = per_room.replicate(1, len);
  }
  return heat;
}

HeatBalance::HeatBalance(const ThermalParams& params, const BuildingLayout& layout)
    : params_(params), layout_(layout), neighbors_(layout.neighbors()) {}

Eigen::VectorXd HeatBalance::rate(
    const Eigen::VectorXd& temps, double t_ext,
    const Eigen::Ref<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>& u,
    const Eigen::VectorXd& mob_heat_w) const {
  const int k = layout_.k;
  if (temps.size() != k || u.size() != k || mob_heat_w.size() != k)
    throw ValidationError(fmt::format("heat balance: expected {} rooms", k));
  Eigen::VectorXd r(k);
  for (int i = 0; i < k; ++i) {
    const double ti = temps[i];
    double conduction = 0.0;
    for (int j : neighbors_[i]) conduction += temps[j] - ti;
    double d = params_.beta * conduction + params_.omega +
               params_.gamma * mob_heat_w[i] * kSecondsPerHour;
    if (layout_.ambient_exposed[i]) d += params_.alpha * (t_ext - ti);
    if (u[i]) d += params_.phi * (params_.t_hvac[i] - ti);
    r[i] = d;
  }
  return r;
}

Eigen::VectorXd HeatBalance::step(
    const Eigen::VectorXd& temps, double t_ext,
    const Eigen::Ref<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>& u,
    const Eigen::VectorXd& mob_heat_w) const {
  return temps + params_.delta_t * rate(temps, t_ext, u, mob_heat_w);
}

Eigen::VectorXd step_temperature(const Eigen::VectorXd& temps, double t_ext,
                                 const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>& u,
                                 const Eigen::VectorXd& mob_heat_w, const ThermalParams& params,
                                 const BuildingLayout& layout) {
  if (!temps.allFinite() || !std::isfinite(t_ext) || !mob_heat_w.allFinite())
    throw ValidationError("step_temperature: non-finite input");
  return HeatBalance(params, layout).step(temps, t_ext, u, mob_heat_w);
}

std::uint8_t controller_update(double temp_k, std::uint8_t u_prev, const ThermalParams& params) {
  if (temp_k >= params.t_max) return 1;
  if (temp_k <= params.t_min) return 0;
  return u_prev;
}

SimulationTrace simulate(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  const int k = cfg.layout.k;
  const int z = cfg.horizon_steps;

  SimulationTrace tr;
  tr.layout = cfg.layout;
  tr.delta_t = cfg.params.delta_t;
  tr.ambient = generate_ambient(cfg, rng);
  if (!tr.ambient.allFinite()) throw ValidationError("ambient profile contains non-finite values");
  tr.schedule = generate_schedule(cfg, rng);
  tr.mob_heat = mob_heat_from_schedule(tr.schedule, k, z);
  tr.t_hvac = Eigen::Map<const Eigen::VectorXd>(cfg.params.t_hvac.data(), k);

  tr.temps.resize(k, z);
  tr.hvac_state.resize(k, z);
  std::uniform_real_distribution<double> initial(cfg.params.t_min, cfg.params.t_max);
  for (int i = 0; i < k; ++i) tr.temps(i, 0) = initial(rng);

  const HeatBalance balance(cfg.params, cfg.layout);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> u = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>::Zero(k);
  for (int t = 0; t < z; ++t) {
    for (int i = 0; i < k; ++i) u[i] = controller_update(tr.temps(i, t), u[i], cfg.params);
    tr.hvac_state.col(t) = u;
    if (t + 1 == z) break;
    tr.temps.col(t + 1) = balance.step(tr.temps.col(t), tr.ambient[t], u, tr.mob_heat.col(t));
    if (!tr.temps.col(t + 1).allFinite())
      throw NumericalError(fmt::format("simulation diverged at step {} (delta_t too large?)", t + 1));
  }
  return tr;
}

SensorTrace add_sensor_noise(const SimulationTrace& trace, double eta_std, Rng& rng) {
  if (!(eta_std >= 0.0) || !std::isfinite(eta_std))
    throw ValidationError("noise_std must be >= 0");
  const int k = trace.rooms();
  const int z = trace.steps();
  SensorTrace s;
  s.layout = trace.layout;
  s.delta_t = trace.delta_t;
  s.hvac_state = trace.hvac_state;
  s.temps_meas = trace.temps;
  s.ambient_meas = trace.ambient;
  s.hvac_temp_meas = trace.t_hvac.replicate(1, z);
  if (eta_std == 0.0) return s;

  std::normal_distribution<double> noise(0.0, eta_std);
  for (int t = 0; t < z; ++t) {
    s.ambient_meas[t] += noise(rng);
    for (int i = 0; i < k; ++i) s.hvac_temp_meas(i, t) += noise(rng);
    for (int i = 0; i < k; ++i) s.temps_meas(i, t) += noise(rng);
  }
  return s;
}

}  // namespace thermocc
