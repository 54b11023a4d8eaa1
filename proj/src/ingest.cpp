#include "thermocc/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "csv.hpp"
#include "thermocc/config_io.hpp"
#include "thermocc/errors.hpp"

namespace thermocc {

namespace {

using boost::property_tree::ptree;
using namespace config_values;

ptree read_ini_text(std::string_view text, std::string_view what) {
  ptree root;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(fmt::format("{} parse error: {}", what, e.what()));
  }
  return root;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// "name, unit" -> binding. The unit is whatever follows the last comma.
ColumnBinding parse_binding(const std::string& value, bool needs_unit, const std::string& key) {
  ColumnBinding b;
  const auto comma = value.rfind(',');
  if (comma == std::string::npos) {
    b.name = trim(value);
  } else {
    b.name = trim(value.substr(0, comma));
    const std::string tag = trim(value.substr(comma + 1));
    try {
      b.unit = parse_temperature_unit(tag);
    } catch (const ValidationError&) {
      throw ValidationError(fmt::format("column map '{}': unknown unit tag '{}'", key, tag));
    }
  }
  if (b.name.empty()) throw ValidationError(fmt::format("column map '{}': empty column name", key));
  if (needs_unit && !b.unit)
    throw ValidationError(fmt::format("column map '{}': unit annotation missing (append ', K', ', F' or ', C')", key));
  return b;
}

// "role[3]" -> ("role", 3)
std::optional<std::pair<std::string, int>> indexed_key(const std::string& key) {
  const auto open = key.find('[');
  if (open == std::string::npos || key.back() != ']') return std::nullopt;
  const auto idx = parse_integer(key.substr(open + 1, key.size() - open - 2), key);
  if (idx < 1) throw ValidationError(fmt::format("column map '{}': room index must be >= 1", key));
  return std::make_pair(key.substr(0, open), static_cast<int>(idx));
}

// Days since 1970-01-01 of a proleptic Gregorian date.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

double parse_iso_hours(const std::string& s, const std::string& what) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n < 6 || (sep != ' ' && sep != 'T') || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 ||
      mi < 0 || mi > 59 || sec < 0.0 || sec >= 61.0)
    throw ValidationError(fmt::format("{}: cannot parse timestamp '{}' (expected YYYY-MM-DD HH:MM[:SS])", what, s));
  const long long days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return static_cast<double>(days) * 24.0 + h + mi / 60.0 + sec / 3600.0;
}

// "14:30" -> 14.5
double parse_clock(const std::string& s, const std::string& what) {
  int h = 0, m = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d:%d%c", &h, &m, &tail) != 2 || h < 0 || h > 24 || m < 0 || m > 59)
    throw ValidationError(fmt::format("policy.{}: cannot parse clock time '{}' (expected HH:MM)", what, s));
  return h + m / 60.0;
}

struct Series {
  std::vector<double> t;  // h, relative to the first row
  std::vector<double> v;
  std::string name;
};

Series extract(const csv::Table& table, const std::vector<double>& hours, const ColumnBinding& b,
               const std::filesystem::path& src, bool temperature) {
  const int col = table.require(b.name, src);
  Series s;
  s.name = b.name;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& cell = table.rows[r][col];
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan") continue;
    double v = parse_real(cell, fmt::format("{} row {} column {}", src.string(), r + 2, b.name));
    if (temperature) v = convert_temperature(v, *b.unit, TemperatureUnit::Kelvin);
    s.t.push_back(hours[r]);
    s.v.push_back(v);
  }
  if (s.t.size() < 2) throw ValidationError(fmt::format("{}: column '{}' has fewer than 2 values", src.string(), b.name));
  return s;
}

void check_gaps(const Series& s, double delta_t, double grid_end) {
  const double limit = kMaxGapSteps * delta_t;
  auto fail = [&](double a, double b) {
    throw ValidationError(fmt::format(
        "column '{}': gap of {:.4g} h between t={:.4g} h and t={:.4g} h exceeds {} steps; refusing to "
        "interpolate steps {}..{}",
        s.name, b - a, a, b, kMaxGapSteps, static_cast<long long>(std::floor(a / delta_t + 1e-9)),
        static_cast<long long>(std::ceil(b / delta_t - 1e-9))));
  };
  if (s.t.front() > limit) fail(0.0, s.t.front());
  for (std::size_t i = 1; i < s.t.size(); ++i)
    if (s.t[i] - s.t[i - 1] > limit * (1.0 + 1e-12)) fail(s.t[i - 1], s.t[i]);
  if (grid_end - s.t.back() > limit) fail(s.t.back(), grid_end);
}

// Linear interpolation; constant extrapolation beyond the ends.
Eigen::VectorXd interpolate(const Series& s, const Eigen::VectorXd& grid) {
  Eigen::VectorXd out(grid.size());
  std::size_t j = 0;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double t = grid[g];
    while (j + 1 < s.t.size() && s.t[j + 1] <= t) ++j;
    if (t <= s.t.front()) {
      out[g] = s.v.front();
    } else if (j + 1 >= s.t.size()) {
      out[g] = s.v.back();
    } else {
      const double frac = (t - s.t[j]) / (s.t[j + 1] - s.t[j]);
      out[g] = frac == 0.0 ? s.v[j] : s.v[j] + frac * (s.v[j + 1] - s.v[j]);
    }
  }
  return out;
}

// Value of the latest sample at or before each grid point.
Eigen::VectorXd hold(const Series& s, const Eigen::VectorXd& grid) {
  Eigen::VectorXd out(grid.size());
  std::size_t j = 0;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    while (j + 1 < s.t.size() && s.t[j + 1] <= grid[g] + 1e-12) ++j;
    out[g] = s.v[j];
  }
  return out;
}

}  // namespace

ColumnMap parse_column_map(std::string_view text) {
  const ptree root = read_ini_text(text, "column map");
  ColumnMap map;
  bool have_time = false;
  for (const auto& [section, tree] : root) {
    if (section != "columns") throw ValidationError(fmt::format("column map: unknown section [{}]", section));
    for (const auto& [key, node] : tree) {
      const std::string value = trim(node.data());
      if (key == "time") {
        const auto comma = value.rfind(',');
        if (comma == std::string::npos)
          throw ValidationError("column map 'time': expected 'column, format' (format: iso, h, min or s)");
        map.time.name = trim(value.substr(0, comma));
        const std::string fmt_tag = trim(value.substr(comma + 1));
        if (fmt_tag == "iso") map.time_format = TimeFormat::Iso8601;
        else if (fmt_tag == "h") map.time_format = TimeFormat::Hours;
        else if (fmt_tag == "min") map.time_format = TimeFormat::Minutes;
        else if (fmt_tag == "s") map.time_format = TimeFormat::Seconds;
        else throw ValidationError(fmt::format("column map 'time': unknown format '{}'", fmt_tag));
        have_time = true;
      } else if (key == "ambient") {
        map.ambient = parse_binding(value, true, key);
      } else if (auto idx = indexed_key(key)) {
        const auto& [role, room] = *idx;
        if (role == "room_temp") map.room_temp[room] = parse_binding(value, true, key);
        else if (role == "hvac_temp") map.hvac_temp[room] = parse_binding(value, true, key);
        else if (role == "hvac_state") map.hvac_state[room] = parse_binding(value, false, key);
        else throw ValidationError(fmt::format("column map: unknown role '{}'", role));
      } else {
        throw ValidationError(fmt::format("column map: unknown key '{}'", key));
      }
    }
  }
  if (!have_time) throw ValidationError("column map: missing 'time' binding");
  return map;
}

ColumnMap load_column_map(const std::filesystem::path& path) { return parse_column_map(read_file(path)); }

ImputationPolicy parse_policy(std::string_view text) {
  const ptree root = read_ini_text(text, "policy");
  ImputationPolicy p;
  p.ambient = FromColumn{};
  p.hvac_state = FromColumn{};
  p.hvac_temp = FromColumn{};
  const auto section = root.get_child_optional("policy");
  if (!section) throw ValidationError("policy: missing [policy] section");
  for (const auto& [name, tree] : root)
    if (name != "policy") throw ValidationError(fmt::format("policy: unknown section [{}]", name));

  std::set<std::string> used;
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    used.insert(key);
    if (auto v = section->get_optional<std::string>(ptree::path_type(key, '\0'))) return trim(*v);
    return std::nullopt;
  };
  auto require = [&](const std::string& key) {
    if (auto v = get(key)) return *v;
    throw ValidationError(fmt::format("policy: missing key '{}'", key));
  };

  if (auto v = get("delta_t")) p.delta_t = parse_real(*v, "policy.delta_t");
  if (auto v = get("seed")) p.seed = static_cast<std::uint64_t>(parse_integer(*v, "policy.seed"));

  const std::string ambient = get("ambient").value_or("column");
  if (ambient == "synthetic") {
    SyntheticGaussian g;
    g.mean_k = parse_temperature_k(require("ambient_mean"), "policy.ambient_mean");
    g.std_k = parse_temperature_delta_k(require("ambient_std"), "policy.ambient_std");
    if (auto v = get("ambient_smoothing"))
      g.smoothing_window = static_cast<int>(parse_integer(*v, "policy.ambient_smoothing"));
    if (g.std_k < 0.0 || g.smoothing_window < 1) throw ValidationError("policy: invalid synthetic ambient");
    p.ambient = g;
  } else if (ambient != "column") {
    throw ValidationError(fmt::format("policy.ambient: expected 'column' or 'synthetic', got '{}'", ambient));
  }

  const std::string hvac = get("hvac_state").value_or("column");
  if (hvac == "off") {
    p.hvac_state = AlwaysOff{};
  } else if (hvac == "manual") {
    ManualWindows mw;
    for (const auto& [key, node] : *section) {
      auto idx = indexed_key(key);
      if (!idx || idx->first != "hvac_windows") continue;
      used.insert(key);
      for (const auto& range : split_list(node.data())) {
        const auto dash = range.find('-');
        if (dash == std::string::npos)
          throw ValidationError(fmt::format("policy.{}: expected 'start-end', got '{}'", key, range));
        if (range.find(':') != std::string::npos) {
          const double a = parse_clock(trim(range.substr(0, dash)), key);
          const double b = parse_clock(trim(range.substr(dash + 1)), key);
          if (b <= a) throw ValidationError(fmt::format("policy.{}: empty range '{}'", key, range));
          mw.clock_windows[idx->second].emplace_back(a, b);
          continue;
        }
        const auto a = static_cast<int>(parse_integer(range.substr(0, dash), key));
        const auto b = static_cast<int>(parse_integer(range.substr(dash + 1), key));
        if (a < 0 || b <= a) throw ValidationError(fmt::format("policy.{}: empty or negative range '{}'", key, range));
        mw.windows[idx->second].emplace_back(a, b);
      }
    }
    p.hvac_state = mw;
  } else if (hvac != "column") {
    throw ValidationError(fmt::format("policy.hvac_state: expected 'column', 'off' or 'manual', got '{}'", hvac));
  }

  const std::string hvac_temp = get("hvac_temp").value_or("column");
  if (hvac_temp == "constant") {
    p.hvac_temp = ConstantTemperature{parse_temperature_k(require("hvac_temp_value"), "policy.hvac_temp_value")};
  } else if (hvac_temp != "column") {
    throw ValidationError(fmt::format("policy.hvac_temp: expected 'column' or 'constant', got '{}'", hvac_temp));
  }

  if (auto v = get("missing_neighbor_temp")) {
    if (*v == "drop") p.missing_neighbor_temp = DropRoom{};
    else if (*v == "constant")
      p.missing_neighbor_temp =
          ConstantTemperature{parse_temperature_k(require("missing_neighbor_value"), "policy.missing_neighbor_value")};
    else throw ValidationError(fmt::format("policy.missing_neighbor_temp: expected 'drop' or 'constant', got '{}'", *v));
  }

  for (const auto& [key, node] : *section)
    if (!used.count(key)) throw ValidationError(fmt::format("policy: unknown key '{}'", key));
  return p;
}

ImputationPolicy load_policy(const std::filesystem::path& path) { return parse_policy(read_file(path)); }

void ImputationPolicy::validate(const ColumnMap& columns) const {
  const bool ambient_col = std::holds_alternative<FromColumn>(ambient);
  if (ambient_col && !columns.ambient)
    throw ValidationError("ambient: policy reads it from a column but the column map has no 'ambient'");
  if (!ambient_col && columns.ambient)
    throw ValidationError("ambient: both a column and a synthetic policy given; choose one source");
  const bool state_col = std::holds_alternative<FromColumn>(hvac_state);
  if (!state_col && !columns.hvac_state.empty())
    throw ValidationError("hvac_state: both columns and an imputation policy given; choose one source");
  const bool temp_col = std::holds_alternative<FromColumn>(hvac_temp);
  if (!temp_col && !columns.hvac_temp.empty())
    throw ValidationError("hvac_temp: both columns and a constant policy given; choose one source");
}

std::vector<int> kept_rooms(const ColumnMap& columns, const ImputationPolicy& policy, const BuildingLayout& layout) {
  std::vector<int> kept;
  for (int i = 0; i < layout.k; ++i) {
    if (columns.room_temp.count(i + 1)) {
      kept.push_back(i);
    } else if (!policy.missing_neighbor_temp) {
      throw ValidationError(fmt::format("column map: no room_temp[{}] and no missing_neighbor_temp policy", i + 1));
    } else if (std::holds_alternative<ConstantTemperature>(*policy.missing_neighbor_temp)) {
      kept.push_back(i);
    }
  }
  for (const auto& [room, b] : columns.room_temp)
    if (room > layout.k)
      throw ValidationError(fmt::format("column map: room_temp[{}] outside layout of {} rooms", room, layout.k));
  if (kept.empty()) throw ValidationError("ingest: no rooms left after dropping unmeasured rooms");
  return kept;
}

SensorTrace ingest_csv(const std::filesystem::path& path, const ColumnMap& columns,
                       const ImputationPolicy& policy, double delta_t, const BuildingLayout& layout) {
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw ValidationError("ingest: delta_t must be > 0");
  layout.validate();
  policy.validate(columns);
  const auto table = csv::read(path);
  if (table.rows.size() < 2) throw ValidationError(fmt::format("{}: fewer than 2 data rows", path.string()));

  // Timestamps, relative to the first row.
  const int c_time = table.require(columns.time.name, path);
  std::vector<double> hours(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& cell = table.rows[r][c_time];
    const std::string what = fmt::format("{} row {}", path.string(), r + 2);
    switch (columns.time_format) {
      case TimeFormat::Iso8601: hours[r] = parse_iso_hours(cell, what); break;
      case TimeFormat::Hours: hours[r] = parse_real(cell, what); break;
      case TimeFormat::Minutes: hours[r] = parse_real(cell, what) / 60.0; break;
      case TimeFormat::Seconds: hours[r] = parse_real(cell, what) / 3600.0; break;
    }
    if (r > 0 && !(hours[r] > hours[r - 1]))
      throw ValidationError(fmt::format("{}: timestamps not strictly increasing at row {}", path.string(), r + 2));
  }
  const double origin = hours.front();
  double t0_hours = origin;
  if (columns.time_format == TimeFormat::Iso8601) t0_hours = std::fmod(origin, 24.0);
  for (auto& h : hours) h -= origin;

  const double span = hours.back();
  const auto z = static_cast<int>(std::floor(span / delta_t + 1e-9)) + 1;
  if (z < 2) throw ValidationError(fmt::format("{}: data spans less than one step of {} h", path.string(), delta_t));
  Eigen::VectorXd grid(z);
  for (int t = 0; t < z; ++t) grid[t] = t * delta_t;
  const double grid_end = grid[z - 1];

  const std::vector<int> kept = kept_rooms(columns, policy, layout);

  SensorTrace s;
  std::vector<int> remap(static_cast<std::size_t>(layout.k), -1);
  for (std::size_t n = 0; n < kept.size(); ++n) remap[kept[n]] = static_cast<int>(n);
  s.layout.k = static_cast<int>(kept.size());
  for (auto [i, j] : layout.edges)
    if (remap[i] >= 0 && remap[j] >= 0) s.layout.edges.emplace_back(remap[i], remap[j]);
  for (int i : kept) {
    s.layout.ambient_exposed.push_back(layout.ambient_exposed[i]);
    s.layout.room_class.push_back(layout.room_class[i]);
    s.layout.weights.push_back(layout.weights[i]);
  }
  s.layout.validate();

  const int k = s.layout.k;
  s.delta_t = delta_t;
  s.t0_hours = t0_hours;
  s.temps_meas.resize(k, z);
  s.hvac_temp_meas.resize(k, z);
  s.hvac_state.resize(k, z);

  for (int n = 0; n < k; ++n) {
    const int room = kept[n] + 1;
    if (auto it = columns.room_temp.find(room); it != columns.room_temp.end()) {
      const Series series = extract(table, hours, it->second, path, true);
      check_gaps(series, delta_t, grid_end);
      s.temps_meas.row(n) = interpolate(series, grid).transpose();
    } else {
      s.temps_meas.row(n).setConstant(std::get<ConstantTemperature>(*policy.missing_neighbor_temp).value_k);
    }

    if (const auto* c = std::get_if<ConstantTemperature>(&policy.hvac_temp)) {
      s.hvac_temp_meas.row(n).setConstant(c->value_k);
    } else {
      const auto it = columns.hvac_temp.find(room);
      if (it == columns.hvac_temp.end())
        throw ValidationError(fmt::format("column map: no hvac_temp[{}] column", room));
      const Series series = extract(table, hours, it->second, path, true);
      check_gaps(series, delta_t, grid_end);
      s.hvac_temp_meas.row(n) = interpolate(series, grid).transpose();
    }

    if (std::holds_alternative<AlwaysOff>(policy.hvac_state)) {
      s.hvac_state.row(n).setZero();
    } else if (const auto* mw = std::get_if<ManualWindows>(&policy.hvac_state)) {
      s.hvac_state.row(n).setZero();
      std::vector<std::pair<int, int>> ranges;
      if (auto it = mw->windows.find(room); it != mw->windows.end()) ranges = it->second;
      if (auto it = mw->clock_windows.find(room); it != mw->clock_windows.end()) {
        for (auto [a, b] : it->second) {
          // Steps whose time of day falls in [a, b).
          const auto first = static_cast<int>(std::ceil((a - t0_hours) / delta_t - 1e-9));
          const auto last = static_cast<int>(std::ceil((b - t0_hours) / delta_t - 1e-9));
          ranges.emplace_back(std::max(first, 0), last);
        }
      }
      for (auto [a, b] : ranges) {
        const int end = std::min(b, z);
        if (a < end) s.hvac_state.row(n).segment(a, end - a).setOnes();
      }
    } else {
      const auto it = columns.hvac_state.find(room);
      if (it == columns.hvac_state.end())
        throw ValidationError(fmt::format("column map: no hvac_state[{}] column", room));
      const Series series = extract(table, hours, it->second, path, false);
      check_gaps(series, delta_t, grid_end);
      const Eigen::VectorXd held = hold(series, grid);
      for (int t = 0; t < z; ++t) s.hvac_state(n, t) = held[t] >= 0.5 ? 1 : 0;
    }
  }
  if (const auto* mw = std::get_if<ManualWindows>(&policy.hvac_state)) {
    auto check_room = [&](int room) {
      if (room < 1 || room > layout.k)
        throw ValidationError(fmt::format("policy: hvac_windows[{}] outside layout of {} rooms", room, layout.k));
    };
    for (const auto& entry : mw->windows) check_room(entry.first);
    for (const auto& entry : mw->clock_windows) check_room(entry.first);
  }

  if (const auto* g = std::get_if<SyntheticGaussian>(&policy.ambient)) {
    Rng rng(policy.seed);
    s.ambient_meas = synthetic_ambient(SyntheticAmbient{g->mean_k, g->std_k, g->smoothing_window}, z, rng);
  } else {
    const Series series = extract(table, hours, *columns.ambient, path, true);
    check_gaps(series, delta_t, grid_end);
    s.ambient_meas = interpolate(series, grid);
  }
  s.validate();
  return s;
}

}  // namespace thermocc
