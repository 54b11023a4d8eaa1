#include "thermocc/config_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "thermocc/errors.hpp"

namespace thermocc {

namespace config_values {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::string body = trim(s);
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']')
    body = body.substr(1, body.size() - 2);
  std::vector<std::string> out;
  if (trim(body).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = body.find(sep, start);
    out.push_back(trim(std::string_view(body).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

namespace {

bool parse_plain_double(std::string_view s, double& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

double parse_real(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  double v = 0.0;
  if (parse_plain_double(t, v) && std::isfinite(v)) return v;
  const auto slash = t.find('/');
  if (slash != std::string::npos) {
    double num = 0.0, den = 0.0;
    if (parse_plain_double(trim(std::string_view(t).substr(0, slash)), num) &&
        parse_plain_double(trim(std::string_view(t).substr(slash + 1)), den) && den != 0.0) {
      v = num / den;
      if (std::isfinite(v)) return v;
    }
  }
  throw ValidationError(fmt::format("{}: expected a finite number, got '{}'", what, t));
}

long long parse_integer(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ValidationError(fmt::format("{}: expected an integer, got '{}'", what, t));
  return v;
}

std::vector<double> parse_real_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_real(item, what));
  return out;
}

std::vector<int> parse_int_list(std::string_view s, std::string_view what) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) out.push_back(static_cast<int>(parse_integer(item, what)));
  return out;
}

TaggedTemperature parse_tagged_temperature(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  if (t.empty() || !std::isalpha(static_cast<unsigned char>(t.back())))
    throw ValidationError(fmt::format("{}: temperature '{}' needs a unit suffix (K, F or C)", what, t));
  TaggedTemperature out;
  try {
    out.unit = parse_temperature_unit(std::string_view(t).substr(t.size() - 1));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", what, e.what()));
  }
  out.value = parse_real(std::string_view(t).substr(0, t.size() - 1), what);
  return out;
}

double parse_temperature_k(std::string_view s, std::string_view what) {
  const auto tagged = parse_tagged_temperature(s, what);
  return convert_temperature(tagged.value, tagged.unit, TemperatureUnit::Kelvin);
}

double parse_temperature_delta_k(std::string_view s, std::string_view what) {
  const auto tagged = parse_tagged_temperature(s, what);
  return convert_temperature_delta(tagged.value, tagged.unit, TemperatureUnit::Kelvin);
}

std::string format_real(double v) { return fmt::format("{}", v); }

}  // namespace config_values

namespace {

using boost::property_tree::ptree;
using namespace config_values;

// Tracks which keys of a section were read so leftovers can be reported.
class Section {
 public:
  Section(const ptree& root, std::string name) : name_(std::move(name)) {
    if (auto child = root.get_child_optional(name_)) tree_ = *child;
  }

  std::optional<std::string> get(const std::string& key) {
    used_.insert(key);
    if (auto v = tree_.get_optional<std::string>(ptree::path_type(key, '\0'))) return trim(*v);
    return std::nullopt;
  }

  std::string require(const std::string& key) {
    if (auto v = get(key)) return *v;
    throw ValidationError(fmt::format("[{}] missing required key '{}'", name_, key));
  }

  std::string label(const std::string& key) const { return fmt::format("{}.{}", name_, key); }

  void reject_unknown() const {
    for (const auto& [key, value] : tree_) {
      if (!used_.count(key))
        throw ValidationError(fmt::format("[{}] unknown key '{}'", name_, key));
    }
  }

 private:
  std::string name_;
  ptree tree_;
  std::set<std::string> used_;
};

int to_room_index(int one_based, int k, std::string_view what) {
  if (one_based < 1 || one_based > k)
    throw ValidationError(fmt::format("{}: room {} out of range 1..{}", what, one_based, k));
  return one_based - 1;
}

BuildingLayout parse_layout(Section& s) {
  BuildingLayout layout;
  const auto grid = s.get("grid");
  const auto rooms = s.get("rooms");
  const auto edges = s.get("edges");
  if (grid && edges) throw ValidationError("[layout] give either 'grid' or 'edges', not both");
  if (grid) {
    const auto dims = parse_int_list(*grid, s.label("grid"));
    if (dims.size() != 2) throw ValidationError("layout.grid: expected [rows, cols]");
    layout = BuildingLayout::grid(dims[0], dims[1]);
    if (rooms && parse_integer(*rooms, s.label("rooms")) != layout.k)
      throw ValidationError("layout.rooms disagrees with layout.grid");
  } else {
    if (!rooms) throw ValidationError("[layout] needs 'grid' or 'rooms' plus 'edges'");
    const long long k = parse_integer(*rooms, s.label("rooms"));
    if (k <= 0) throw ValidationError("layout.rooms must be positive");
    layout.k = static_cast<int>(k);
    if (edges) {
      for (const auto& item : split_list(*edges)) {
        const auto dash = item.find('-');
        if (dash == std::string::npos)
          throw ValidationError(fmt::format("layout.edges: expected 'i-j', got '{}'", item));
        int a = to_room_index(static_cast<int>(parse_integer(item.substr(0, dash), "layout.edges")),
                              layout.k, "layout.edges");
        int b = to_room_index(static_cast<int>(parse_integer(item.substr(dash + 1), "layout.edges")),
                              layout.k, "layout.edges");
        if (a == b) throw ValidationError(fmt::format("layout.edges: room {} adjacent to itself", a + 1));
        layout.edges.emplace_back(std::min(a, b), std::max(a, b));
      }
      std::sort(layout.edges.begin(), layout.edges.end());
      layout.edges.erase(std::unique(layout.edges.begin(), layout.edges.end()), layout.edges.end());
    }
    layout.ambient_exposed.assign(layout.k, true);
    layout.room_class.assign(layout.k, RoomClass::Office);
    layout.weights.assign(layout.k, 1.0);
  }

  if (auto v = s.get("not_ambient_exposed")) {
    for (int room : parse_int_list(*v, s.label("not_ambient_exposed")))
      layout.ambient_exposed[to_room_index(room, layout.k, "layout.not_ambient_exposed")] = false;
  }

  if (auto v = s.get("room_classes")) {
    const auto names = split_list(*v);
    if (names.size() != static_cast<std::size_t>(layout.k))
      throw ValidationError("layout.room_classes: expected one class per room");
    for (int i = 0; i < layout.k; ++i) layout.room_class[i] = parse_room_class(names[i]);
  }
  for (auto cls : {RoomClass::BigConference, RoomClass::SmallConference}) {
    const std::string key(room_class_name(cls));
    if (auto v = s.get(key)) {
      for (int room : parse_int_list(*v, s.label(key)))
        layout.room_class[to_room_index(room, layout.k, s.label(key))] = cls;
    }
  }

  for (auto cls : {RoomClass::BigConference, RoomClass::SmallConference, RoomClass::Office}) {
    const std::string key = "weight_" + std::string(room_class_name(cls));
    if (auto v = s.get(key)) {
      const double w = parse_real(*v, s.label(key));
      for (int i = 0; i < layout.k; ++i)
        if (layout.room_class[i] == cls) layout.weights[i] = w;
    }
  }
  if (auto v = s.get("weights")) {
    const auto w = parse_real_list(*v, s.label("weights"));
    if (w.size() != static_cast<std::size_t>(layout.k))
      throw ValidationError("layout.weights: expected one weight per room");
    layout.weights = w;
  }
  s.reject_unknown();
  return layout;
}

ThermalParams parse_thermal(Section& s, const BuildingLayout& layout) {
  ThermalParams p;
  p.alpha = parse_real(s.require("alpha"), s.label("alpha"));
  p.beta = parse_real(s.require("beta"), s.label("beta"));
  p.omega = parse_real(s.require("omega"), s.label("omega"));
  p.gamma = parse_real(s.require("gamma"), s.label("gamma"));
  p.phi = parse_real(s.require("phi"), s.label("phi"));
  p.t_min = parse_temperature_k(s.require("t_min"), s.label("t_min"));
  p.t_max = parse_temperature_k(s.require("t_max"), s.label("t_max"));
  p.delta_t = parse_real(s.require("delta_t"), s.label("delta_t"));
  p.q_mean = parse_real(s.require("q_mean"), s.label("q_mean"));
  p.q_std = parse_real(s.require("q_std"), s.label("q_std"));

  p.t_hvac.assign(layout.k, std::nan(""));
  for (auto cls : {RoomClass::BigConference, RoomClass::SmallConference, RoomClass::Office}) {
    const std::string key = "t_hvac_" + std::string(room_class_name(cls));
    if (auto v = s.get(key)) {
      const double t = parse_temperature_k(*v, s.label(key));
      for (int i = 0; i < layout.k; ++i)
        if (layout.room_class[i] == cls) p.t_hvac[i] = t;
    }
  }
  if (auto v = s.get("t_hvac")) {
    const auto items = split_list(*v);
    if (items.size() != static_cast<std::size_t>(layout.k))
      throw ValidationError("thermal.t_hvac: expected one temperature per room");
    for (int i = 0; i < layout.k; ++i) p.t_hvac[i] = parse_temperature_k(items[i], s.label("t_hvac"));
  }
  for (int i = 0; i < layout.k; ++i) {
    if (std::isnan(p.t_hvac[i]))
      throw ValidationError(fmt::format("thermal: no supply-air temperature for room {}", i + 1));
  }
  s.reject_unknown();
  return p;
}

// Plain numbers are K; a unit suffix is converted as a temperature difference.
double parse_noise(const std::string& v, const std::string& what) {
  const std::string t = trim(v);
  if (!t.empty() && std::isalpha(static_cast<unsigned char>(t.back())))
    return parse_temperature_delta_k(t, what);
  return parse_real(t, what);
}

void parse_scenario_section(Section& s, ScenarioConfig& cfg, const std::filesystem::path& base_dir) {
  auto as_int = [&](const std::string& key) {
    const long long v = parse_integer(s.require(key), s.label(key));
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      throw ValidationError(fmt::format("{} out of range", s.label(key)));
    return static_cast<int>(v);
  };
  cfg.n_people = as_int("n_people");
  cfg.horizon_steps = as_int("horizon_steps");
  cfg.time_range_steps = as_int("time_range_steps");
  cfg.noise_std = s.get("noise_std") ? parse_noise(*s.get("noise_std"), s.label("noise_std")) : 0.0;
  if (auto v = s.get("seed")) {
    const std::string text = trim(*v);
    std::uint64_t seed = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || end != text.data() + text.size() || text.empty())
      throw ValidationError(fmt::format("{}: expected a non-negative integer, got '{}'", s.label("seed"), text));
    cfg.seed = seed;
  }
  const std::string mode = s.get("ambient").value_or("synthetic");
  if (mode == "synthetic") {
    SyntheticAmbient a;
    a.mean_k = parse_temperature_k(s.require("ambient_mean"), s.label("ambient_mean"));
    a.std_k = parse_temperature_delta_k(s.require("ambient_std"), s.label("ambient_std"));
    if (auto v = s.get("ambient_smoothing"))
      a.smoothing_window = static_cast<int>(parse_integer(*v, s.label("ambient_smoothing")));
    cfg.ambient_profile = a;
  } else if (mode == "file") {
    std::filesystem::path p = s.require("ambient_file");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    cfg.ambient_profile = AmbientFile{p};
  } else {
    throw ValidationError(fmt::format("scenario.ambient: expected 'synthetic' or 'file', got '{}'", mode));
  }
  s.reject_unknown();
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  ptree root;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(fmt::format("config parse error: {}", e.what()));
  }
  for (const auto& [name, child] : root) {
    if (name != "layout" && name != "thermal" && name != "scenario")
      throw ValidationError(fmt::format("config: unknown section [{}]", name));
  }
  ScenarioConfig cfg;
  Section layout(root, "layout");
  cfg.layout = parse_layout(layout);
  Section thermal(root, "thermal");
  cfg.params = parse_thermal(thermal, cfg.layout);
  Section scenario(root, "scenario");
  parse_scenario_section(scenario, cfg, base_dir);
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

std::string format_scenario(const ScenarioConfig& cfg) {
  const auto& l = cfg.layout;
  const auto& p = cfg.params;
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  auto joined = [](const auto& items, auto&& fmt_item) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) s += ", ";
      s += fmt_item(items[i]);
    }
    return s;
  };

  out += "[layout]\n";
  line("rooms", std::to_string(l.k));
  line("edges", joined(l.edges, [](auto e) { return fmt::format("{}-{}", e.first + 1, e.second + 1); }));
  std::vector<int> interior;
  for (int i = 0; i < l.k; ++i)
    if (!l.ambient_exposed[i]) interior.push_back(i + 1);
  line("not_ambient_exposed", joined(interior, [](int r) { return std::to_string(r); }));
  line("room_classes", joined(l.room_class, [](RoomClass c) { return std::string(room_class_name(c)); }));
  line("weights", joined(l.weights, [](double w) { return format_real(w); }));

  out += "\n[thermal]\n";
  line("alpha", format_real(p.alpha));
  line("beta", format_real(p.beta));
  line("omega", format_real(p.omega));
  line("gamma", format_real(p.gamma));
  line("phi", format_real(p.phi));
  line("t_min", format_real(p.t_min) + " K");
  line("t_max", format_real(p.t_max) + " K");
  line("t_hvac", joined(p.t_hvac, [](double t) { return format_real(t) + " K"; }));
  line("delta_t", format_real(p.delta_t));
  line("q_mean", format_real(p.q_mean));
  line("q_std", format_real(p.q_std));

  out += "\n[scenario]\n";
  line("n_people", std::to_string(cfg.n_people));
  line("horizon_steps", std::to_string(cfg.horizon_steps));
  line("time_range_steps", std::to_string(cfg.time_range_steps));
  line("noise_std", format_real(cfg.noise_std));
  line("seed", std::to_string(cfg.seed));
  if (const auto* synth = std::get_if<SyntheticAmbient>(&cfg.ambient_profile)) {
    line("ambient", "synthetic");
    line("ambient_mean", format_real(synth->mean_k) + " K");
    line("ambient_std", format_real(synth->std_k) + " K");
    line("ambient_smoothing", std::to_string(synth->smoothing_window));
  } else {
    line("ambient", "file");
    line("ambient_file", std::filesystem::absolute(std::get<AmbientFile>(cfg.ambient_profile).path).string());
  }
  return out;
}

void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write config '{}'", path.string()));
  out << format_scenario(cfg);
  if (!out) throw IoError(fmt::format("error writing config '{}'", path.string()));
}

}  // namespace thermocc
