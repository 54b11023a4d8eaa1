#include "thermocc/units.hpp"

#include <cctype>
#include <string>

#include "thermocc/errors.hpp"

namespace thermocc {

TemperatureUnit parse_temperature_unit(std::string_view tag) {
  if (tag.size() == 1) {
    switch (std::toupper(static_cast<unsigned char>(tag.front()))) {
      case 'K': return TemperatureUnit::Kelvin;
      case 'F': return TemperatureUnit::Fahrenheit;
      case 'C': return TemperatureUnit::Celsius;
      default: break;
    }
  }
  throw ValidationError("unknown temperature unit '" + std::string(tag) + "' (expected K, F or C)");
}

std::string_view unit_tag(TemperatureUnit unit) {
  switch (unit) {
    case TemperatureUnit::Kelvin: return "K";
    case TemperatureUnit::Fahrenheit: return "F";
    case TemperatureUnit::Celsius: return "C";
  }
  return "?";
}

namespace {

double to_kelvin(double v, TemperatureUnit u) {
  switch (u) {
    case TemperatureUnit::Kelvin: return v;
    case TemperatureUnit::Fahrenheit: return (v - 32.0) * 5.0 / 9.0 + 273.15;
    case TemperatureUnit::Celsius: return v + 273.15;
  }
  return v;
}

double from_kelvin(double k, TemperatureUnit u) {
  switch (u) {
    case TemperatureUnit::Kelvin: return k;
    case TemperatureUnit::Fahrenheit: return (k - 273.15) * 9.0 / 5.0 + 32.0;
    case TemperatureUnit::Celsius: return k - 273.15;
  }
  return k;
}

double kelvin_per_unit(TemperatureUnit u) {
  return u == TemperatureUnit::Fahrenheit ? 5.0 / 9.0 : 1.0;
}

}  // namespace

double convert_temperature(double value, TemperatureUnit from, TemperatureUnit to) {
  if (from == to) return value;
  return from_kelvin(to_kelvin(value, from), to);
}

double convert_temperature(double value, std::string_view from, std::string_view to) {
  return convert_temperature(value, parse_temperature_unit(from), parse_temperature_unit(to));
}

double convert_temperature_delta(double delta, TemperatureUnit from, TemperatureUnit to) {
  if (from == to) return delta;
  return delta * kelvin_per_unit(from) / kelvin_per_unit(to);
}

}  // namespace thermocc
