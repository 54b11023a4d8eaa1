#pragma once

#include <string_view>

namespace thermocc {

enum class TemperatureUnit { Kelvin, Fahrenheit, Celsius };

// Accepts "K", "F", "C" (case-insensitive). Throws ValidationError otherwise.
TemperatureUnit parse_temperature_unit(std::string_view tag);
std::string_view unit_tag(TemperatureUnit unit);

// Affine conversion of an absolute temperature.
double convert_temperature(double value, TemperatureUnit from, TemperatureUnit to);
double convert_temperature(double value, std::string_view from, std::string_view to);

// Conversion of a temperature difference (e.g. a standard deviation): scale only.
double convert_temperature_delta(double delta, TemperatureUnit from, TemperatureUnit to);

inline double fahrenheit_to_kelvin(double f) {
  return convert_temperature(f, TemperatureUnit::Fahrenheit, TemperatureUnit::Kelvin);
}
inline double kelvin_to_fahrenheit(double k) {
  return convert_temperature(k, TemperatureUnit::Kelvin, TemperatureUnit::Fahrenheit);
}

inline constexpr double kSecondsPerHour = 3600.0;

}  // namespace thermocc
