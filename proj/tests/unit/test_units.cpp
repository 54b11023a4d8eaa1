#include <doctest.h>

#include <cmath>
#include <random>

#include "thermocc/errors.hpp"
#include "thermocc/units.hpp"

using namespace thermocc;
using doctest::Approx;

TEST_CASE("fixed conversion points") {
  CHECK(std::abs(convert_temperature(80.0, "F", "K") - 299.817) < 5e-4);
  CHECK(convert_temperature(0.0, "C", "K") == 273.15);
  CHECK(convert_temperature(212.0, "F", "C") == Approx(100.0).epsilon(1e-12));
  CHECK(convert_temperature(-40.0, "C", "F") == Approx(-40.0).epsilon(1e-12));
  for (double x : {0.0, 1.5, 300.0}) CHECK(convert_temperature(x, "K", "K") == x);
}

TEST_CASE("unit tags are case-insensitive and validated") {
  CHECK(parse_temperature_unit("k") == TemperatureUnit::Kelvin);
  CHECK(parse_temperature_unit("F") == TemperatureUnit::Fahrenheit);
  CHECK(parse_temperature_unit("c") == TemperatureUnit::Celsius);
  CHECK_THROWS_AS(parse_temperature_unit("R"), ValidationError);
  CHECK_THROWS_AS(parse_temperature_unit(""), ValidationError);
  CHECK_THROWS_AS(convert_temperature(1.0, "X", "K"), ValidationError);
}

TEST_CASE("conversions compose to the identity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> value(-500.0, 1500.0);
  const TemperatureUnit units[] = {TemperatureUnit::Kelvin, TemperatureUnit::Fahrenheit, TemperatureUnit::Celsius};
  for (int n = 0; n < 2000; ++n) {
    const double x = value(rng);
    for (auto a : units)
      for (auto b : units) CHECK(convert_temperature(convert_temperature(x, a, b), b, a) == Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("differences scale without offset") {
  CHECK(convert_temperature_delta(9.0, TemperatureUnit::Fahrenheit, TemperatureUnit::Kelvin) == Approx(5.0));
  CHECK(convert_temperature_delta(5.0, TemperatureUnit::Celsius, TemperatureUnit::Kelvin) == 5.0);
  CHECK(convert_temperature_delta(1.0, TemperatureUnit::Kelvin, TemperatureUnit::Fahrenheit) == Approx(1.8));
}
