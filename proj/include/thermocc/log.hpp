#pragma once

#include <spdlog/spdlog.h>

namespace thermocc::log {

// Sets the level from THERMOCC_LOG (trace, debug, info, warn, error, off).
// Defaults to warn. Safe to call more than once.
void init_from_env();

using spdlog::debug;
using spdlog::info;
using spdlog::warn;
using spdlog::error;

}  // namespace thermocc::log
