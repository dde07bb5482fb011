#pragma once

#include <spdlog/spdlog.h>

namespace impactbench::log {

// Reads IMPACTBENCH_LOG (trace|debug|info|warn|error|off) and applies it to
// the default logger. Unset or unknown values leave `fallback` in place.
void init_from_env(spdlog::level::level_enum fallback = spdlog::level::warn);

}  // namespace impactbench::log
