#include "impactbench/core/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace impactbench::log {

void init_from_env(spdlog::level::level_enum fallback) {
  // Logs go to stderr; stdout carries protocol traffic in serve mode.
  if (!spdlog::get("impactbench")) spdlog::set_default_logger(spdlog::stderr_color_mt("impactbench"));
  spdlog::set_level(fallback);
  const char* raw = std::getenv("IMPACTBENCH_LOG");
  if (raw == nullptr || *raw == '\0') return;
  const auto level = spdlog::level::from_str(raw);
  // from_str maps unknown names to off; only honor it when asked for explicitly.
  if (level != spdlog::level::off || std::string(raw) == "off") spdlog::set_level(level);
}

}  // namespace impactbench::log
