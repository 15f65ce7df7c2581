#include "btd/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include <cstdlib>
#include <string>

namespace btd::log {

void configure_from_env() {
  ensure_default_level();
  auto logger = spdlog::stderr_logger_mt("btd");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("BTD_LOG");
  const std::string level = env ? env : "quiet";
  if (level == "trace") {
    spdlog::set_level(spdlog::level::trace);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::warn);
  }
}

}  // namespace btd::log
