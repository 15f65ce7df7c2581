#pragma once

#include <spdlog/spdlog.h>

#include <utility>

namespace btd::log {

// Reads BTD_LOG in {quiet, info, trace}; default quiet (warnings and errors
// only). Diagnostics go to stderr.
void configure_from_env();

// Library default is quiet until configure_from_env() says otherwise.
inline void ensure_default_level() {
  static const bool once = [] {
    spdlog::set_level(spdlog::level::warn);
    return true;
  }();
  (void)once;
}

template <class... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  ensure_default_level();
  spdlog::info(fmt, std::forward<Args>(args)...);
}

template <class... Args>
void trace(fmt::format_string<Args...> fmt, Args&&... args) {
  ensure_default_level();
  spdlog::trace(fmt, std::forward<Args>(args)...);
}

template <class... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  ensure_default_level();
  spdlog::warn(fmt, std::forward<Args>(args)...);
}

}  // namespace btd::log
