#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace rprm {

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Verbosity is controlled by the RPRM_LOG environment variable:
// quiet | warn | info (default) | debug.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("RPRM_LOG");
    if (!env) return LogLevel::kInfo;
    const std::string v(env);
    if (v == "quiet") return LogLevel::kQuiet;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

inline void log_warn(const std::string& msg) {
  if (log_level() >= LogLevel::kWarn) std::cerr << "[warn] " << msg << "\n";
}

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[info] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace rprm
