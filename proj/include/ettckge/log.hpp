#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace ettckge {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Level comes from CKGE_LOG (debug|info|warn|error|off); default info.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("CKGE_LOG");
    std::string v = env ? env : "info";
    if (v == "debug") return LogLevel::Debug;
    if (v == "warn") return LogLevel::Warn;
    if (v == "error") return LogLevel::Error;
    if (v == "off") return LogLevel::Off;
    return LogLevel::Info;
  }();
  return level;
}

inline void log(LogLevel lvl, const std::string& msg) {
  if (lvl < log_level()) return;
  const char* tag = lvl == LogLevel::Debug  ? "debug"
                    : lvl == LogLevel::Info ? "info"
                    : lvl == LogLevel::Warn ? "warn"
                                            : "error";
  std::cerr << "[ckge." << tag << "] " << msg << "\n";
}

inline void log_debug(const std::string& msg) { log(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log(LogLevel::Error, msg); }

}  // namespace ettckge
