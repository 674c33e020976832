#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

namespace wisva::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Read once from WISVA_LOG (error|info|debug); defaults to info.
inline Level level() {
  static const Level lvl = [] {
    const char* env = std::getenv("WISVA_LOG");
    if (env == nullptr) return Level::info;
    const std::string_view v(env);
    if (v == "error") return Level::error;
    if (v == "debug") return Level::debug;
    return Level::info;
  }();
  return lvl;
}

inline void write(Level lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(level())) return;
  static constexpr const char* tags[] = {"error", "info", "debug"};
  std::fprintf(stderr, "[wisva %s] %s\n", tags[static_cast<int>(lvl)], msg.c_str());
}

inline void error(const std::string& msg) { write(Level::error, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void debug(const std::string& msg) { write(Level::debug, msg); }

}  // namespace wisva::log
