#include "fedstream/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace fedstream {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("FEDSTREAM_LOG");
    if (!env) return LogLevel::warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[fedstream:%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

}  // namespace fedstream
