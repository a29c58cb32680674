#include "colabel/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

namespace colabel {

namespace {

LogLevel parse_level(const char* s) {
  if (s == nullptr) return LogLevel::kWarn;
  std::string v(s);
  if (v == "debug") return LogLevel::kDebug;
  if (v == "info") return LogLevel::kInfo;
  if (v == "warn") return LogLevel::kWarn;
  if (v == "error") return LogLevel::kError;
  if (v == "off") return LogLevel::kOff;
  return LogLevel::kWarn;
}

LogLevel& threshold_storage() {
  static LogLevel level = parse_level(std::getenv("COLABEL_LOG"));
  return level;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::kDebug: return "debug";
    case LogLevel::kInfo: return "info";
    case LogLevel::kWarn: return "warn";
    case LogLevel::kError: return "error";
    default: return "?";
  }
}

}  // namespace

LogLevel log_threshold() { return threshold_storage(); }

void set_log_threshold(LogLevel level) { threshold_storage() = level; }

void log_message(LogLevel level, std::string_view msg) {
  if (static_cast<int>(level) < static_cast<int>(threshold_storage())) return;
  std::fprintf(stderr, "[%s] %.*s\n", level_tag(level), static_cast<int>(msg.size()), msg.data());
}

}  // namespace colabel
