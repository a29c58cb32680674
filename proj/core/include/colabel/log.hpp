#pragma once

#include <string_view>

namespace colabel {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

/// Threshold parsed once from the COLABEL_LOG environment variable
/// (debug|info|warn|error|off; default warn). Messages below it are dropped.
LogLevel log_threshold();

/// Overrides the threshold for the current process (tests use this).
void set_log_threshold(LogLevel level);

void log_message(LogLevel level, std::string_view msg);

inline void log_debug(std::string_view msg) { log_message(LogLevel::kDebug, msg); }
inline void log_info(std::string_view msg) { log_message(LogLevel::kInfo, msg); }
inline void log_warn(std::string_view msg) { log_message(LogLevel::kWarn, msg); }
inline void log_error(std::string_view msg) { log_message(LogLevel::kError, msg); }

}  // namespace colabel
