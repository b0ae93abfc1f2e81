#pragma once

#include <ostream>
#include <string>

namespace otmetrics {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from OTMETRICS_LOG (error|warn|info|debug, default warn) unless set here.
void set_log_level(LogLevel level);
LogLevel log_level();
LogLevel parse_log_level(const std::string& text);
// Messages go to std::cerr unless redirected.
void set_log_stream(std::ostream* stream);

void log_message(LogLevel level, const std::string& message);
inline void log_error(const std::string& m) { log_message(LogLevel::kError, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::kWarn, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::kInfo, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::kDebug, m); }

}  // namespace otmetrics
