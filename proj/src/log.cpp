#include "otmetrics/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

#include "otmetrics/error.hpp"

namespace otmetrics {

namespace {

LogLevel level_from_env() {
  const char* env = std::getenv("OTMETRICS_LOG");
  if (!env || !*env) return LogLevel::kWarn;
  try {
    return parse_log_level(env);
  } catch (const InvalidConfig&) {
    return LogLevel::kWarn;
  }
}

std::atomic<int>& level_slot() {
  static std::atomic<int> slot{static_cast<int>(level_from_env())};
  return slot;
}

std::mutex& stream_mutex() {
  static std::mutex m;
  return m;
}

std::ostream*& stream_slot() {
  static std::ostream* s = &std::cerr;
  return s;
}

const char* tag(LogLevel level) {
  switch (level) {
    case LogLevel::kError:
      return "error";
    case LogLevel::kWarn:
      return "warn";
    case LogLevel::kInfo:
      return "info";
    case LogLevel::kDebug:
      return "debug";
  }
  return "?";
}

}  // namespace

LogLevel parse_log_level(const std::string& text) {
  if (text == "error") return LogLevel::kError;
  if (text == "warn" || text == "warning") return LogLevel::kWarn;
  if (text == "info") return LogLevel::kInfo;
  if (text == "debug") return LogLevel::kDebug;
  throw InvalidConfig("log level must be error, warn, info or debug, got '" + text + "'");
}

void set_log_level(LogLevel level) { level_slot().store(static_cast<int>(level)); }

LogLevel log_level() { return static_cast<LogLevel>(level_slot().load()); }

void set_log_stream(std::ostream* stream) {
  std::lock_guard<std::mutex> lock(stream_mutex());
  stream_slot() = stream ? stream : &std::cerr;
}

void log_message(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > level_slot().load()) return;
  std::lock_guard<std::mutex> lock(stream_mutex());
  *stream_slot() << "otmetrics " << tag(level) << ": " << message << '\n';
}

}  // namespace otmetrics
