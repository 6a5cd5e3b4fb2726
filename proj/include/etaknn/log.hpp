#pragma once

#include <functional>
#include <string_view>

namespace etaknn {

enum class LogLevel { info, warning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Replaces the process-wide sink. An empty sink silences logging.
void set_log_sink(LogSink sink);
// Restores the default sink, which writes to stderr.
void reset_log_sink();
void log_message(LogLevel level, std::string_view message);

inline void log_warning(std::string_view message) {
  log_message(LogLevel::warning, message);
}
inline void log_info(std::string_view message) {
  log_message(LogLevel::info, message);
}

}  // namespace etaknn
