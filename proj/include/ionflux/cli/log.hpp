#pragma once

#include <string>
#include <string_view>

namespace ionflux::cli {

enum class LogLevel { Debug, Info, Warn, Error, Off };

/// Level comes from IONFLUX_LOG_LEVEL (debug, info, warn, error, off);
/// default info. Messages go to stderr, one per line.
void init_logging(bool json);
void log(LogLevel level, std::string_view msg);

inline void log_debug(std::string_view m) { log(LogLevel::Debug, m); }
inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_warn(std::string_view m) { log(LogLevel::Warn, m); }
inline void log_error(std::string_view m) { log(LogLevel::Error, m); }

LogLevel parse_log_level(std::string_view s);

}  // namespace ionflux::cli
