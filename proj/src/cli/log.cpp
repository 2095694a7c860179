#include "ionflux/cli/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <stdexcept>

#include <json.hpp>

namespace ionflux::cli {

namespace {

struct State {
  LogLevel level = LogLevel::Info;
  bool json = false;
  std::mutex mutex;
};

State& state() {
  static State s;
  return s;
}

const char* level_name(LogLevel l) {
  switch (l) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    case LogLevel::Off: return "off";
  }
  return "info";
}

}  // namespace

LogLevel parse_log_level(std::string_view s) {
  if (s == "debug") return LogLevel::Debug;
  if (s == "info") return LogLevel::Info;
  if (s == "warn" || s == "warning") return LogLevel::Warn;
  if (s == "error") return LogLevel::Error;
  if (s == "off") return LogLevel::Off;
  throw std::invalid_argument("unknown log level '" + std::string(s) + "'");
}

void init_logging(bool json) {
  auto& s = state();
  s.json = json;
  if (const char* env = std::getenv("IONFLUX_LOG_LEVEL")) {
    try {
      s.level = parse_log_level(env);
    } catch (const std::invalid_argument&) {
      s.level = LogLevel::Info;
      log_warn(std::string("ignoring IONFLUX_LOG_LEVEL=") + env);
    }
  }
}

void log(LogLevel level, std::string_view msg) {
  auto& s = state();
  if (level < s.level || level == LogLevel::Off) return;
  std::lock_guard<std::mutex> lock(s.mutex);
  if (s.json) {
    std::cerr << nlohmann::json{{"level", level_name(level)}, {"msg", std::string(msg)}}.dump() << '\n';
  } else {
    std::cerr << '[' << level_name(level) << "] " << msg << '\n';
  }
}

}  // namespace ionflux::cli
