#pragma once

#include <charconv>
#include <string>

namespace ionflux::util {

/// Shortest decimal text that round-trips to the same double.
inline std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace ionflux::util
