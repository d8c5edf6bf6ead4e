#pragma once

#include <cstdio>
#include <string>

namespace geocast {

/// Shortest text form that round-trips an IEEE double exactly.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace geocast
