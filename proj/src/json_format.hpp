#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace surftrack::detail {

/// 17 significant digits: round-trips every double. Non-finite values
/// become null so the output stays valid JSON.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace surftrack::detail
