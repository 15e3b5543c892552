#pragma once

#include <array>
#include <charconv>
#include <string>

namespace irl {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), r.ptr};
}

}  // namespace irl
