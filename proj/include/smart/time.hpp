#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace smart {

// Milliseconds since the Unix epoch, UTC.
struct Timestamp {
  std::int64_t ms = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

// Accepts "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]" (a space may replace
// 'T'). Offsets are folded into UTC. Returns nullopt when the string is not
// a valid calendar timestamp.
std::optional<Timestamp> parse_iso8601(std::string_view text);

// "YYYY-MM-DDTHH:MM:SSZ", or with ".mmm" when the millisecond part is nonzero.
std::string format_iso8601(Timestamp ts);

// Floor division that rounds toward negative infinity.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace smart
