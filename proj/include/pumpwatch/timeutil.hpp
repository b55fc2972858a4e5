#pragma once

#include <cstdint>
#include <string>

namespace pumpwatch {

// All timestamps in the pipeline are UTC epoch seconds. Candles sit on exact
// hour boundaries, so most code passes around hour-aligned values.

constexpr std::int64_t kSecondsPerHour = 3600;

inline bool is_hour_aligned(std::int64_t ts) { return ts % kSecondsPerHour == 0; }

// Round to the nearest hour boundary; exact half hours (xx:30:00) round up.
inline std::int64_t snap_to_hour(std::int64_t ts) {
    std::int64_t base = ts - ((ts % kSecondsPerHour) + kSecondsPerHour) % kSecondsPerHour;
    std::int64_t rem  = ts - base;
    return rem * 2 >= kSecondsPerHour ? base + kSecondsPerHour : base;
}

inline int hour_of_day(std::int64_t ts) {
    std::int64_t sec = ((ts % 86400) + 86400) % 86400;
    return static_cast<int>(sec / kSecondsPerHour);
}

// Parse "YYYY-MM-DDTHH:MM:SSZ" (strict) into epoch seconds. Throws Error.
std::int64_t parse_iso8601(const std::string& s);

// Format epoch seconds as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(std::int64_t ts);

}  // namespace pumpwatch
