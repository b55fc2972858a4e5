#include "pumpwatch/timeutil.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "pumpwatch/errors.hpp"

namespace pumpwatch {

namespace {

// Civil <-> epoch day conversions (Howard Hinnant's algorithms), UTC only.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

int parse_int(const char* first, const char* last, const char* what) {
    int out = 0;
    auto [p, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || p != last)
        throw Error(std::string("bad timestamp field: ") + what);
    return out;
}

}  // namespace

std::int64_t parse_iso8601(const std::string& s) {
    // Expected layout: 2021-01-01T00:00:00Z
    if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' ||
        s[13] != ':' || s[16] != ':' || s[19] != 'Z')
        throw Error("bad ISO-8601 timestamp '" + s + "' (want YYYY-MM-DDTHH:MM:SSZ)");
    const char* p = s.data();
    int y  = parse_int(p, p + 4, "year");
    int mo = parse_int(p + 5, p + 7, "month");
    int d  = parse_int(p + 8, p + 10, "day");
    int h  = parse_int(p + 11, p + 13, "hour");
    int mi = parse_int(p + 14, p + 16, "minute");
    int se = parse_int(p + 17, p + 19, "second");
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60)
        throw Error("out-of-range ISO-8601 timestamp '" + s + "'");
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_iso8601(std::int64_t ts) {
    std::int64_t days = ts / 86400;
    std::int64_t sod  = ts % 86400;
    if (sod < 0) { sod += 86400; days -= 1; }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                  static_cast<int>(sod % 60));
    return buf;
}

}  // namespace pumpwatch
