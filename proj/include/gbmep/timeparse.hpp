#pragma once

#include <cctype>
#include <cstdint>
#include <string>

#include "gbmep/errors.hpp"

namespace gbmep {

struct CivilDateTime {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31
    int hour = 0;
    int minute = 0;
    int second = 0;
};

enum class TimeZoneMode { utc, europe_london };

inline const char* timezone_name(TimeZoneMode m) {
    return m == TimeZoneMode::utc ? "utc" : "europe_london";
}

inline TimeZoneMode parse_timezone(const std::string& s) {
    if (s == "utc") return TimeZoneMode::utc;
    if (s == "europe_london") return TimeZoneMode::europe_london;
    throw argument_error("unknown timezone mode '" + s + "'");
}

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

// Seconds since the epoch for a civil time read as UTC.
inline std::int64_t civil_to_epoch_utc(const CivilDateTime& c) {
    return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
           c.second;
}

namespace detail {

// Epoch second of 01:00 UTC on the last Sunday of `month` (3 or 10): the EU
// clock-change instant used by Europe/London.
inline std::int64_t london_transition(int year, int month) {
    // Last day of March is the 31st, of October the 31st.
    std::int64_t z = days_from_civil(year, month, 31);
    // days_from_civil(1970,1,1) == 0 was a Thursday; weekday = (z+4) mod 7
    // with Sunday == 0.
    const int weekday = static_cast<int>(((z + 4) % 7 + 7) % 7);
    z -= weekday;
    return z * 86400 + 3600;
}

inline bool london_is_dst(std::int64_t epoch_utc, int year_hint) {
    const std::int64_t begin = london_transition(year_hint, 3);
    const std::int64_t end = london_transition(year_hint, 10);
    return epoch_utc >= begin && epoch_utc < end;
}

} // namespace detail

struct LocalTimeResolution {
    std::int64_t epoch_seconds = 0;
    bool ambiguous = false; // clocks-back hour, resolved to the earlier offset
    bool skipped = false;   // clocks-forward gap, resolved to the earlier offset
};

// Converts a civil wall-clock reading to an epoch instant. For
// europe_london, times in the autumn clocks-back hour are ambiguous and
// times in the spring gap do not exist; both resolve to the offset in force
// before the transition, and the flags report which case applied.
inline LocalTimeResolution civil_to_epoch(const CivilDateTime& c, TimeZoneMode mode) {
    LocalTimeResolution out;
    const std::int64_t naive = civil_to_epoch_utc(c);
    if (mode == TimeZoneMode::utc) {
        out.epoch_seconds = naive;
        return out;
    }
    const bool gmt_valid = !detail::london_is_dst(naive, c.year);        // offset 0
    const bool bst_valid = detail::london_is_dst(naive - 3600, c.year);  // offset +1h
    if (gmt_valid && bst_valid) {
        out.ambiguous = true;
        out.epoch_seconds = naive - 3600; // BST reading: the earlier instant
    } else if (bst_valid) {
        out.epoch_seconds = naive - 3600;
    } else if (gmt_valid) {
        out.epoch_seconds = naive;
    } else {
        out.skipped = true;
        out.epoch_seconds = naive; // read with the pre-transition GMT offset
    }
    return out;
}

// Inverse of civil_to_epoch for exporting timestamps; ambiguous instants
// render as their BST reading.
inline CivilDateTime epoch_to_civil(std::int64_t epoch, TimeZoneMode mode) {
    std::int64_t local = epoch;
    if (mode == TimeZoneMode::europe_london) {
        int y, m, d;
        civil_from_days(epoch >= 0 ? epoch / 86400 : (epoch - 86399) / 86400, y, m, d);
        if (detail::london_is_dst(epoch, y)) local += 3600;
    }
    CivilDateTime c;
    std::int64_t z = local >= 0 ? local / 86400 : (local - 86399) / 86400;
    std::int64_t rem = local - z * 86400;
    civil_from_days(z, c.year, c.month, c.day);
    c.hour = static_cast<int>(rem / 3600);
    c.minute = static_cast<int>((rem % 3600) / 60);
    c.second = static_cast<int>(rem % 60);
    return c;
}

// Parses a timestamp against a format using the tokens %d %m %Y %H %M %S;
// any other character must match literally. Returns false on mismatch.
inline bool parse_timestamp(const std::string& text, const std::string& format,
                            CivilDateTime& out) {
    std::size_t ti = 0;
    auto read_int = [&](int width, int& value) {
        int v = 0, got = 0;
        while (got < width && ti < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[ti]))) {
            v = v * 10 + (text[ti] - '0');
            ++ti;
            ++got;
        }
        if (got == 0) return false;
        value = v;
        return true;
    };
    CivilDateTime c;
    for (std::size_t fi = 0; fi < format.size(); ++fi) {
        if (format[fi] == '%' && fi + 1 < format.size()) {
            ++fi;
            bool ok = true;
            switch (format[fi]) {
                case 'd': ok = read_int(2, c.day); break;
                case 'm': ok = read_int(2, c.month); break;
                case 'Y': ok = read_int(4, c.year); break;
                case 'H': ok = read_int(2, c.hour); break;
                case 'M': ok = read_int(2, c.minute); break;
                case 'S': ok = read_int(2, c.second); break;
                default: return false;
            }
            if (!ok) return false;
        } else {
            if (ti >= text.size() || text[ti] != format[fi]) return false;
            ++ti;
        }
    }
    if (ti != text.size()) return false;
    if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour > 23 || c.minute > 59 ||
        c.second > 60)
        return false;
    out = c;
    return true;
}

// "YYYY-MM-DD" at local midnight.
inline CivilDateTime parse_iso_date(const std::string& text) {
    CivilDateTime c;
    if (!parse_timestamp(text, "%Y-%m-%d", c))
        throw argument_error("expected an ISO date (YYYY-MM-DD), got '" + text + "'");
    return c;
}

} // namespace gbmep
