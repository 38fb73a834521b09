#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "crimeflow/common.hpp"

namespace crimeflow {

/// Wall-clock time in the dataset's local timezone, as seconds since
/// 1970-01-01T00:00:00 local. All hour-of-week and year logic runs on this.
struct LocalTime {
    std::int64_t seconds = 0;

    friend auto operator<=>(const LocalTime&, const LocalTime&) = default;
};

namespace detail {

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    return sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count();
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace detail

inline LocalTime make_local(int y, unsigned mo, unsigned d, int h = 0, int mi = 0, int s = 0) {
    return LocalTime{detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s};
}

/// ISO-8601 timestamp split into its wall-clock reading and an optional UTC
/// offset (absent for naive timestamps).
struct ParsedTimestamp {
    std::int64_t wall_seconds = 0;
    std::optional<int> offset_seconds;
};

/// Accepts `YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|+HH[:MM]|-HH[:MM]]`; returns
/// nullopt on malformed input.
inline std::optional<ParsedTimestamp> parse_iso8601(std::string_view s) {
    int y, mo, d, h = 0, mi = 0, sec = 0;
    if (!detail::parse_digits(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || s[7] != '-' ||
        !detail::parse_digits(s, 5, 2, mo) || !detail::parse_digits(s, 8, 2, d))
        return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    {
        using namespace std::chrono;
        if (!year_month_day{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}}.ok())
            return std::nullopt;
    }
    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
        if (!detail::parse_digits(s, pos + 1, 2, h) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
            !detail::parse_digits(s, pos + 4, 2, mi))
            return std::nullopt;
        pos += 6;
        if (pos < s.size() && s[pos] == ':') {
            if (!detail::parse_digits(s, pos + 1, 2, sec)) return std::nullopt;
            pos += 3;
            if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
                ++pos;
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;  // sub-second ignored
            }
        }
        if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    }
    ParsedTimestamp out;
    out.wall_seconds = detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + sec;
    if (pos == s.size()) return out;
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
        out.offset_seconds = 0;
        return out;
    }
    if (s[pos] != '+' && s[pos] != '-') return std::nullopt;
    int sign = s[pos] == '-' ? -1 : 1;
    int oh = 0, om = 0;
    if (!detail::parse_digits(s, pos + 1, 2, oh)) return std::nullopt;
    std::size_t rest = pos + 3;
    if (rest < s.size()) {
        if (s[rest] == ':') ++rest;
        if (!detail::parse_digits(s, rest, 2, om) || rest + 2 != s.size()) return std::nullopt;
    }
    if (oh > 23 || om > 59) return std::nullopt;
    out.offset_seconds = sign * (oh * 3600 + om * 60);
    return out;
}

/// The dataset's local timezone: either a fixed offset ("UTC", "+02:00") or an
/// IANA name resolved through the system zoneinfo via POSIX TZ. Selecting a
/// named zone sets the process-wide TZ variable.
class TimeZone {
public:
    static TimeZone utc() { return TimeZone("UTC", 0); }

    static TimeZone parse(const std::string& spec) {
        if (spec.empty() || spec == "UTC" || spec == "Z" || spec == "utc") return utc();
        if (spec[0] == '+' || spec[0] == '-') {
            auto p = parse_iso8601("1970-01-01T00:00:00" + spec);
            if (!p || !p->offset_seconds) throw ValidationError("bad timezone offset '" + spec + "'");
            return TimeZone(spec, *p->offset_seconds);
        }
        TimeZone tz(spec, std::nullopt);
        std::lock_guard lock(tz_mutex());
        ::setenv("TZ", spec.c_str(), 1);
        ::tzset();
        return tz;
    }

    const std::string& name() const { return name_; }
    bool fixed() const { return fixed_offset_.has_value(); }

    /// Converts a UTC instant to local wall-clock seconds.
    std::int64_t to_local(std::int64_t utc_seconds) const {
        if (fixed_offset_) return utc_seconds + *fixed_offset_;
        std::lock_guard lock(tz_mutex());
        std::time_t t = static_cast<std::time_t>(utc_seconds);
        std::tm tm{};
        if (!::localtime_r(&t, &tm)) throw RuntimeFailure("localtime_r failed");
        return utc_seconds + tm.tm_gmtoff;
    }

    /// Local reading of a timestamp: naive timestamps are already local;
    /// offset-qualified ones are converted through UTC.
    LocalTime localize(const ParsedTimestamp& ts) const {
        if (!ts.offset_seconds) return LocalTime{ts.wall_seconds};
        return LocalTime{to_local(ts.wall_seconds - *ts.offset_seconds)};
    }

private:
    TimeZone(std::string name, std::optional<int> offset) : name_(std::move(name)), fixed_offset_(offset) {}

    static std::mutex& tz_mutex() {
        static std::mutex m;
        return m;
    }

    std::string name_;
    std::optional<int> fixed_offset_;
};

inline LocalTime parse_local(std::string_view text, const TimeZone& tz) {
    auto p = parse_iso8601(text);
    if (!p) throw ValidationError("bad timestamp '" + std::string(text) + "'");
    return tz.localize(*p);
}

/// 24 * weekday_index + hour with Monday = 0, in local time.
inline int hour_of_week(LocalTime t) {
    std::int64_t days = detail::floor_div(t.seconds, 86400);
    std::int64_t secs = t.seconds - days * 86400;
    // 1970-01-01 was a Thursday (ISO index 3).
    int weekday = static_cast<int>(((days % 7) + 7 + 3) % 7);
    return weekday * 24 + static_cast<int>(secs / 3600);
}

inline int hour_of_week(std::string_view ts, const TimeZone& tz) { return hour_of_week(parse_local(ts, tz)); }

inline bool is_weekend_hour(int t) { return t >= 5 * 24; }

inline int year_of(LocalTime t) {
    using namespace std::chrono;
    sys_days d{days{detail::floor_div(t.seconds, 86400)}};
    return static_cast<int>(year_month_day{d}.year());
}

/// `YYYY-MM-DDTHH:MM:SS` (naive local).
inline std::string format_local(LocalTime t) {
    using namespace std::chrono;
    std::int64_t days_since = detail::floor_div(t.seconds, 86400);
    std::int64_t secs = t.seconds - days_since * 86400;
    year_month_day ymd{sys_days{days{days_since}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
                  static_cast<int>((secs % 3600) / 60), static_cast<int>(secs % 60));
    return buf;
}

}  // namespace crimeflow
