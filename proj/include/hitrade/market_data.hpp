#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitrade {

// Minute-precision UTC instant.
using Timestamp = std::chrono::sys_time<std::chrono::minutes>;
using Date = std::chrono::sys_days;

Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
Date parse_date(std::string_view text);
std::string format_date(Date d);
Date date_of(Timestamp t);

enum class Timeframe : std::uint8_t { OneMinute = 0, TenMinute = 1, OneHour = 2 };

inline constexpr std::array<Timeframe, 3> kTimeframes{Timeframe::OneMinute, Timeframe::TenMinute,
                                                      Timeframe::OneHour};

constexpr int minutes_in(Timeframe tf) {
    switch (tf) {
    case Timeframe::OneMinute: return 1;
    case Timeframe::TenMinute: return 10;
    case Timeframe::OneHour: return 60;
    }
    return 1;
}

constexpr std::size_t index_of(Timeframe tf) { return static_cast<std::size_t>(tf); }

static_assert(minutes_in(Timeframe::OneHour) % minutes_in(Timeframe::TenMinute) == 0);
static_assert(minutes_in(Timeframe::OneHour) % minutes_in(Timeframe::OneMinute) == 0);

// "1m", "10m", "1h".
std::string_view label(Timeframe tf);
Timeframe parse_timeframe(std::string_view text);

struct Bar {
    Timestamp timestamp;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    std::int64_t volume = 0;

    bool operator==(const Bar&) const = default;
};

// Positive prices, low <= open/close <= high, non-negative volume.
bool is_valid(const Bar& bar);

struct SessionHours {
    Date date;
    Timestamp open_time;
    Timestamp close_time; // exclusive: the last 1-minute bar starts at close_time - 1min

    bool operator==(const SessionHours&) const = default;
};

// Trading days with their regular-hours window, all in UTC.
class SessionCalendar {
public:
    SessionCalendar() = default;
    explicit SessionCalendar(std::vector<SessionHours> days);

    // Every Monday-Friday in [first, last] with the same UTC open and session length.
    static SessionCalendar weekdays(Date first, Date last, std::chrono::minutes open_utc,
                                    std::chrono::minutes session_length);

    // Lines of `date,open,close` (YYYY-MM-DD,HH:MM,HH:MM in UTC); '#' starts a comment.
    static SessionCalendar load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const SessionHours* find(Date date) const;
    std::span<const SessionHours> days() const { return days_; }

private:
    std::vector<SessionHours> days_;
};

struct Session {
    SessionHours hours;
    std::vector<Bar> bars; // 1-minute bars, strictly increasing, inside [open_time, close_time)

    bool operator==(const Session&) const = default;
};

struct IngestResult {
    std::vector<Session> sessions;
    std::size_t dropped_rows = 0; // rows outside any session window
};

// CSV with header timestamp,open,high,low,close,volume. Throws DataError naming the
// offending row for malformed input; an empty file raises a distinct message.
IngestResult ingest_csv(const std::filesystem::path& path, const SessionCalendar& calendar);
IngestResult parse_csv(std::istream& in, const SessionCalendar& calendar, std::string_view source_name);

// Writes the canonical CSV; doubles use shortest round-trip formatting.
void write_csv(std::ostream& out, std::span<const Session> sessions);
void write_csv(const std::filesystem::path& path, std::span<const Session> sessions);

// Aggregates consecutive bars into windows of `tf` anchored at `anchor`. The output
// bar keeps the timestamp of its first constituent; a trailing partial window emits
// a bar from whatever bars it holds.
std::vector<Bar> resample(std::span<const Bar> bars, Timestamp anchor, Timeframe tf);
std::vector<Bar> resample(const Session& session, Timeframe tf);

enum class Regime : std::uint8_t { Low = 0, High = 1 };

struct RegimeParams {
    double drift = 0.0;      // per-minute log drift
    double volatility = 0.0; // per-minute log volatility
};

struct SynthConfig {
    RegimeParams low{0.0, 0.0005};
    RegimeParams high{0.0, 0.002};
    // transition[from][to] applied once per session
    std::array<std::array<double, 2>, 2> transition{{{0.9, 0.1}, {0.2, 0.8}}};
    double initial_price = 100.0;
    double base_volume = 10000.0;
    Date start_date = Date{std::chrono::year{2024} / 1 / 2};
    std::chrono::minutes open_utc{14 * 60 + 30};
    std::chrono::minutes session_length{390};
};

struct SyntheticMarket {
    std::vector<Session> sessions;
    std::vector<Regime> session_regimes;
    std::vector<Regime> bar_regimes; // one label per 1-minute bar, sessions concatenated
};

// Regime-switching geometric random walk over consecutive weekdays.
// Throws ConfigError if a transition row is not a probability distribution.
SyntheticMarket synthesize(const SynthConfig& config, std::uint64_t seed, std::size_t days);

// Sessions whose date lies in [first, last].
std::vector<Session> sessions_between(std::span<const Session> sessions, Date first, Date last);

} // namespace hitrade
