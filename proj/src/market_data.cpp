#include "hitrade/market_data.hpp"

#include "hitrade/error.hpp"
#include "hitrade/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace hitrade {

namespace {

using namespace std::chrono;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_volume(std::string_view s, std::int64_t& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc{} && ptr == s.data() + s.size()) return true;
    double d = 0.0;
    if (!parse_double(s, d) || d != std::floor(d) || std::abs(d) > 9.0e18) return false;
    out = static_cast<std::int64_t>(d);
    return true;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::string to_shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

minutes parse_clock(std::string_view text) {
    text = trim(text);
    int h = 0;
    int m = 0;
    if (text.size() != 5 || text[2] != ':' || !parse_int(text.substr(0, 2), h) || !parse_int(text.substr(3, 2), m) ||
        h < 0 || h > 24 || m < 0 || m > 59)
        throw DataError(fmt::format("invalid clock time '{}'", text));
    return hours{h} + minutes{m};
}

} // namespace

Date parse_date(std::string_view text) {
    text = trim(text);
    int y = 0;
    int mo = 0;
    int d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_int(text.substr(0, 4), y) ||
        !parse_int(text.substr(5, 2), mo) || !parse_int(text.substr(8, 2), d))
        throw DataError(fmt::format("invalid date '{}'", text));
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw DataError(fmt::format("invalid date '{}'", text));
    return sys_days{ymd};
}

std::string format_date(Date d) {
    year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

Date date_of(Timestamp t) { return floor<days>(t); }

Timestamp parse_timestamp(std::string_view text) {
    text = trim(text);
    if (text.size() < 16 || (text[10] != 'T' && text[10] != ' '))
        throw DataError(fmt::format("invalid timestamp '{}'", text));
    Date d = parse_date(text.substr(0, 10));
    int h = 0;
    int m = 0;
    if (text[13] != ':' || !parse_int(text.substr(11, 2), h) || !parse_int(text.substr(14, 2), m) || h > 23 ||
        m > 59)
        throw DataError(fmt::format("invalid timestamp '{}'", text));
    std::string_view rest = text.substr(16);
    if (rest.size() >= 3 && rest[0] == ':') {
        int s = 0;
        if (!parse_int(rest.substr(1, 2), s) || s != 0)
            throw DataError(fmt::format("timestamp '{}' is not minute-aligned", text));
        rest.remove_prefix(3);
    }
    if (!(rest.empty() || rest == "Z" || rest == "+00:00"))
        throw DataError(fmt::format("timestamp '{}' must be UTC", text));
    return Timestamp{d.time_since_epoch()} + hours{h} + minutes{m};
}

std::string format_timestamp(Timestamp t) {
    Date d = date_of(t);
    auto tod = t - Timestamp{d.time_since_epoch()};
    return fmt::format("{}T{:02d}:{:02d}:00Z", format_date(d), tod.count() / 60, tod.count() % 60);
}

std::string_view label(Timeframe tf) {
    switch (tf) {
    case Timeframe::OneMinute: return "1m";
    case Timeframe::TenMinute: return "10m";
    case Timeframe::OneHour: return "1h";
    }
    return "?";
}

Timeframe parse_timeframe(std::string_view text) {
    for (Timeframe tf : kTimeframes)
        if (label(tf) == text) return tf;
    throw ConfigError(fmt::format("unknown timeframe '{}' (expected 1m, 10m or 1h)", text));
}

bool is_valid(const Bar& b) {
    if (!(std::isfinite(b.open) && std::isfinite(b.high) && std::isfinite(b.low) && std::isfinite(b.close)))
        return false;
    if (b.open <= 0.0 || b.high <= 0.0 || b.low <= 0.0 || b.close <= 0.0) return false;
    if (b.volume < 0) return false;
    return b.low <= b.open && b.open <= b.high && b.low <= b.close && b.close <= b.high;
}

SessionCalendar::SessionCalendar(std::vector<SessionHours> days) : days_(std::move(days)) {
    std::sort(days_.begin(), days_.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    for (std::size_t i = 0; i < days_.size(); ++i) {
        if (days_[i].close_time <= days_[i].open_time)
            throw DataError(fmt::format("calendar day {} closes before it opens", format_date(days_[i].date)));
        if (i > 0 && days_[i].date == days_[i - 1].date)
            throw DataError(fmt::format("calendar lists {} twice", format_date(days_[i].date)));
    }
}

SessionCalendar SessionCalendar::weekdays(Date first, Date last, minutes open_utc, minutes session_length) {
    std::vector<SessionHours> out;
    for (Date d = first; d <= last; d += std::chrono::days{1}) {
        unsigned wd = weekday{d}.c_encoding();
        if (wd == 0 || wd == 6) continue;
        Timestamp open = Timestamp{d.time_since_epoch()} + open_utc;
        out.push_back({d, open, open + session_length});
    }
    return SessionCalendar(std::move(out));
}

SessionCalendar SessionCalendar::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open calendar '{}'", path.string()));
    std::vector<SessionHours> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (view.empty() || view.front() == '#' || view.starts_with("date")) continue;
        auto cols = split(view, ',');
        if (cols.size() != 3)
            throw DataError(fmt::format("{}: line {}: expected date,open,close", path.string(), line_no));
        try {
            Date d = parse_date(cols[0]);
            Timestamp base{d.time_since_epoch()};
            out.push_back({d, base + parse_clock(cols[1]), base + parse_clock(cols[2])});
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}: line {}: {}", path.string(), line_no, e.what()));
        }
    }
    return SessionCalendar(std::move(out));
}

void SessionCalendar::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError(fmt::format("cannot write calendar '{}'", path.string()));
    out << "date,open,close\n";
    for (const auto& day : days_) {
        Timestamp base{day.date.time_since_epoch()};
        auto open = (day.open_time - base).count();
        auto close = (day.close_time - base).count();
        out << fmt::format("{},{:02d}:{:02d},{:02d}:{:02d}\n", format_date(day.date), open / 60, open % 60,
                           close / 60, close % 60);
    }
}

const SessionHours* SessionCalendar::find(Date date) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), date,
                               [](const SessionHours& h, Date d) { return h.date < d; });
    if (it == days_.end() || it->date != date) return nullptr;
    return &*it;
}

IngestResult parse_csv(std::istream& in, const SessionCalendar& calendar, std::string_view source_name) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty file", source_name));
    auto header = split(trim(line), ',');
    static constexpr std::array<std::string_view, 6> kColumns{"timestamp", "open", "high", "low", "close", "volume"};
    if (header.size() != kColumns.size() || !std::equal(header.begin(), header.end(), kColumns.begin()))
        throw DataError(fmt::format("{}: header must be timestamp,open,high,low,close,volume", source_name));

    struct Row {
        Bar bar;
        std::size_t line_no;
    };
    std::vector<std::vector<Row>> by_day(calendar.days().size());
    IngestResult result;
    std::size_t line_no = 1;
    std::size_t data_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        ++data_rows;
        auto cols = split(view, ',');
        auto fail = [&](std::string_view why) {
            throw DataError(fmt::format("{}: row {}: {}", source_name, line_no, why));
        };
        if (cols.size() != 6) fail("expected 6 columns");
        Bar bar;
        try {
            bar.timestamp = parse_timestamp(cols[0]);
        } catch (const DataError& e) {
            fail(e.what());
        }
        if (!parse_double(cols[1], bar.open) || !parse_double(cols[2], bar.high) || !parse_double(cols[3], bar.low) ||
            !parse_double(cols[4], bar.close))
            fail("non-numeric price");
        if (!parse_volume(cols[5], bar.volume)) fail("non-integer volume");
        if (!is_valid(bar)) fail("OHLC invariant violated (need 0 < low <= open,close <= high, volume >= 0)");

        const SessionHours* hours = calendar.find(date_of(bar.timestamp));
        if (hours == nullptr || bar.timestamp < hours->open_time || bar.timestamp >= hours->close_time) {
            ++result.dropped_rows;
            continue;
        }
        by_day[static_cast<std::size_t>(hours - calendar.days().data())].push_back({bar, line_no});
    }
    if (data_rows == 0) throw DataError(fmt::format("{}: no data rows", source_name));

    for (std::size_t i = 0; i < by_day.size(); ++i) {
        auto& rows = by_day[i];
        if (rows.empty()) continue;
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.bar.timestamp < b.bar.timestamp; });
        Session session{calendar.days()[i], {}};
        session.bars.reserve(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (k > 0 && rows[k].bar.timestamp == rows[k - 1].bar.timestamp)
                throw DataError(fmt::format("{}: row {}: duplicate timestamp {}", source_name,
                                            std::max(rows[k].line_no, rows[k - 1].line_no),
                                            format_timestamp(rows[k].bar.timestamp)));
            session.bars.push_back(rows[k].bar);
        }
        result.sessions.push_back(std::move(session));
    }
    return result;
}

IngestResult ingest_csv(const std::filesystem::path& path, const SessionCalendar& calendar) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    return parse_csv(in, calendar, path.string());
}

void write_csv(std::ostream& out, std::span<const Session> sessions) {
    out << "timestamp,open,high,low,close,volume\n";
    for (const auto& session : sessions)
        for (const auto& b : session.bars)
            out << format_timestamp(b.timestamp) << ',' << to_shortest(b.open) << ',' << to_shortest(b.high) << ','
                << to_shortest(b.low) << ',' << to_shortest(b.close) << ',' << b.volume << '\n';
}

void write_csv(const std::filesystem::path& path, std::span<const Session> sessions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    write_csv(out, sessions);
}

std::vector<Bar> resample(std::span<const Bar> bars, Timestamp anchor, Timeframe tf) {
    std::vector<Bar> out;
    const auto width = minutes{minutes_in(tf)};
    long long current_window = -1;
    for (const Bar& b : bars) {
        long long window = (b.timestamp - anchor) / width;
        if (out.empty() || window != current_window) {
            out.push_back(b);
            current_window = window;
            continue;
        }
        Bar& agg = out.back();
        agg.high = std::max(agg.high, b.high);
        agg.low = std::min(agg.low, b.low);
        agg.close = b.close;
        agg.volume += b.volume;
    }
    return out;
}

std::vector<Bar> resample(const Session& session, Timeframe tf) {
    return resample(session.bars, session.hours.open_time, tf);
}

SyntheticMarket synthesize(const SynthConfig& config, std::uint64_t seed, std::size_t days_count) {
    for (std::size_t r = 0; r < 2; ++r) {
        const auto& row = config.transition[r];
        if (row[0] < 0.0 || row[1] < 0.0 || std::abs(row[0] + row[1] - 1.0) > 1e-9)
            throw ConfigError(fmt::format("transition row {} must be non-negative and sum to 1", r));
    }
    if (!(config.initial_price > 0.0)) throw ConfigError("initial_price must be positive");
    if (config.session_length.count() <= 0) throw ConfigError("session_length must be positive");

    Rng rng(seed);
    SyntheticMarket market;
    double price = config.initial_price;

    double p_high = config.transition[0][1] + config.transition[1][0] > 0.0
                        ? config.transition[0][1] / (config.transition[0][1] + config.transition[1][0])
                        : 0.0;
    Regime regime = rng.uniform() < p_high ? Regime::High : Regime::Low;

    Date date = config.start_date;
    while (market.sessions.size() < days_count) {
        unsigned wd = weekday{date}.c_encoding();
        if (wd == 0 || wd == 6) {
            date += days{1};
            continue;
        }
        if (!market.sessions.empty()) {
            const auto& row = config.transition[static_cast<std::size_t>(regime)];
            regime = rng.uniform() < row[0] ? Regime::Low : Regime::High;
        }
        const RegimeParams& params = regime == Regime::Low ? config.low : config.high;
        const double sigma = params.volatility;
        const double volume_scale = regime == Regime::High ? 1.5 : 1.0;

        Timestamp open = Timestamp{date.time_since_epoch()} + config.open_utc;
        Session session{{date, open, open + config.session_length}, {}};
        session.bars.reserve(static_cast<std::size_t>(config.session_length.count()));
        for (long long m = 0; m < config.session_length.count(); ++m) {
            double z = rng.normal();
            double wick_up = std::abs(rng.normal());
            double wick_down = std::abs(rng.normal());
            double volume_noise = rng.normal();

            Bar bar;
            bar.timestamp = open + minutes{m};
            bar.open = price;
            bar.close = price * std::exp(params.drift - 0.5 * sigma * sigma + sigma * z);
            bar.high = std::max(bar.open, bar.close) * std::exp(0.5 * sigma * wick_up);
            bar.low = std::min(bar.open, bar.close) * std::exp(-0.5 * sigma * wick_down);
            bar.volume = static_cast<std::int64_t>(
                std::llround(config.base_volume * volume_scale * std::exp(0.25 * volume_noise)));
            price = bar.close;
            session.bars.push_back(bar);
            market.bar_regimes.push_back(regime);
        }
        market.session_regimes.push_back(regime);
        market.sessions.push_back(std::move(session));
        date += days{1};
    }
    return market;
}

std::vector<Session> sessions_between(std::span<const Session> sessions, Date first, Date last) {
    std::vector<Session> out;
    for (const auto& s : sessions)
        if (s.hours.date >= first && s.hours.date <= last) out.push_back(s);
    return out;
}

} // namespace hitrade
