#include "fixtures.hpp"

#include "hitrade/error.hpp"
#include "hitrade/market_data.hpp"
#include "hitrade/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace hitrade;
using fixtures::at;

namespace {

SessionCalendar nyse_days(std::initializer_list<const char*> dates) {
    std::vector<SessionHours> days;
    for (const char* d : dates) {
        Date date = parse_date(d);
        Timestamp open = Timestamp{date.time_since_epoch()} + std::chrono::minutes{14 * 60 + 30};
        days.push_back({date, open, open + std::chrono::minutes{390}});
    }
    return SessionCalendar(days);
}

std::string csv_for(const std::vector<Session>& sessions) {
    std::ostringstream out;
    write_csv(out, sessions);
    return out.str();
}

IngestResult parse_text(const std::string& text, const SessionCalendar& cal) {
    std::istringstream in(text);
    return parse_csv(in, cal, "fixture.csv");
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

std::int64_t total_volume(std::span<const Bar> bars) {
    return std::accumulate(bars.begin(), bars.end(), std::int64_t{0},
                           [](std::int64_t acc, const Bar& b) { return acc + b.volume; });
}

Session lcg_session(std::uint64_t seed, std::size_t minutes) {
    Session s;
    s.hours.date = parse_date("2024-01-02");
    s.hours.open_time = at("2024-01-02T14:30:00Z");
    s.hours.close_time = s.hours.open_time + std::chrono::minutes{static_cast<int>(minutes)};
    s.bars = fixtures::lcg_bars(seed, minutes, s.hours.open_time);
    return s;
}

} // namespace

TEST(Timestamps, AcceptsCommonIsoForms) {
    const Timestamp t = at("2024-03-05T14:31:00Z");
    EXPECT_EQ(parse_timestamp("2024-03-05 14:31"), t);
    EXPECT_EQ(parse_timestamp("2024-03-05T14:31+00:00"), t);
    EXPECT_EQ(parse_timestamp("2024-03-05T14:31:00"), t);
    EXPECT_EQ(format_timestamp(t), "2024-03-05T14:31:00Z");
    EXPECT_EQ(format_date(date_of(t)), "2024-03-05");
}

TEST(Timestamps, RejectsNonUtcAndSeconds) {
    EXPECT_THROW(parse_timestamp("2024-03-05T14:31:00-05:00"), DataError);
    EXPECT_THROW(parse_timestamp("2024-03-05T14:31:30Z"), DataError);
    EXPECT_THROW(parse_timestamp("2024-02-30T14:31:00Z"), DataError);
}

TEST(Timeframes, MinuteLengthsAndLabels) {
    EXPECT_EQ(minutes_in(Timeframe::OneMinute), 1);
    EXPECT_EQ(minutes_in(Timeframe::TenMinute), 10);
    EXPECT_EQ(minutes_in(Timeframe::OneHour), 60);
    for (Timeframe tf : kTimeframes) EXPECT_EQ(parse_timeframe(label(tf)), tf);
    EXPECT_THROW(parse_timeframe("5m"), ConfigError);
}

TEST(Ingest, FullSessionBecomesOneSession) {
    auto cal = nyse_days({"2024-01-02"});
    auto sessions = fixtures::flat_sessions(1);
    auto result = parse_text(csv_for(sessions), cal);
    ASSERT_EQ(result.sessions.size(), 1u);
    EXPECT_EQ(result.sessions[0].bars.size(), 390u);
    EXPECT_EQ(result.dropped_rows, 0u);
}

TEST(Ingest, HighBelowLowNamesTheRow) {
    auto cal = nyse_days({"2024-01-02"});
    std::string text =
        "timestamp,open,high,low,close,volume\n"
        "2024-01-02T14:30:00Z,100,101,99,100.5,10\n"
        "2024-01-02T14:31:00Z,100,99,101,100,10\n";
    std::string msg = error_of([&] { parse_text(text, cal); });
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
}

TEST(Ingest, NonNumericPriceNamesTheRow) {
    auto cal = nyse_days({"2024-01-02"});
    std::string text =
        "timestamp,open,high,low,close,volume\n"
        "2024-01-02T14:30:00Z,abc,101,99,100.5,10\n";
    std::string msg = error_of([&] { parse_text(text, cal); });
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("non-numeric"), std::string::npos) << msg;
}

TEST(Ingest, EmptyFileHasItsOwnError) {
    auto cal = nyse_days({"2024-01-02"});
    EXPECT_NE(error_of([&] { parse_text("", cal); }).find("empty file"), std::string::npos);
    EXPECT_NE(error_of([&] { parse_text("timestamp,open,high,low,close,volume\n", cal); }).find("no data rows"),
              std::string::npos);
}

TEST(Ingest, DuplicateTimestampIsRejected) {
    auto cal = nyse_days({"2024-01-02"});
    std::string text =
        "timestamp,open,high,low,close,volume\n"
        "2024-01-02T14:30:00Z,100,101,99,100,10\n"
        "2024-01-02T14:30:00Z,100,101,99,100,10\n";
    EXPECT_NE(error_of([&] { parse_text(text, cal); }).find("duplicate"), std::string::npos);
}

TEST(Ingest, HolidayGapIsPreservedWithoutFill) {
    // Thursday, then the following Monday; the Friday in between is absent from the file.
    auto cal = nyse_days({"2024-03-28", "2024-03-29", "2024-04-01"});
    std::vector<Session> sessions{
        fixtures::session_from_closes(parse_date("2024-03-28"), std::vector<double>(390, 170.0)),
        fixtures::session_from_closes(parse_date("2024-04-01"), std::vector<double>(200, 171.0))};
    auto result = parse_text(csv_for(sessions), cal);
    ASSERT_EQ(result.sessions.size(), 2u);
    EXPECT_EQ(format_date(result.sessions[0].hours.date), "2024-03-28");
    EXPECT_EQ(format_date(result.sessions[1].hours.date), "2024-04-01");
    EXPECT_EQ(result.sessions[0].bars.size(), 390u);
    EXPECT_EQ(result.sessions[1].bars.size(), 200u);
}

TEST(Ingest, OutOfSessionRowsAreDroppedAndCounted) {
    auto cal = nyse_days({"2024-01-02"});
    std::string text =
        "timestamp,open,high,low,close,volume\n"
        "2024-01-02T14:29:00Z,100,101,99,100,10\n" // pre-market
        "2024-01-02T14:30:00Z,100,101,99,100,10\n"
        "2024-01-02T21:00:00Z,100,101,99,100,10\n" // close is exclusive
        "2024-01-03T14:30:00Z,100,101,99,100,10\n"; // not a calendar day
    auto result = parse_text(text, cal);
    ASSERT_EQ(result.sessions.size(), 1u);
    EXPECT_EQ(result.sessions[0].bars.size(), 1u);
    EXPECT_EQ(result.dropped_rows, 3u);
}

TEST(Ingest, UnsortedRowsComeBackSorted) {
    auto cal = nyse_days({"2024-01-02", "2024-01-03"});
    std::string text =
        "timestamp,open,high,low,close,volume\n"
        "2024-01-03T14:31:00Z,100,101,99,100,10\n"
        "2024-01-02T14:30:00Z,100,101,99,100,10\n"
        "2024-01-03T14:30:00Z,100,101,99,100,10\n";
    auto result = parse_text(text, cal);
    ASSERT_EQ(result.sessions.size(), 2u);
    EXPECT_EQ(result.sessions[1].bars[0].timestamp, at("2024-01-03T14:30:00Z"));
    EXPECT_EQ(result.sessions[1].bars[1].timestamp, at("2024-01-03T14:31:00Z"));
}

TEST(Ingest, SerializeRoundTripIsBitIdentical) {
    auto market = synthesize(SynthConfig{}, 3, 4);
    std::vector<SessionHours> hours;
    for (const Session& s : market.sessions) hours.push_back(s.hours);
    SessionCalendar cal(hours);
    const std::string first = csv_for(market.sessions);
    auto result = parse_text(first, cal);
    EXPECT_EQ(result.sessions, market.sessions);
    EXPECT_EQ(csv_for(result.sessions), first);
}

TEST(Calendar, SaveLoadRoundTrip) {
    fixtures::TempDir dir("calendar");
    auto cal = SessionCalendar::weekdays(parse_date("2024-01-01"), parse_date("2024-01-14"),
                                         std::chrono::minutes{14 * 60 + 30}, std::chrono::minutes{390});
    EXPECT_EQ(cal.days().size(), 10u);
    cal.save(dir / "cal.csv");
    auto loaded = SessionCalendar::load(dir / "cal.csv");
    ASSERT_EQ(loaded.days().size(), cal.days().size());
    for (std::size_t i = 0; i < cal.days().size(); ++i) EXPECT_EQ(loaded.days()[i], cal.days()[i]);
}

TEST(Resample, TenMinuteBarsOfAFullSession) {
    Session s = lcg_session(1, 390);
    auto bars = resample(s, Timeframe::TenMinute);
    ASSERT_EQ(bars.size(), 39u);
    for (std::size_t k = 0; k < bars.size(); ++k) {
        std::span<const Bar> part(s.bars.data() + 10 * k, 10);
        EXPECT_EQ(bars[k].volume, total_volume(part));
        EXPECT_EQ(bars[k].timestamp, part.front().timestamp);
        EXPECT_EQ(bars[k].open, part.front().open);
        EXPECT_EQ(bars[k].close, part.back().close);
        double hi = part.front().high;
        double lo = part.front().low;
        for (const Bar& b : part) {
            hi = std::max(hi, b.high);
            lo = std::min(lo, b.low);
        }
        EXPECT_EQ(bars[k].high, hi);
        EXPECT_EQ(bars[k].low, lo);
    }
}

TEST(Resample, HourBarsIncludeTrailingPartialWindow) {
    Session s = lcg_session(2, 390);
    auto bars = resample(s, Timeframe::OneHour);
    ASSERT_EQ(bars.size(), 7u);
    EXPECT_EQ(bars[6].timestamp, s.bars[360].timestamp);
    EXPECT_EQ(bars[6].close, s.bars[389].close);
    EXPECT_EQ(bars[6].volume, total_volume(std::span<const Bar>(s.bars.data() + 360, 30)));
}

TEST(Resample, SingleBarIsUnchanged) {
    Session s = lcg_session(3, 1);
    auto bars = resample(s, Timeframe::OneHour);
    ASSERT_EQ(bars.size(), 1u);
    EXPECT_EQ(bars[0], s.bars[0]);
}

TEST(Resample, WindowsAnchorAtSessionOpenAcrossGaps) {
    Session s = lcg_session(4, 30);
    s.bars.erase(s.bars.begin() + 3, s.bars.begin() + 14); // minutes 3..13 missing
    auto bars = resample(s, Timeframe::TenMinute);
    ASSERT_EQ(bars.size(), 3u);
    EXPECT_EQ(bars[0].timestamp, at("2024-01-02T14:30:00Z"));
    EXPECT_EQ(bars[1].timestamp, at("2024-01-02T14:44:00Z")); // first bar present in [14:40, 14:50)
    EXPECT_EQ(bars[2].timestamp, at("2024-01-02T14:50:00Z"));
}

TEST(ResampleProperty, VolumeConservedForEveryTimeframe) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Session s = lcg_session(100 + static_cast<std::uint64_t>(trial), 1 + rng.below(400));
        for (Timeframe tf : kTimeframes) EXPECT_EQ(total_volume(resample(s, tf)), total_volume(s.bars));
    }
}

TEST(ResampleProperty, TenMinuteThenHourEqualsDirectHour) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Session s = lcg_session(seed, 60 * (1 + seed % 7));
        auto ten = resample(s, Timeframe::TenMinute);
        auto via = resample(std::span<const Bar>(ten), s.hours.open_time, Timeframe::OneHour);
        EXPECT_EQ(via, resample(s, Timeframe::OneHour));
    }
}

TEST(Synthesize, ZeroVolatilityStaysAtInitialPrice) {
    SynthConfig cfg;
    cfg.low = {0.0, 0.0};
    cfg.high = {0.0, 0.0};
    auto market = synthesize(cfg, 5, 3);
    for (const Session& s : market.sessions)
        for (const Bar& b : s.bars) {
            EXPECT_EQ(b.open, cfg.initial_price);
            EXPECT_EQ(b.high, cfg.initial_price);
            EXPECT_EQ(b.low, cfg.initial_price);
            EXPECT_EQ(b.close, cfg.initial_price);
        }
}

TEST(Synthesize, SameSeedIsIdentical) {
    auto a = synthesize(SynthConfig{}, 7, 5);
    auto b = synthesize(SynthConfig{}, 7, 5);
    EXPECT_EQ(a.sessions, b.sessions);
    EXPECT_EQ(a.bar_regimes, b.bar_regimes);
    auto c = synthesize(SynthConfig{}, 8, 5);
    EXPECT_NE(a.sessions, c.sessions);
}

TEST(Synthesize, BarsAreValidAndOnWeekdays) {
    auto market = synthesize(SynthConfig{}, 9, 12);
    ASSERT_EQ(market.sessions.size(), 12u);
    std::size_t total = 0;
    for (const Session& s : market.sessions) {
        unsigned wd = std::chrono::weekday{s.hours.date}.c_encoding();
        EXPECT_TRUE(wd != 0 && wd != 6);
        ASSERT_EQ(s.bars.size(), 390u);
        for (std::size_t i = 0; i < s.bars.size(); ++i) {
            EXPECT_TRUE(is_valid(s.bars[i]));
            if (i > 0) {
                EXPECT_EQ(s.bars[i].open, s.bars[i - 1].close);
            }
        }
        total += s.bars.size();
    }
    EXPECT_EQ(market.bar_regimes.size(), total);
}

TEST(Synthesize, NonStochasticTransitionIsRejected) {
    SynthConfig cfg;
    cfg.transition = {{{0.9, 0.2}, {0.2, 0.8}}};
    EXPECT_THROW(synthesize(cfg, 1, 2), ConfigError);
    cfg.transition = {{{1.1, -0.1}, {0.2, 0.8}}};
    EXPECT_THROW(synthesize(cfg, 1, 2), ConfigError);
}

TEST(Synthesize, HighRegimeDaysAreMoreVolatile) {
    SynthConfig cfg;
    cfg.low = {0.0, 0.0005};
    cfg.high = {0.0, 0.002};
    auto market = synthesize(cfg, 21, 250);
    std::vector<double> low_days;
    std::vector<double> high_days;
    for (std::size_t d = 0; d < market.sessions.size(); ++d) {
        const auto& bars = market.sessions[d].bars;
        std::vector<double> r;
        for (std::size_t i = 1; i < bars.size(); ++i) r.push_back(std::log(bars[i].close / bars[i - 1].close));
        double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
        double var = 0.0;
        for (double x : r) var += (x - mean) * (x - mean);
        double vol = std::sqrt(var / static_cast<double>(r.size() - 1));
        (market.session_regimes[d] == Regime::High ? high_days : low_days).push_back(vol);
    }
    ASSERT_FALSE(low_days.empty());
    ASSERT_FALSE(high_days.empty());
    std::size_t wins = 0;
    for (double h : high_days)
        for (double l : low_days) wins += h > l ? 1 : 0;
    EXPECT_GE(static_cast<double>(wins), 0.95 * static_cast<double>(high_days.size() * low_days.size()));
}

TEST(Synthesize, SessionsBetweenIsInclusive) {
    auto market = synthesize(SynthConfig{}, 1, 10);
    auto picked = sessions_between(market.sessions, market.sessions[2].hours.date, market.sessions[4].hours.date);
    ASSERT_EQ(picked.size(), 3u);
    EXPECT_EQ(picked.front(), market.sessions[2]);
}
