#pragma once

// Shared helpers for the test binaries: a portable LCG that tests/oracles/generate.py
// mirrors exactly, and small hand-shaped market fixtures.

#include "hitrade/market_data.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fixtures {

using namespace hitrade;

class Lcg {
public:
    explicit Lcg(std::uint64_t seed) : state_(seed) {}
    double next() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(state_ >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

inline Timestamp at(std::string_view text) { return parse_timestamp(text); }

// Random-walk OHLCV bars one minute apart.
inline std::vector<Bar> lcg_bars(std::uint64_t seed, std::size_t n, Timestamp start = at("2024-01-02T14:30:00Z")) {
    Lcg g(seed);
    std::vector<Bar> bars;
    double prev = 100.0;
    for (std::size_t i = 0; i < n; ++i) {
        Bar b;
        b.timestamp = start + std::chrono::minutes{static_cast<int>(i)};
        b.open = prev;
        b.close = b.open + (g.next() - 0.5) * 2.0;
        b.high = std::max(b.open, b.close) + g.next() * 0.5;
        b.low = std::min(b.open, b.close) - g.next() * 0.5;
        b.volume = 1000 + static_cast<std::int64_t>(std::floor(g.next() * 9000.0));
        bars.push_back(b);
        prev = b.close;
    }
    return bars;
}

inline std::vector<double> closes_of(const std::vector<Bar>& bars) {
    std::vector<double> out;
    for (const Bar& b : bars) out.push_back(b.close);
    return out;
}

struct LcgTrajectory {
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<std::uint8_t> dones;
    double bootstrap = 0.0;
};

inline LcgTrajectory lcg_trajectory(std::uint64_t seed, std::size_t n) {
    Lcg g(seed);
    LcgTrajectory t;
    for (std::size_t i = 0; i < n; ++i) {
        t.rewards.push_back(g.next() * 2.0 - 1.0);
        t.values.push_back(g.next() * 4.0 - 2.0);
        t.dones.push_back(g.next() < 0.1 ? 1 : 0);
    }
    t.bootstrap = g.next() * 4.0 - 2.0;
    return t;
}

// Consecutive weekdays starting at `first`.
inline std::vector<Date> weekdays(Date first, std::size_t n) {
    std::vector<Date> out;
    for (Date d = first; out.size() < n; d += std::chrono::days{1}) {
        unsigned wd = std::chrono::weekday{d}.c_encoding();
        if (wd != 0 && wd != 6) out.push_back(d);
    }
    return out;
}

// A session of 1-minute bars opening at 14:30 UTC whose closes are given; each bar
// opens at the previous close and its range spans open and close.
inline Session session_from_closes(Date date, const std::vector<double>& closes, std::int64_t volume = 1000,
                                   std::chrono::minutes length = std::chrono::minutes{390}) {
    Session s;
    s.hours.date = date;
    s.hours.open_time = Timestamp{date.time_since_epoch()} + std::chrono::minutes{14 * 60 + 30};
    s.hours.close_time = s.hours.open_time + length;
    double prev = closes.empty() ? 0.0 : closes.front();
    for (std::size_t i = 0; i < closes.size(); ++i) {
        Bar b;
        b.timestamp = s.hours.open_time + std::chrono::minutes{static_cast<int>(i)};
        b.open = prev;
        b.close = closes[i];
        b.high = std::max(b.open, b.close);
        b.low = std::min(b.open, b.close);
        b.volume = volume;
        s.bars.push_back(b);
        prev = closes[i];
    }
    return s;
}

inline std::vector<Session> flat_sessions(std::size_t days, std::size_t bars_per_session = 390, double price = 100.0) {
    std::vector<Session> out;
    for (Date d : weekdays(parse_date("2024-01-02"), days))
        out.push_back(session_from_closes(d, std::vector<double>(bars_per_session, price), 1000,
                                          std::chrono::minutes{static_cast<int>(bars_per_session)}));
    return out;
}

// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("hitrade_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

} // namespace fixtures
