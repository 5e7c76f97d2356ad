#pragma once

#include "hitrade/environment.hpp"
#include "hitrade/indicators.hpp"
#include "hitrade/market_data.hpp"
#include "hitrade/portfolio.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace hitrade {

inline constexpr std::size_t kFeaturesPerBar = 8;
inline constexpr std::size_t kMarketFeaturesPerBar = 5;

// Bars of one timeframe over a run of sessions, with the indicator features and
// the bookkeeping needed to line them up against the 1-minute base series.
struct TimeframeSeries {
    Timeframe timeframe = Timeframe::OneMinute;
    std::vector<Bar> bars;
    std::vector<std::size_t> session;       // owning session index
    std::vector<std::uint8_t> session_final; // 1 on the last bar of each session
    std::vector<std::size_t> last_base;     // index of the bar's final 1-minute bar
    std::vector<std::optional<MarketFeatures>> features;

    static TimeframeSeries build(std::span<const Session> sessions, Timeframe tf);

    std::size_t size() const { return bars.size(); }
};

// Smallest index at which `window` consecutive feature rows exist.
constexpr std::size_t first_observable_index(std::size_t window) {
    return static_cast<std::size_t>(indicators::kFeatureWarmup) - 2 + window;
}

// The session data with all three timeframe views built once and shared.
struct MarketSeries {
    std::vector<Session> sessions;
    std::array<TimeframeSeries, 3> by_timeframe;
    std::vector<std::size_t> session_first_base; // first 1-minute index of each session

    static std::shared_ptr<const MarketSeries> build(std::vector<Session> sessions);

    const TimeframeSeries& base() const { return by_timeframe[0]; }
    const TimeframeSeries& at(Timeframe tf) const { return by_timeframe[index_of(tf)]; }
};

// Market features scaled to comparable ranges: RSI/100, MACD histogram over the
// bar's close, CCI/200, %B raw, volume z-scored over the window.
void append_market_rows(const TimeframeSeries& series, std::size_t end, std::size_t window,
                        std::vector<double>& out);

// Observation rows for bars [end - window + 1, end]: five market features followed
// by the three portfolio features of the matching entry of `portfolio_rows`.
void build_observation(const TimeframeSeries& series, std::size_t end, std::size_t window,
                       std::span<const PortfolioFeatures> portfolio_rows, std::vector<double>& out);

struct EnvConfig {
    Timeframe timeframe = Timeframe::OneMinute;
    std::size_t window_size = 240;
    double initial_cash = 10000.0;
    double fee_per_sell_share = 0.0;

    static EnvConfig defaults(Timeframe tf);
    std::size_t observation_size() const { return window_size * kFeaturesPerBar; }
};

enum class Action : std::uint8_t { Buy = 0, Sell = 1, Hold = 2 };
inline constexpr std::size_t kActionCount = 3;

std::string_view label(Action a);

// tanh(5 * (sell - avg_buy) / avg_buy), bounded in [-1, 1].
double agent_reward(const TradeRecord& trade);

struct StepInfo {
    double portfolio_value = 0.0;
    std::vector<TradeRecord> trades;
};

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

// Trades one timeframe's bars. Fills happen at the decision bar's close; reaching
// the last bar of a session liquidates the position and buys are suppressed there.
class TradingEnv : public Environment {
public:
    TradingEnv(std::shared_ptr<const TimeframeSeries> series, EnvConfig config);
    TradingEnv(std::shared_ptr<const TimeframeSeries> series, EnvConfig config, std::size_t first_cursor,
               std::size_t last_index);

    std::size_t min_cursor() const { return first_observable_index(config_.window_size); }

    std::vector<double> reset(std::size_t cursor);
    std::vector<double> reset() override { return reset(first_cursor_); }
    StepResult step(Action action);
    Transition step(std::size_t action) override;

    std::size_t observation_size() const override { return config_.observation_size(); }
    std::size_t action_count() const override { return kActionCount; }

    const EnvConfig& config() const { return config_; }
    const TimeframeSeries& series() const { return *series_; }
    const PortfolioState& portfolio() const { return portfolio_; }
    std::size_t cursor() const { return cursor_; }
    bool done() const { return done_; }
    const std::vector<TradeLogEntry>& trades() const { return trades_; }
    std::vector<double> observation() const;

    // Streams timestamp,action,reward,portfolio_value rows; nullptr disables.
    void set_episode_log(std::ostream* out);

private:
    double liquidate(std::size_t index, StepInfo& info);

    std::shared_ptr<const TimeframeSeries> series_;
    EnvConfig config_;
    std::size_t first_cursor_ = 0;
    std::size_t last_index_ = 0;
    std::size_t cursor_ = 0;
    bool done_ = true;
    PortfolioState portfolio_;
    std::vector<PortfolioFeatures> portfolio_rows_;
    std::vector<TradeLogEntry> trades_;
    std::ostream* episode_log_ = nullptr;
};

} // namespace hitrade
