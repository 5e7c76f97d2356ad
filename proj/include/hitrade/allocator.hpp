#pragma once

#include "hitrade/environment.hpp"
#include "hitrade/network.hpp"
#include "hitrade/portfolio.hpp"
#include "hitrade/trading_env.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace hitrade {

// A frozen time-frame agent and the environment settings it was trained with.
struct AgentSlot {
    PolicyParameters params;
    EnvConfig env;
};

class AgentRegistry {
public:
    // Throws ConfigError if the network does not fit the env observation or has != 3 actions.
    void add(AgentSlot slot);

    bool has(Timeframe tf) const { return slots_[index_of(tf)].has_value(); }
    bool complete() const;
    // Throws EnvError for an unregistered timeframe.
    const AgentSlot& at(Timeframe tf) const;

private:
    std::array<std::optional<AgentSlot>, 3> slots_;
};

// ln(v_current / v_previous); throws EnvError unless both values are positive.
double allocator_reward(double v_current, double v_previous);

struct AllocatorConfig {
    std::size_t market_window = 60;     // 1-minute feature rows in the observation
    std::size_t volatility_window = 30; // 1-minute returns in the rolling volatility
    double initial_cash = 10000.0;
    double fee_per_sell_share = 0.0;

    // window * 5 market values + 3 portfolio + 1 volatility + 3 agent rewards + 3 one-hot
    std::size_t observation_size() const { return market_window * kMarketFeaturesPerBar + 10; }
};

struct AllocationDecision {
    Timestamp timestamp;
    Timeframe chosen = Timeframe::OneMinute;
    bool forced = false;        // session-open override to the 1-minute agent
    std::size_t span_begin = 0; // 1-minute index of the first bar in the span
    std::size_t span_bars = 0;
    double span_log_return = 0.0;

    bool operator==(const AllocationDecision&) const = default;
};

// timestamp,chosen_timeframe,forced_flag,span_bars,span_log_return
void write_allocation_log(std::ostream& out, std::span<const AllocationDecision> decisions);
std::vector<AllocationDecision> read_allocation_log(const std::filesystem::path& path);

struct HierStep {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
    AllocationDecision decision;
};

// The allocator's environment. Each step hands one bar of the chosen timeframe to
// that agent, which acts greedily once at the first bar's close; the shared
// portfolio is then marked at every 1-minute close of the span. Reward is the
// log growth of portfolio value over the span.
class HierarchicalEnv : public Environment {
public:
    // Trades sessions [first_session, end_session); earlier sessions are warmup only.
    HierarchicalEnv(std::shared_ptr<const MarketSeries> market, std::shared_ptr<const AgentRegistry> registry,
                    AllocatorConfig config, std::size_t first_session, std::size_t end_session);

    // First session at or after `from` whose open has enough history for every window.
    static std::optional<std::size_t> first_ready_session(const MarketSeries& market, const AgentRegistry& registry,
                                                          const AllocatorConfig& config, std::size_t from = 0);

    std::size_t observation_size() const override { return config_.observation_size(); }
    std::size_t action_count() const override { return 3; }
    std::vector<double> reset() override;
    Transition step(std::size_t action) override;

    HierStep hier_step(Timeframe choice);

    bool done() const { return done_; }
    const PortfolioState& portfolio() const { return portfolio_; }
    const std::vector<TradeLogEntry>& trades() const { return trades_; }
    const std::vector<AllocationDecision>& decisions() const { return decisions_; }
    EquityCurve equity_curve() const;
    std::size_t start_index() const { return start_; }
    std::size_t end_index() const { return end_; }

private:
    std::ptrdiff_t completed_bar(Timeframe tf, std::size_t base_index) const;
    std::vector<double> agent_observation(Timeframe tf, std::size_t base_index) const;
    std::vector<double> allocator_observation(std::size_t base_index) const;
    void mark_bar(std::size_t base_index);
    void liquidate(std::size_t base_index, Timeframe agent);

    std::shared_ptr<const MarketSeries> market_;
    std::shared_ptr<const AgentRegistry> registry_;
    AllocatorConfig config_;
    std::size_t start_ = 0;
    std::size_t end_ = 0; // last 1-minute index, inclusive
    std::size_t cursor_ = 0;
    bool done_ = true;
    PortfolioState portfolio_;
    PortfolioFeatures initial_features_;
    std::vector<PortfolioFeatures> feature_history_; // state at each close before any action, from start_
    std::vector<double> equity_;                     // value after all events at each close, from start_
    std::vector<TradeLogEntry> trades_;
    std::vector<AllocationDecision> decisions_;
    std::array<double, 3> last_agent_reward_{};
    std::optional<Timeframe> last_active_;
};

struct BacktestReport {
    EquityCurve equity;
    std::vector<TradeLogEntry> trades;
    std::vector<AllocationDecision> decisions; // hierarchy runs only
};

// Greedy allocator over greedy agents across sessions [first_session, end_session).
BacktestReport run_hierarchy(std::shared_ptr<const AgentRegistry> registry, const PolicyParameters& allocator,
                             std::shared_ptr<const MarketSeries> market, std::size_t first_session,
                             std::size_t end_session, const AllocatorConfig& config);

// One greedy time-frame agent trading alone across sessions [first_session, end_session).
BacktestReport run_agent(const AgentSlot& agent, std::shared_ptr<const MarketSeries> market,
                         std::size_t first_session, std::size_t end_session);

} // namespace hitrade
