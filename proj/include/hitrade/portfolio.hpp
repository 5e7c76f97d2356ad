#pragma once

#include "hitrade/market_data.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace hitrade {

// Realized outcome of closing a position; the inputs of the per-trade agent reward.
struct TradeRecord {
    double sell_price = 0.0;
    double avg_buy_price = 0.0;
    std::int64_t shares = 0;
};

struct PortfolioFeatures {
    double cash_ratio = 1.0;
    double stock_ratio = 0.0;
    double unrealized_profit_ratio = 0.0;
};

// Single-asset account. A value type: every operation returns a new state.
struct PortfolioState {
    double cash = 0.0;
    std::int64_t shares = 0;
    double cost_basis = 0.0; // total paid for the currently held shares
    double last_price = 0.0;
    double fee_per_sell_share = 0.0;

    static PortfolioState with_cash(double cash, double price, double fee_per_sell_share = 0.0);

    double total_value() const { return cash + static_cast<double>(shares) * last_price; }

    // Volume-weighted purchase price of the held shares; undefined when flat.
    std::optional<double> avg_cost() const;

    bool operator==(const PortfolioState&) const = default;
};

struct BuyResult {
    PortfolioState state;
    std::int64_t shares_bought = 0;
};

struct SellResult {
    PortfolioState state;
    std::optional<TradeRecord> trade;
};

// Spends as much cash as buys whole shares at `price`.
BuyResult buy_all(const PortfolioState& state, double price);

// Closes the whole position at `price`, paying fee_per_sell_share on every share.
SellResult sell_all(const PortfolioState& state, double price);

PortfolioState mark(const PortfolioState& state, double price);

PortfolioFeatures features(const PortfolioState& state);

enum class Side : std::uint8_t { Buy, Sell };

struct TradeLogEntry {
    Timestamp timestamp;
    Side side = Side::Buy;
    std::int64_t shares = 0;
    double price = 0.0;
    double realized_reward = 0.0;

    bool operator==(const TradeLogEntry&) const = default;
};

// timestamp,side,shares,price,realized_reward
void write_trade_log(std::ostream& out, std::span<const TradeLogEntry> trades);

struct EquityPoint {
    Timestamp timestamp;
    double value = 0.0;

    bool operator==(const EquityPoint&) const = default;
};

using EquityCurve = std::vector<EquityPoint>;

// timestamp,value
void write_equity_curve(std::ostream& out, const EquityCurve& curve);

} // namespace hitrade
