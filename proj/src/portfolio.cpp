#include "hitrade/portfolio.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace hitrade {

namespace {

std::string to_shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace

PortfolioState PortfolioState::with_cash(double cash, double price, double fee_per_sell_share) {
    PortfolioState s;
    s.cash = cash;
    s.last_price = price;
    s.fee_per_sell_share = fee_per_sell_share;
    return s;
}

std::optional<double> PortfolioState::avg_cost() const {
    if (shares == 0) return std::nullopt;
    return cost_basis / static_cast<double>(shares);
}

BuyResult buy_all(const PortfolioState& state, double price) {
    PortfolioState next = state;
    next.last_price = price;
    auto count = static_cast<std::int64_t>(std::floor(state.cash / price));
    while (count > 0 && static_cast<double>(count) * price > state.cash) --count;
    if (count <= 0) return {next, 0};
    double spent = static_cast<double>(count) * price;
    next.cash -= spent;
    next.shares += count;
    next.cost_basis += spent;
    return {next, count};
}

SellResult sell_all(const PortfolioState& state, double price) {
    PortfolioState next = state;
    next.last_price = price;
    if (state.shares == 0) return {next, std::nullopt};
    TradeRecord trade{price, *state.avg_cost(), state.shares};
    double n = static_cast<double>(state.shares);
    next.cash += n * price - n * state.fee_per_sell_share;
    next.shares = 0;
    next.cost_basis = 0.0;
    return {next, trade};
}

PortfolioState mark(const PortfolioState& state, double price) {
    PortfolioState next = state;
    next.last_price = price;
    return next;
}

PortfolioFeatures features(const PortfolioState& state) {
    double total = state.total_value();
    PortfolioFeatures f;
    f.cash_ratio = state.cash / total;
    f.stock_ratio = static_cast<double>(state.shares) * state.last_price / total;
    if (auto avg = state.avg_cost()) f.unrealized_profit_ratio = (state.last_price - *avg) / *avg;
    return f;
}

void write_trade_log(std::ostream& out, std::span<const TradeLogEntry> trades) {
    out << "timestamp,side,shares,price,realized_reward\n";
    for (const auto& t : trades)
        out << format_timestamp(t.timestamp) << ',' << (t.side == Side::Buy ? "buy" : "sell") << ',' << t.shares
            << ',' << to_shortest(t.price) << ',' << to_shortest(t.realized_reward) << '\n';
}

void write_equity_curve(std::ostream& out, const EquityCurve& curve) {
    out << "timestamp,value\n";
    for (const auto& p : curve) out << format_timestamp(p.timestamp) << ',' << to_shortest(p.value) << '\n';
}

} // namespace hitrade
