#include "hitrade/trading_env.hpp"

#include "hitrade/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace hitrade {

TimeframeSeries TimeframeSeries::build(std::span<const Session> sessions, Timeframe tf) {
    TimeframeSeries series;
    series.timeframe = tf;
    std::size_t base_offset = 0;
    const auto width = std::chrono::minutes{minutes_in(tf)};
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        const Session& session = sessions[s];
        auto bars = resample(session, tf);
        std::size_t k = 0;
        for (std::size_t i = 1; i <= session.bars.size(); ++i) {
            bool window_ends = i == session.bars.size() ||
                               (session.bars[i].timestamp - session.hours.open_time) / width !=
                                   (session.bars[i - 1].timestamp - session.hours.open_time) / width;
            if (!window_ends) continue;
            series.bars.push_back(bars[k]);
            series.session.push_back(s);
            series.session_final.push_back(k + 1 == bars.size() ? 1 : 0);
            series.last_base.push_back(base_offset + i - 1);
            ++k;
        }
        base_offset += session.bars.size();
    }
    series.features = market_feature_series(series.bars);
    return series;
}

std::shared_ptr<const MarketSeries> MarketSeries::build(std::vector<Session> sessions) {
    auto market = std::make_shared<MarketSeries>();
    market->sessions = std::move(sessions);
    std::size_t offset = 0;
    for (const auto& s : market->sessions) {
        if (s.bars.empty()) throw DataError(fmt::format("session {} has no bars", format_date(s.hours.date)));
        market->session_first_base.push_back(offset);
        offset += s.bars.size();
    }
    for (Timeframe tf : kTimeframes) market->by_timeframe[index_of(tf)] = TimeframeSeries::build(market->sessions, tf);
    return market;
}

void append_market_rows(const TimeframeSeries& series, std::size_t end, std::size_t window,
                        std::vector<double>& out) {
    const std::size_t begin = end + 1 - window;
    double mean = 0.0;
    for (std::size_t i = begin; i <= end; ++i) mean += series.features[i]->volume;
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t i = begin; i <= end; ++i) {
        double d = series.features[i]->volume - mean;
        var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(window));
    for (std::size_t i = begin; i <= end; ++i) {
        const MarketFeatures& f = *series.features[i];
        out.push_back(f.rsi_14 / 100.0);
        out.push_back(f.macd_hist / series.bars[i].close);
        out.push_back(f.cci_20 / 200.0);
        out.push_back(f.bb_pband_20);
        out.push_back(sd > 0.0 ? (f.volume - mean) / sd : 0.0);
    }
}

void build_observation(const TimeframeSeries& series, std::size_t end, std::size_t window,
                       std::span<const PortfolioFeatures> portfolio_rows, std::vector<double>& out) {
    std::vector<double> market;
    market.reserve(window * kMarketFeaturesPerBar);
    append_market_rows(series, end, window, market);
    out.reserve(out.size() + window * kFeaturesPerBar);
    for (std::size_t r = 0; r < window; ++r) {
        out.insert(out.end(), market.begin() + static_cast<std::ptrdiff_t>(r * kMarketFeaturesPerBar),
                   market.begin() + static_cast<std::ptrdiff_t>((r + 1) * kMarketFeaturesPerBar));
        const PortfolioFeatures& p = portfolio_rows[r];
        out.push_back(p.cash_ratio);
        out.push_back(p.stock_ratio);
        out.push_back(std::clamp(p.unrealized_profit_ratio, -1.0, 1.0));
    }
}

EnvConfig EnvConfig::defaults(Timeframe tf) {
    EnvConfig c;
    c.timeframe = tf;
    switch (tf) {
    case Timeframe::OneMinute: c.window_size = 240; break;
    case Timeframe::TenMinute: c.window_size = 120; break;
    case Timeframe::OneHour: c.window_size = 80; break;
    }
    return c;
}

std::string_view label(Action a) {
    switch (a) {
    case Action::Buy: return "buy";
    case Action::Sell: return "sell";
    case Action::Hold: return "hold";
    }
    return "?";
}

double agent_reward(const TradeRecord& trade) {
    return std::tanh(5.0 * (trade.sell_price - trade.avg_buy_price) / trade.avg_buy_price);
}

TradingEnv::TradingEnv(std::shared_ptr<const TimeframeSeries> series, EnvConfig config)
    : TradingEnv(series, config, first_observable_index(config.window_size),
                 series && series->size() > 0 ? series->size() - 1 : 0) {}

TradingEnv::TradingEnv(std::shared_ptr<const TimeframeSeries> series, EnvConfig config, std::size_t first_cursor,
                       std::size_t last_index)
    : series_(std::move(series)), config_(config), first_cursor_(first_cursor), last_index_(last_index) {
    if (!series_) throw EnvError("trading env needs a bar series");
    if (config_.window_size == 0) throw EnvError("window_size must be positive");
    if (!(config_.initial_cash > 0.0)) throw EnvError("initial_cash must be positive");
    if (series_->timeframe != config_.timeframe)
        throw EnvError(fmt::format("series timeframe {} does not match env timeframe {}", label(series_->timeframe),
                                   label(config_.timeframe)));
    if (last_index_ >= series_->size())
        throw EnvError(fmt::format("episode end {} beyond the {} available bars", last_index_, series_->size()));
    if (first_cursor_ >= last_index_)
        throw EnvError(fmt::format("episode needs at least {} bars of {} data, have {}", min_cursor() + 2,
                                   label(config_.timeframe), last_index_ + 1));
}

std::vector<double> TradingEnv::reset(std::size_t cursor) {
    if (cursor < min_cursor())
        throw EnvError(fmt::format("insufficient history: cursor {} needs at least {} bars ({} warmup + window {})",
                                   cursor, min_cursor() + 1, indicators::kFeatureWarmup - 1, config_.window_size));
    if (cursor >= last_index_) throw EnvError(fmt::format("cursor {} leaves no bars to trade", cursor));
    cursor_ = cursor;
    done_ = false;
    portfolio_ = PortfolioState::with_cash(config_.initial_cash, series_->bars[cursor].close, config_.fee_per_sell_share);
    portfolio_rows_.assign(config_.window_size, features(portfolio_));
    trades_.clear();
    return observation();
}

std::vector<double> TradingEnv::observation() const {
    std::vector<double> obs;
    build_observation(*series_, cursor_, config_.window_size, portfolio_rows_, obs);
    return obs;
}

double TradingEnv::liquidate(std::size_t index, StepInfo& info) {
    auto sold = sell_all(portfolio_, series_->bars[index].close);
    portfolio_ = sold.state;
    if (!sold.trade) return 0.0;
    double r = agent_reward(*sold.trade);
    trades_.push_back({series_->bars[index].timestamp, Side::Sell, sold.trade->shares, sold.trade->sell_price, r});
    info.trades.push_back(*sold.trade);
    return r;
}

StepResult TradingEnv::step(Action action) {
    if (done_) throw EnvError("step called after the episode ended");
    StepResult result;
    const std::size_t t = cursor_;
    const Bar& bar = series_->bars[t];
    const bool closing_bar = series_->session_final[t] != 0 || t == last_index_;
    Action effective = (closing_bar && action == Action::Buy) ? Action::Hold : action;

    switch (effective) {
    case Action::Buy: {
        auto bought = buy_all(portfolio_, bar.close);
        portfolio_ = bought.state;
        if (bought.shares_bought > 0)
            trades_.push_back({bar.timestamp, Side::Buy, bought.shares_bought, bar.close, 0.0});
        break;
    }
    case Action::Sell: result.reward += liquidate(t, result.info); break;
    case Action::Hold: break;
    }

    cursor_ = t + 1;
    portfolio_ = mark(portfolio_, series_->bars[cursor_].close);
    if (series_->session_final[cursor_] != 0 || cursor_ == last_index_) result.reward += liquidate(cursor_, result.info);
    done_ = cursor_ == last_index_;

    portfolio_rows_.erase(portfolio_rows_.begin());
    portfolio_rows_.push_back(features(portfolio_));

    result.observation = observation();
    result.done = done_;
    result.info.portfolio_value = portfolio_.total_value();

    if (episode_log_ != nullptr) {
        char buf[64];
        auto reward_end = std::to_chars(buf, buf + 32, result.reward).ptr;
        auto value_end = std::to_chars(reward_end, buf + sizeof(buf), result.info.portfolio_value).ptr;
        *episode_log_ << format_timestamp(bar.timestamp) << ',' << label(action) << ','
                      << std::string_view(buf, reward_end - buf) << ','
                      << std::string_view(reward_end, value_end - reward_end) << '\n';
    }
    return result;
}

Transition TradingEnv::step(std::size_t action) {
    if (action >= kActionCount) throw EnvError(fmt::format("action {} out of range", action));
    StepResult r = step(static_cast<Action>(action));
    return {std::move(r.observation), r.reward, r.done};
}

void TradingEnv::set_episode_log(std::ostream* out) {
    episode_log_ = out;
    if (episode_log_ != nullptr) *episode_log_ << "timestamp,action,reward,portfolio_value\n";
}

} // namespace hitrade
