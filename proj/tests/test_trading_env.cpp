#include "fixtures.hpp"
#include "oracle_values.hpp"

#include "hitrade/error.hpp"
#include "hitrade/rng.hpp"
#include "hitrade/trading_env.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace hitrade;

namespace {

std::shared_ptr<const TimeframeSeries> series_of(std::vector<Session> sessions, Timeframe tf) {
    auto market = MarketSeries::build(std::move(sessions));
    return {market, &market->at(tf)};
}

EnvConfig small_config(Timeframe tf = Timeframe::OneMinute, std::size_t window = 1) {
    EnvConfig cfg;
    cfg.timeframe = tf;
    cfg.window_size = window;
    return cfg;
}

// One 60-bar session: 34 warmup closes at 100, then the scripted closes, padded with
// the last scripted value.
Session scripted_session(std::vector<double> tail, Date date = parse_date("2024-01-02")) {
    std::vector<double> closes(34, 100.0);
    closes.insert(closes.end(), tail.begin(), tail.end());
    closes.resize(60, closes.back());
    return fixtures::session_from_closes(date, closes, 1000, std::chrono::minutes{60});
}

} // namespace

TEST(AgentReward, EqualPricesGiveZero) { EXPECT_EQ(agent_reward({150.0, 150.0, 10}), 0.0); }

TEST(AgentReward, TenPercentProfit) { EXPECT_NEAR(agent_reward({110.0, 100.0, 1}), oracle::kTanhHalf, 1e-12); }

TEST(AgentReward, TwentyPercentLoss) { EXPECT_NEAR(agent_reward({80.0, 100.0, 1}), oracle::kTanhMinusOne, 1e-12); }

TEST(TradingEnv, ObservationHasWindowTimesEightValues) {
    auto series = series_of(fixtures::flat_sessions(1), Timeframe::OneMinute);
    TradingEnv env(series, EnvConfig::defaults(Timeframe::OneMinute));
    EXPECT_EQ(env.min_cursor(), 273u);
    auto obs = env.reset(env.min_cursor());
    EXPECT_EQ(obs.size(), 1920u);
    EXPECT_EQ(env.observation_size(), 1920u);
}

TEST(TradingEnv, ResetWithoutHistoryNamesRequiredBars) {
    auto series = series_of(fixtures::flat_sessions(1), Timeframe::OneMinute);
    TradingEnv env(series, EnvConfig::defaults(Timeframe::OneMinute));
    try {
        env.reset(10);
        FAIL() << "expected EnvError";
    } catch (const EnvError& e) {
        EXPECT_NE(std::string(e.what()).find("274 bars"), std::string::npos) << e.what();
    }
}

TEST(TradingEnv, RepeatedResetsAreIdentical) {
    std::vector<Session> sessions{fixtures::session_from_closes(parse_date("2024-01-02"),
                                                                fixtures::closes_of(fixtures::lcg_bars(3, 390)))};
    auto series = series_of(sessions, Timeframe::OneMinute);
    TradingEnv env(series, EnvConfig::defaults(Timeframe::OneMinute));
    auto a = env.reset(300);
    env.step(Action::Buy);
    env.step(Action::Hold);
    auto b = env.reset(300);
    EXPECT_EQ(a, b);
}

TEST(TradingEnv, InitialObservationRows) {
    auto series = series_of({scripted_session({100.0, 103.0})}, Timeframe::OneMinute);
    TradingEnv env(series, small_config(Timeframe::OneMinute, 2));
    auto obs = env.reset();
    ASSERT_EQ(obs.size(), 16u);
    const MarketFeatures& f = *series->features[env.cursor()];
    EXPECT_EQ(obs[8 + 0], f.rsi_14 / 100.0);
    EXPECT_EQ(obs[8 + 2], f.cci_20 / 200.0);
    EXPECT_EQ(obs[8 + 3], f.bb_pband_20);
    EXPECT_EQ(obs[8 + 4], 0.0); // constant volume
    EXPECT_EQ(obs[8 + 5], 1.0);
    EXPECT_EQ(obs[8 + 6], 0.0);
    EXPECT_EQ(obs[8 + 7], 0.0);
}

TEST(TradingEnv, HoldLeavesPortfolioUntouched) {
    auto series = series_of({scripted_session({100.0, 103.0, 90.0})}, Timeframe::OneMinute);
    TradingEnv env(series, small_config());
    env.reset();
    auto r = env.step(Action::Hold);
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_EQ(env.portfolio().cash, 10000.0);
    EXPECT_EQ(env.portfolio().shares, 0);
    EXPECT_EQ(env.portfolio().last_price, 103.0);
}

TEST(TradingEnv, BuyThenSellPaysTanhReward) {
    auto series = series_of({scripted_session({100.0, 103.0})}, Timeframe::OneMinute);
    TradingEnv env(series, small_config());
    env.reset();
    auto buy = env.step(Action::Buy);
    EXPECT_EQ(buy.reward, 0.0);
    EXPECT_EQ(env.portfolio().shares, 100);
    auto sell = env.step(Action::Sell);
    EXPECT_NEAR(sell.reward, oracle::kTanh015, 1e-12);
    ASSERT_EQ(sell.info.trades.size(), 1u);
    EXPECT_EQ(sell.info.trades[0].sell_price, 103.0);
    EXPECT_EQ(sell.info.trades[0].avg_buy_price, 100.0);
    EXPECT_DOUBLE_EQ(sell.info.portfolio_value, 10300.0);
}

TEST(TradingEnv, SellWhileFlatAndBuyWhileHoldingAreHarmless) {
    auto series = series_of({scripted_session({100.0, 101.0, 102.0})}, Timeframe::OneMinute);
    TradingEnv env(series, small_config());
    env.reset();
    EXPECT_EQ(env.step(Action::Sell).reward, 0.0);
    env.step(Action::Buy);
    const auto shares = env.portfolio().shares;
    EXPECT_EQ(env.step(Action::Buy).reward, 0.0);
    EXPECT_EQ(env.portfolio().shares, shares); // leftover cash buys nothing at 102
}

TEST(TradingEnv, SessionCloseForcesLiquidation) {
    auto day1 = scripted_session({100.0});
    auto closes = fixtures::closes_of(day1.bars);
    closes.back() = 110.0; // the session's final close
    day1 = fixtures::session_from_closes(day1.hours.date, closes, 1000, std::chrono::minutes{60});
    auto day2 = scripted_session({100.0}, parse_date("2024-01-03"));
    auto series = series_of({day1, day2}, Timeframe::OneMinute);
    TradingEnv env(series, small_config());
    env.reset(57);
    env.step(Action::Buy);                   // fill at close of bar 57 (100)
    auto r = env.step(Action::Hold);         // bar 58 -> 59 is the session's final bar
    EXPECT_EQ(env.cursor(), 59u);
    EXPECT_EQ(env.portfolio().shares, 0);
    EXPECT_NEAR(r.reward, oracle::kTanhHalf, 1e-12);
    EXPECT_DOUBLE_EQ(env.portfolio().cash, 10000.0 - 100 * 100.0 + 100 * 110.0);
}

TEST(TradingEnv, BuyIsIgnoredOnTheSessionsFinalBar) {
    auto series = series_of({scripted_session({100.0}), scripted_session({100.0}, parse_date("2024-01-03"))},
                            Timeframe::OneMinute);
    TradingEnv env(series, small_config());
    env.reset(59);
    env.step(Action::Buy);
    EXPECT_EQ(env.portfolio().shares, 0);
    EXPECT_TRUE(env.trades().empty());
}

TEST(TradingEnv, StepAfterDoneThrows) {
    auto series = series_of({scripted_session({100.0})}, Timeframe::OneMinute);
    TradingEnv env(series, small_config());
    env.reset(57);
    env.step(Action::Hold);
    auto last = env.step(Action::Hold);
    EXPECT_TRUE(last.done);
    EXPECT_THROW(env.step(Action::Hold), EnvError);
}

TEST(TradingEnv, EpisodeLogRows) {
    auto series = series_of({scripted_session({100.0, 103.0})}, Timeframe::OneMinute);
    TradingEnv env(series, small_config());
    std::ostringstream log;
    env.set_episode_log(&log);
    env.reset();
    env.step(Action::Buy);
    env.step(Action::Sell);
    std::istringstream lines(log.str());
    std::string header;
    std::string row1;
    std::string row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    EXPECT_EQ(header, "timestamp,action,reward,portfolio_value");
    EXPECT_EQ(row1, "2024-01-02T15:04:00Z,buy,0,10300");
    EXPECT_EQ(row2.substr(0, 26), "2024-01-02T15:05:00Z,sell,");
}

TEST(TradingEnv, TenMinuteEnvSeesSessionBoundaries) {
    auto market = synthesize(SynthConfig{}, 4, 3);
    auto series = series_of(market.sessions, Timeframe::TenMinute);
    ASSERT_EQ(series->size(), 3u * 39u);
    TradingEnv env(series, small_config(Timeframe::TenMinute, 4));
    env.reset();
    while (!env.done()) {
        env.step(Action::Buy);
        if (series->session_final[env.cursor()] != 0) {
            EXPECT_EQ(env.portfolio().shares, 0);
        }
    }
    EXPECT_EQ(env.portfolio().shares, 0);
}

TEST(TradingEnvProperty, RandomPoliciesRespectInvariants) {
    auto market = synthesize(SynthConfig{}, 12, 4);
    auto series = series_of(market.sessions, Timeframe::OneMinute);
    Rng rng(99);
    for (int episode = 0; episode < 5; ++episode) {
        TradingEnv env(series, small_config(Timeframe::OneMinute, 16));
        auto obs = env.reset(env.min_cursor() + rng.below(100));
        const std::size_t size = obs.size();
        while (!env.done()) {
            auto r = env.step(static_cast<Action>(rng.below(3)));
            EXPECT_GE(r.reward, -1.0);
            EXPECT_LE(r.reward, 1.0);
            EXPECT_EQ(r.observation.size(), size);
            for (double x : r.observation) ASSERT_TRUE(std::isfinite(x));
            if (series->session_final[env.cursor()] != 0) {
                EXPECT_EQ(env.portfolio().shares, 0);
            }
        }
    }
}

TEST(TradingEnvProperty, AllHoldEndsAtInitialCash) {
    auto market = synthesize(SynthConfig{}, 13, 2);
    auto series = series_of(market.sessions, Timeframe::OneMinute);
    TradingEnv env(series, small_config(Timeframe::OneMinute, 8));
    env.reset();
    double value = 0.0;
    while (!env.done()) value = env.step(Action::Hold).info.portfolio_value;
    EXPECT_EQ(value, 10000.0);
}
