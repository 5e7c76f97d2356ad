#include "fixtures.hpp"
#include "oracle_values.hpp"

#include "hitrade/indicators.hpp"
#include "hitrade/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hitrade;
namespace ind = hitrade::indicators;

namespace {

std::vector<Bar> bars_from_closes(const std::vector<double>& closes) {
    std::vector<Bar> bars;
    Timestamp t = fixtures::at("2024-01-02T14:30:00Z");
    for (double c : closes) {
        bars.push_back({t, c, c, c, c, 100});
        t += std::chrono::minutes{1};
    }
    return bars;
}

std::vector<double> ramp(int first, int last) {
    std::vector<double> out;
    for (int i = first; i <= last; ++i) out.push_back(i);
    return out;
}

// 20 values: centre +/- k for k = 1..9, then the centre twice, so the window mean
// is exactly the last value.
std::vector<double> symmetric_window(double centre) {
    std::vector<double> out;
    for (int k = 1; k <= 9; ++k) {
        out.push_back(centre + k);
        out.push_back(centre - k);
    }
    out.push_back(centre);
    out.push_back(centre);
    return out;
}

} // namespace

TEST(Rsi, RisingSeriesIs100) { EXPECT_EQ(*ind::rsi(ramp(1, 15)), 100.0); }

TEST(Rsi, ConstantSeriesIs50) { EXPECT_EQ(*ind::rsi(std::vector<double>(15, 42.0)), 50.0); }

TEST(Rsi, FallingSeriesIs0) {
    auto closes = ramp(1, 20);
    std::reverse(closes.begin(), closes.end());
    EXPECT_EQ(*ind::rsi(closes), 0.0);
}

TEST(Rsi, ClassicWilderExample) {
    std::vector<double> closes{44.34, 44.09, 44.15, 43.61, 44.33, 44.83, 45.10, 45.42,
                               45.84, 46.08, 45.89, 46.03, 45.61, 46.28, 46.28};
    EXPECT_NEAR(*ind::rsi(closes), oracle::kWilderRsi, 1e-9);
}

TEST(Rsi, WarmupNeedsPeriodPlusOne) {
    EXPECT_FALSE(ind::rsi(ramp(1, 14)).has_value());
    EXPECT_TRUE(ind::rsi(ramp(1, 15)).has_value());
}

TEST(Macd, ConstantSeriesIsZero) { EXPECT_EQ(*ind::macd_histogram(std::vector<double>(40, 7.5)), 0.0); }

TEST(Macd, LinearRampMatchesDirectRecursion) {
    auto closes = ramp(1, 50);
    EXPECT_NEAR(*ind::macd_histogram(closes), oracle::kMacdRamp50, 1e-9);
}

TEST(Macd, RampLineIsPositive) {
    // EMA(12) sits above EMA(26) on a rising series.
    auto closes = ramp(1, 50);
    const double a_fast = 2.0 / 13.0;
    const double a_slow = 2.0 / 27.0;
    double fast = closes[0];
    double slow = closes[0];
    for (std::size_t i = 1; i < closes.size(); ++i) {
        fast = a_fast * closes[i] + (1 - a_fast) * fast;
        slow = a_slow * closes[i] + (1 - a_slow) * slow;
    }
    EXPECT_GT(fast - slow, 0.0);
}

TEST(Macd, HistogramTurnsNegativeAfterPeak) {
    auto closes = ramp(1, 60);
    for (int i = 59; i >= 1; --i) closes.push_back(i);
    auto series = ind::macd_histogram_series(closes);
    EXPECT_GT(*series[59], 0.0);
    bool negative_later = false;
    for (std::size_t i = 60; i < series.size(); ++i) negative_later |= *series[i] < 0.0;
    EXPECT_TRUE(negative_later);
    EXPECT_LT(*series.back(), 0.0);
}

TEST(Macd, WarmupIs35Closes) {
    EXPECT_FALSE(ind::macd_histogram(ramp(1, 34)).has_value());
    EXPECT_TRUE(ind::macd_histogram(ramp(1, 35)).has_value());
}

TEST(Cci, IdenticalBarsGiveZero) {
    std::vector<Bar> bars(20, Bar{fixtures::at("2024-01-02T14:30:00Z"), 10.0, 11.0, 9.0, 10.5, 5});
    EXPECT_EQ(*ind::cci(bars), 0.0);
}

TEST(Cci, LastTypicalPriceAtMeanGivesZero) {
    EXPECT_EQ(*ind::cci(bars_from_closes(symmetric_window(100.0))), 0.0);
}

TEST(Cci, RandomFixtureMatchesBruteForce) {
    EXPECT_NEAR(*ind::cci(fixtures::lcg_bars(4, 25)), oracle::kCci25, 1e-9);
}

TEST(Cci, WarmupIs20Bars) {
    EXPECT_FALSE(ind::cci(fixtures::lcg_bars(1, 19)).has_value());
    EXPECT_TRUE(ind::cci(fixtures::lcg_bars(1, 20)).has_value());
}

TEST(Pband, ConstantClosesGiveHalf) { EXPECT_EQ(*ind::bollinger_pband(std::vector<double>(20, 3.0)), 0.5); }

TEST(Pband, MidlineOfSymmetricWindowGivesHalf) {
    EXPECT_EQ(*ind::bollinger_pband(symmetric_window(50.0)), 0.5);
}

TEST(Pband, RandomFixtureMatchesBruteForce) {
    EXPECT_NEAR(*ind::bollinger_pband(fixtures::closes_of(fixtures::lcg_bars(5, 30))), oracle::kPband30, 1e-9);
}

TEST(Indicators, HundredBarGridMatchesOracle) {
    std::size_t k = 0;
    for (auto seed : oracle::kIndicatorSeeds) {
        auto bars = fixtures::lcg_bars(seed, 100);
        auto closes = fixtures::closes_of(bars);
        for (std::size_t idx : oracle::kIndicatorIndices) {
            std::span<const double> c(closes.data(), idx + 1);
            std::span<const Bar> b(bars.data(), idx + 1);
            EXPECT_NEAR(*ind::rsi(c), oracle::kRsiGrid[k], 1e-9);
            EXPECT_NEAR(*ind::macd_histogram(c), oracle::kMacdGrid[k], 1e-9);
            EXPECT_NEAR(*ind::cci(b), oracle::kCciGrid[k], 1e-9);
            EXPECT_NEAR(*ind::bollinger_pband(c), oracle::kPbandGrid[k], 1e-9);
            ++k;
        }
    }
}

TEST(Indicators, SeriesAgreesWithPrefixEvaluation) {
    auto bars = fixtures::lcg_bars(6, 80);
    auto closes = fixtures::closes_of(bars);
    auto feats = market_feature_series(bars);
    for (std::size_t i = 0; i < bars.size(); ++i) {
        if (i + 1 < static_cast<std::size_t>(ind::kFeatureWarmup)) {
            EXPECT_FALSE(feats[i].has_value());
            continue;
        }
        ASSERT_TRUE(feats[i].has_value()) << i;
        std::span<const double> c(closes.data(), i + 1);
        std::span<const Bar> b(bars.data(), i + 1);
        EXPECT_DOUBLE_EQ(feats[i]->rsi_14, *ind::rsi(c));
        EXPECT_DOUBLE_EQ(feats[i]->macd_hist, *ind::macd_histogram(c));
        EXPECT_NEAR(feats[i]->cci_20, *ind::cci(b), 1e-9);
        EXPECT_NEAR(feats[i]->bb_pband_20, *ind::bollinger_pband(c), 1e-12);
        EXPECT_EQ(feats[i]->volume, static_cast<double>(bars[i].volume));
    }
}

TEST(IndicatorProperty, RsiIsScaleInvariant) {
    Rng rng(1);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto closes = fixtures::closes_of(fixtures::lcg_bars(seed, 60));
        double k = 0.01 + 100.0 * rng.uniform();
        auto scaled = closes;
        for (double& x : scaled) x *= k;
        EXPECT_NEAR(*ind::rsi(scaled), *ind::rsi(closes), 1e-9);
    }
}

TEST(IndicatorProperty, PbandIsAffineInvariant) {
    Rng rng(2);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto closes = fixtures::closes_of(fixtures::lcg_bars(seed, 40));
        double k = 0.01 + 100.0 * rng.uniform();
        double shift = 1000.0 * (rng.uniform() - 0.5);
        auto moved = closes;
        for (double& x : moved) x = k * x + shift;
        EXPECT_NEAR(*ind::bollinger_pband(moved), *ind::bollinger_pband(closes), 1e-9);
    }
}

TEST(IndicatorProperty, CciIsScaleInvariant) {
    Rng rng(3);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto bars = fixtures::lcg_bars(seed, 30);
        double k = 0.01 + 100.0 * rng.uniform();
        auto scaled = bars;
        for (Bar& b : scaled) {
            b.open *= k;
            b.high *= k;
            b.low *= k;
            b.close *= k;
        }
        EXPECT_NEAR(*ind::cci(scaled), *ind::cci(bars), 1e-9);
    }
}

TEST(IndicatorProperty, NoNonFiniteValues) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Bar> bars;
        double price = 1.0 + 500.0 * rng.uniform();
        Timestamp t = fixtures::at("2024-01-02T14:30:00Z");
        const std::size_t n = 35 + rng.below(60);
        const bool stuck = trial % 5 == 0; // long flat stretches exercise the degenerate branches
        for (std::size_t i = 0; i < n; ++i) {
            if (!stuck || rng.uniform() < 0.1) price *= std::exp(0.05 * rng.normal());
            double spread = stuck ? 0.0 : price * 0.01 * rng.uniform();
            bars.push_back({t, price, price + spread, price - spread * 0.5, price,
                            static_cast<std::int64_t>(rng.below(1000))});
            t += std::chrono::minutes{1};
        }
        for (const auto& f : market_feature_series(bars)) {
            if (!f) continue;
            EXPECT_TRUE(std::isfinite(f->rsi_14) && f->rsi_14 >= 0.0 && f->rsi_14 <= 100.0);
            EXPECT_TRUE(std::isfinite(f->macd_hist));
            EXPECT_TRUE(std::isfinite(f->cci_20));
            EXPECT_TRUE(std::isfinite(f->bb_pband_20));
        }
    }
}
