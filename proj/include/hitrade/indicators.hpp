#pragma once

#include "hitrade/market_data.hpp"

#include <optional>
#include <span>
#include <vector>

namespace hitrade {

struct MarketFeatures {
    double rsi_14 = 50.0;
    double macd_hist = 0.0;
    double cci_20 = 0.0;
    double bb_pband_20 = 0.5;
    double volume = 0.0;
};

namespace indicators {

inline constexpr int kRsiPeriod = 14;
inline constexpr int kCciPeriod = 20;
inline constexpr int kBollingerPeriod = 20;
inline constexpr double kBollingerWidth = 2.0;
inline constexpr int kMacdFast = 12;
inline constexpr int kMacdSlow = 26;
inline constexpr int kMacdSignal = 9;
inline constexpr int kMacdMinHistory = kMacdSlow + kMacdSignal;

// Bars of history needed before every market feature is defined.
inline constexpr int kFeatureWarmup = kMacdMinHistory;

// Each function returns std::nullopt while the input is shorter than its warmup.

// Wilder-smoothed RSI over the whole sequence: the first average is the simple mean
// of the first `period` changes, later ones are (prev * (period - 1) + x) / period.
std::optional<double> rsi(std::span<const double> closes, int period = kRsiPeriod);

// EMA(12) - EMA(26) minus its EMA(9) signal line; each EMA is seeded with its
// first input value.
std::optional<double> macd_histogram(std::span<const double> closes);

// Commodity channel index of the last bar over its trailing window.
std::optional<double> cci(std::span<const Bar> bars, int period = kCciPeriod);

// Bollinger %B of the last close; bands are SMA +/- width * population sigma.
std::optional<double> bollinger_pband(std::span<const double> closes, int period = kBollingerPeriod,
                                      double width = kBollingerWidth);

// Per-bar series; element i equals the pointwise function applied to the prefix [0, i].
std::vector<std::optional<double>> rsi_series(std::span<const double> closes, int period = kRsiPeriod);
std::vector<std::optional<double>> macd_histogram_series(std::span<const double> closes);

} // namespace indicators

// All five features for every bar (nullopt during warmup).
std::vector<std::optional<MarketFeatures>> market_feature_series(std::span<const Bar> bars);

} // namespace hitrade
