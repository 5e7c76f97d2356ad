#include "hitrade/indicators.hpp"

#include <cmath>

namespace hitrade {
namespace indicators {

namespace {

// Mean computed relative to the first element so that a constant window yields
// exactly that constant (and exactly zero deviations).
double shifted_mean(std::span<const double> xs) {
    double base = xs.front();
    double acc = 0.0;
    for (double x : xs) acc += x - base;
    return base + acc / static_cast<double>(xs.size());
}

double typical_price(const Bar& b) { return (b.high + b.low + b.close) / 3.0; }

double cci_of(std::span<const double> tp) {
    double mean = shifted_mean(tp);
    double mad = 0.0;
    for (double x : tp) mad += std::abs(x - mean);
    mad /= static_cast<double>(tp.size());
    if (mad == 0.0) return 0.0;
    return (tp.back() - mean) / (0.015 * mad);
}

double pband_of(std::span<const double> window, double width) {
    double mean = shifted_mean(window);
    double var = 0.0;
    for (double x : window) var += (x - mean) * (x - mean);
    double sigma = std::sqrt(var / static_cast<double>(window.size()));
    if (sigma == 0.0) return 0.5;
    double lower = mean - width * sigma;
    double upper = mean + width * sigma;
    return (window.back() - lower) / (upper - lower);
}

} // namespace

std::vector<std::optional<double>> rsi_series(std::span<const double> closes, int period) {
    std::vector<std::optional<double>> out(closes.size());
    const auto n = static_cast<std::size_t>(period);
    if (period <= 0 || closes.size() <= n) return out;

    double avg_gain = 0.0;
    double avg_loss = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        double change = closes[i] - closes[i - 1];
        if (change > 0.0) avg_gain += change;
        else avg_loss -= change;
    }
    avg_gain /= period;
    avg_loss /= period;

    auto value = [&] {
        if (avg_loss == 0.0) return avg_gain > 0.0 ? 100.0 : 50.0;
        double rs = avg_gain / avg_loss;
        return 100.0 - 100.0 / (1.0 + rs);
    };
    out[n] = value();
    for (std::size_t i = n + 1; i < closes.size(); ++i) {
        double change = closes[i] - closes[i - 1];
        double gain = change > 0.0 ? change : 0.0;
        double loss = change < 0.0 ? -change : 0.0;
        avg_gain = (avg_gain * (period - 1) + gain) / period;
        avg_loss = (avg_loss * (period - 1) + loss) / period;
        out[i] = value();
    }
    return out;
}

std::optional<double> rsi(std::span<const double> closes, int period) {
    if (closes.empty()) return std::nullopt;
    return rsi_series(closes, period).back();
}

std::vector<std::optional<double>> macd_histogram_series(std::span<const double> closes) {
    std::vector<std::optional<double>> out(closes.size());
    if (closes.empty()) return out;
    const double a_fast = 2.0 / (kMacdFast + 1);
    const double a_slow = 2.0 / (kMacdSlow + 1);
    const double a_signal = 2.0 / (kMacdSignal + 1);
    double fast = closes[0];
    double slow = closes[0];
    double signal = 0.0;
    for (std::size_t i = 0; i < closes.size(); ++i) {
        if (i > 0) {
            fast = a_fast * closes[i] + (1.0 - a_fast) * fast;
            slow = a_slow * closes[i] + (1.0 - a_slow) * slow;
        }
        double line = fast - slow;
        signal = i == 0 ? line : a_signal * line + (1.0 - a_signal) * signal;
        if (i + 1 >= static_cast<std::size_t>(kMacdMinHistory)) out[i] = line - signal;
    }
    return out;
}

std::optional<double> macd_histogram(std::span<const double> closes) {
    if (closes.empty()) return std::nullopt;
    return macd_histogram_series(closes).back();
}

std::optional<double> cci(std::span<const Bar> bars, int period) {
    if (period <= 0 || bars.size() < static_cast<std::size_t>(period)) return std::nullopt;
    std::vector<double> tp;
    tp.reserve(static_cast<std::size_t>(period));
    for (const Bar& b : bars.last(static_cast<std::size_t>(period))) tp.push_back(typical_price(b));
    return cci_of(tp);
}

std::optional<double> bollinger_pband(std::span<const double> closes, int period, double width) {
    if (period <= 0 || closes.size() < static_cast<std::size_t>(period)) return std::nullopt;
    return pband_of(closes.last(static_cast<std::size_t>(period)), width);
}

} // namespace indicators

std::vector<std::optional<MarketFeatures>> market_feature_series(std::span<const Bar> bars) {
    using namespace indicators;
    std::vector<double> closes;
    std::vector<double> tp;
    closes.reserve(bars.size());
    tp.reserve(bars.size());
    for (const Bar& b : bars) {
        closes.push_back(b.close);
        tp.push_back((b.high + b.low + b.close) / 3.0);
    }
    auto rsi_values = rsi_series(closes);
    auto macd_values = macd_histogram_series(closes);

    std::vector<std::optional<MarketFeatures>> out(bars.size());
    const auto cci_n = static_cast<std::size_t>(kCciPeriod);
    const auto bb_n = static_cast<std::size_t>(kBollingerPeriod);
    for (std::size_t i = 0; i < bars.size(); ++i) {
        if (!rsi_values[i] || !macd_values[i] || i + 1 < cci_n || i + 1 < bb_n) continue;
        std::span<const double> tp_window(tp.data() + i + 1 - cci_n, cci_n);
        std::span<const double> close_window(closes.data() + i + 1 - bb_n, bb_n);
        out[i] = MarketFeatures{*rsi_values[i], *macd_values[i], cci_of(tp_window),
                                pband_of(close_window, kBollingerWidth), static_cast<double>(bars[i].volume)};
    }
    return out;
}

} // namespace hitrade
