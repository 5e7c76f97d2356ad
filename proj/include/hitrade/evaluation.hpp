#pragma once

#include "hitrade/allocator.hpp"
#include "hitrade/market_data.hpp"
#include "hitrade/portfolio.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hitrade {

// (last - first) / first * 100. Throws DataError for fewer than two points.
double cumulative_return(std::span<const double> values);
double cumulative_return(const EquityCurve& curve);

// Mean period excess return over the sample standard deviation of period returns,
// scaled by sqrt(periods_per_year). `risk_free_rate` is annual and spread evenly
// over the periods. nullopt when undefined (fewer than 3 points or zero variance).
std::optional<double> sharpe(std::span<const double> values, double periods_per_year, double risk_free_rate = 0.0);
std::optional<double> sharpe(const EquityCurve& curve, double periods_per_year, double risk_free_rate = 0.0);

// Most negative peak-to-trough decline in percent (0 for a non-decreasing curve).
double max_drawdown(std::span<const double> values);
double max_drawdown(const EquityCurve& curve);

// Whole shares bought at the first 1-minute close, held and marked at every close.
EquityCurve buy_and_hold(std::span<const Session> sessions, double initial_cash);

// Last point of each UTC calendar day.
EquityCurve sample_daily(const EquityCurve& curve);

// Sample standard deviation of simple bar-to-bar returns, times 100.
// nullopt for fewer than 3 closes.
std::optional<double> return_volatility(std::span<const double> closes);

enum class Granularity : std::uint8_t { Monthly, Daily, Hourly };
std::string_view label(Granularity g);
Granularity parse_granularity(std::string_view text);

struct UnitAllocation {
    std::string unit; // YYYY-MM, YYYY-MM-DD or YYYY-MM-DDTHH
    Timestamp start;
    double volatility = 0.0;
    std::size_t quartile = 0;
    std::size_t decisions = 0;
    std::array<double, 3> shares{}; // indexed by timeframe
};

struct QuartileAllocationReport {
    Granularity granularity = Granularity::Daily;
    std::array<std::array<double, 3>, 4> shares{}; // [quartile][timeframe], mean of unit shares
    std::array<std::size_t, 4> unit_counts{};
    std::array<double, 4> mean_volatility{};
    std::vector<UnitAllocation> units; // chronological
    std::size_t skipped_units = 0;     // too few bars or no counted decisions
};

// Groups decisions into units, ranks the units by return volatility of their
// 1-minute closes (ties by time), splits them into four near-equal quartiles and
// averages each unit's selection shares. Forced session-open decisions are left out
// unless `include_forced`. Throws DataError with fewer than 4 usable units.
QuartileAllocationReport quartile_allocation(std::span<const AllocationDecision> decisions,
                                             std::span<const Session> sessions, Granularity granularity,
                                             bool include_forced = false);

struct MetricsReport {
    double cumulative_return = 0.0; // percent
    std::optional<double> sharpe;
    double max_drawdown = 0.0;      // percent, <= 0
    double periods_per_year = 252.0;
    double initial_value = 0.0;
    double final_value = 0.0;
};

// Metrics on the curve as given (one period per point).
MetricsReport compute_metrics(const EquityCurve& curve, double periods_per_year);

void write_metrics_json(std::ostream& out, std::string_view name, const MetricsReport& m);
MetricsReport read_metrics_json(std::istream& in);
std::string metrics_table(std::span<const std::pair<std::string, MetricsReport>> rows);

void write_quartile_json(std::ostream& out, const QuartileAllocationReport& report);
std::string quartile_table(const QuartileAllocationReport& report);
// quartile,timeframe,share (one row per bar of the grouped chart)
void write_quartile_csv(std::ostream& out, const QuartileAllocationReport& report);

} // namespace hitrade
