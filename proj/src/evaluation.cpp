#include "hitrade/evaluation.hpp"

#include "hitrade/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

namespace hitrade {

namespace {

std::vector<double> values_of(const EquityCurve& curve) {
    std::vector<double> v;
    v.reserve(curve.size());
    for (const auto& p : curve) v.push_back(p.value);
    return v;
}

} // namespace

double cumulative_return(std::span<const double> values) {
    if (values.size() < 2) throw DataError("cumulative return needs at least two points");
    return (values.back() - values.front()) / values.front() * 100.0;
}

double cumulative_return(const EquityCurve& curve) { return cumulative_return(values_of(curve)); }

std::optional<double> sharpe(std::span<const double> values, double periods_per_year, double risk_free_rate) {
    if (values.size() < 3) return std::nullopt;
    const std::size_t n = values.size() - 1;
    std::vector<double> returns(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        returns[i] = values[i + 1] / values[i] - 1.0;
        mean += returns[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    // Returns that differ only by rounding count as constant.
    if (!(sd > 1e-12)) return std::nullopt;
    const double excess = mean - risk_free_rate / periods_per_year;
    return excess / sd * std::sqrt(periods_per_year);
}

std::optional<double> sharpe(const EquityCurve& curve, double periods_per_year, double risk_free_rate) {
    return sharpe(values_of(curve), periods_per_year, risk_free_rate);
}

double max_drawdown(std::span<const double> values) {
    if (values.size() < 2) throw DataError("max drawdown needs at least two points");
    double peak = values.front();
    double worst = 0.0;
    for (double v : values) {
        peak = std::max(peak, v);
        worst = std::min(worst, (v - peak) / peak * 100.0);
    }
    return worst;
}

double max_drawdown(const EquityCurve& curve) { return max_drawdown(values_of(curve)); }

EquityCurve buy_and_hold(std::span<const Session> sessions, double initial_cash) {
    EquityCurve curve;
    std::optional<PortfolioState> state;
    for (const auto& session : sessions) {
        for (const auto& bar : session.bars) {
            if (!state) state = buy_all(PortfolioState::with_cash(initial_cash, bar.close), bar.close).state;
            else state = mark(*state, bar.close);
            curve.push_back({bar.timestamp, state->total_value()});
        }
    }
    if (curve.empty()) throw DataError("buy-and-hold needs at least one bar");
    return curve;
}

EquityCurve sample_daily(const EquityCurve& curve) {
    EquityCurve out;
    for (const auto& p : curve) {
        if (!out.empty() && date_of(out.back().timestamp) == date_of(p.timestamp)) out.back() = p;
        else out.push_back(p);
    }
    return out;
}

std::optional<double> return_volatility(std::span<const double> closes) {
    if (closes.size() < 3) return std::nullopt;
    const std::size_t n = closes.size() - 1;
    double mean = 0.0;
    std::vector<double> returns(n);
    for (std::size_t i = 0; i < n; ++i) {
        returns[i] = closes[i + 1] / closes[i] - 1.0;
        mean += returns[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    return std::sqrt(var / static_cast<double>(n - 1)) * 100.0;
}

std::string_view label(Granularity g) {
    switch (g) {
    case Granularity::Monthly: return "monthly";
    case Granularity::Daily: return "daily";
    case Granularity::Hourly: return "hourly";
    }
    return "?";
}

Granularity parse_granularity(std::string_view text) {
    for (Granularity g : {Granularity::Monthly, Granularity::Daily, Granularity::Hourly})
        if (label(g) == text) return g;
    throw ConfigError(fmt::format("unknown granularity '{}' (expected monthly, daily or hourly)", text));
}

namespace {

using namespace std::chrono;

Timestamp unit_start(Timestamp t, Granularity g) {
    switch (g) {
    case Granularity::Monthly: {
        year_month_day ymd{date_of(t)};
        return Timestamp{sys_days{ymd.year() / ymd.month() / 1}.time_since_epoch()};
    }
    case Granularity::Daily: return Timestamp{date_of(t).time_since_epoch()};
    case Granularity::Hourly: return floor<hours>(t);
    }
    return t;
}

std::string unit_name(Timestamp start, Granularity g) {
    std::string day = format_date(date_of(start));
    switch (g) {
    case Granularity::Monthly: return day.substr(0, 7);
    case Granularity::Daily: return day;
    case Granularity::Hourly: return format_timestamp(start).substr(0, 13);
    }
    return day;
}

} // namespace

QuartileAllocationReport quartile_allocation(std::span<const AllocationDecision> decisions,
                                             std::span<const Session> sessions, Granularity granularity,
                                             bool include_forced) {
    std::map<Timestamp, std::vector<double>> closes;
    for (const auto& session : sessions)
        for (const auto& bar : session.bars) closes[unit_start(bar.timestamp, granularity)].push_back(bar.close);

    struct Tally {
        std::array<std::size_t, 3> counts{};
        std::size_t total = 0;
    };
    std::map<Timestamp, Tally> tallies;
    for (const auto& d : decisions) {
        const Timestamp unit = unit_start(d.timestamp, granularity);
        if (!closes.contains(unit))
            throw DataError(fmt::format("decision at {} falls outside the market data", format_timestamp(d.timestamp)));
        Tally& t = tallies[unit];
        if (d.forced && !include_forced) continue;
        ++t.counts[index_of(d.chosen)];
        ++t.total;
    }

    QuartileAllocationReport report;
    report.granularity = granularity;
    for (const auto& [start, tally] : tallies) {
        auto vol = return_volatility(closes[start]);
        if (!vol || tally.total == 0) {
            ++report.skipped_units;
            continue;
        }
        UnitAllocation u;
        u.unit = unit_name(start, granularity);
        u.start = start;
        u.volatility = *vol;
        u.decisions = tally.total;
        for (std::size_t k = 0; k < 3; ++k)
            u.shares[k] = static_cast<double>(tally.counts[k]) / static_cast<double>(tally.total);
        report.units.push_back(std::move(u));
    }
    const std::size_t n = report.units.size();
    if (n < 4)
        throw DataError(fmt::format("quartile analysis needs at least 4 {} units with data, have {}", label(granularity),
                                    n));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ua = report.units[a];
        const auto& ub = report.units[b];
        if (ua.volatility != ub.volatility) return ua.volatility < ub.volatility;
        return ua.start < ub.start;
    });

    std::size_t pos = 0;
    for (std::size_t q = 0; q < 4; ++q) {
        const std::size_t size = n / 4 + (q < n % 4 ? 1 : 0);
        report.unit_counts[q] = size;
        for (std::size_t k = 0; k < size; ++k, ++pos) {
            UnitAllocation& u = report.units[order[pos]];
            u.quartile = q;
            for (std::size_t tf = 0; tf < 3; ++tf) report.shares[q][tf] += u.shares[tf];
            report.mean_volatility[q] += u.volatility;
        }
        for (std::size_t tf = 0; tf < 3; ++tf) report.shares[q][tf] /= static_cast<double>(size);
        report.mean_volatility[q] /= static_cast<double>(size);
    }
    return report;
}

MetricsReport compute_metrics(const EquityCurve& curve, double periods_per_year) {
    MetricsReport m;
    m.cumulative_return = cumulative_return(curve);
    m.sharpe = sharpe(curve, periods_per_year);
    m.max_drawdown = max_drawdown(curve);
    m.periods_per_year = periods_per_year;
    m.initial_value = curve.front().value;
    m.final_value = curve.back().value;
    return m;
}

void write_metrics_json(std::ostream& out, std::string_view name, const MetricsReport& m) {
    nlohmann::ordered_json j;
    j["strategy"] = name;
    j["cumulative_return_pct"] = m.cumulative_return;
    j["sharpe"] = m.sharpe ? nlohmann::ordered_json(*m.sharpe) : nlohmann::ordered_json(nullptr);
    j["max_drawdown_pct"] = m.max_drawdown;
    j["periods_per_year"] = m.periods_per_year;
    j["initial_value"] = m.initial_value;
    j["final_value"] = m.final_value;
    out << j.dump(2) << '\n';
}

MetricsReport read_metrics_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
        MetricsReport m;
        m.cumulative_return = j.at("cumulative_return_pct").get<double>();
        if (!j.at("sharpe").is_null()) m.sharpe = j.at("sharpe").get<double>();
        m.max_drawdown = j.at("max_drawdown_pct").get<double>();
        m.periods_per_year = j.at("periods_per_year").get<double>();
        m.initial_value = j.at("initial_value").get<double>();
        m.final_value = j.at("final_value").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed metrics file: {}", e.what()));
    }
}

std::string metrics_table(std::span<const std::pair<std::string, MetricsReport>> rows) {
    std::string out = fmt::format("{:<20} {:>12} {:>14} {:>8} {:>10}\n", "Strategy", "Final value", "Return (%)",
                                  "Sharpe", "MDD (%)");
    for (const auto& [name, m] : rows)
        out += fmt::format("{:<20} {:>12.2f} {:>14.2f} {:>8} {:>10.2f}\n", name, m.final_value, m.cumulative_return,
                           m.sharpe ? fmt::format("{:.2f}", *m.sharpe) : std::string("n/a"), m.max_drawdown);
    return out;
}

void write_quartile_json(std::ostream& out, const QuartileAllocationReport& r) {
    nlohmann::ordered_json j;
    j["granularity"] = label(r.granularity);
    j["skipped_units"] = r.skipped_units;
    nlohmann::ordered_json quartiles = nlohmann::ordered_json::array();
    for (std::size_t q = 0; q < 4; ++q) {
        nlohmann::ordered_json e;
        e["quartile"] = q;
        e["units"] = r.unit_counts[q];
        e["mean_volatility"] = r.mean_volatility[q];
        for (Timeframe tf : kTimeframes) e["share_" + std::string(label(tf))] = r.shares[q][index_of(tf)];
        quartiles.push_back(e);
    }
    j["quartiles"] = quartiles;
    nlohmann::ordered_json units = nlohmann::ordered_json::array();
    for (const auto& u : r.units) {
        nlohmann::ordered_json e;
        e["unit"] = u.unit;
        e["volatility"] = u.volatility;
        e["quartile"] = u.quartile;
        e["decisions"] = u.decisions;
        for (Timeframe tf : kTimeframes) e["share_" + std::string(label(tf))] = u.shares[index_of(tf)];
        units.push_back(e);
    }
    j["units"] = units;
    out << j.dump(2) << '\n';
}

std::string quartile_table(const QuartileAllocationReport& r) {
    std::string out = fmt::format("Agent selection share by {} volatility quartile\n", label(r.granularity));
    out += fmt::format("{:<9} {:>6} {:>10} {:>9} {:>9} {:>9}\n", "Quartile", "Units", "Mean vol", "1m (%)",
                       "10m (%)", "1h (%)");
    for (std::size_t q = 0; q < 4; ++q)
        out += fmt::format("{:<9} {:>6} {:>10.4f} {:>9.2f} {:>9.2f} {:>9.2f}\n", q, r.unit_counts[q],
                           r.mean_volatility[q], 100.0 * r.shares[q][0], 100.0 * r.shares[q][1],
                           100.0 * r.shares[q][2]);
    return out;
}

void write_quartile_csv(std::ostream& out, const QuartileAllocationReport& r) {
    out << "quartile,timeframe,share\n";
    for (std::size_t q = 0; q < 4; ++q)
        for (Timeframe tf : kTimeframes)
            out << q << ',' << label(tf) << ',' << fmt::format("{}", r.shares[q][index_of(tf)]) << '\n';
}

} // namespace hitrade
