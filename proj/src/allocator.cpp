#include "hitrade/allocator.hpp"

#include "hitrade/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

namespace hitrade {

void AgentRegistry::add(AgentSlot slot) {
    const NetworkSpec& spec = slot.params.spec();
    if (spec.input_dim != slot.env.observation_size())
        throw ConfigError(fmt::format("{} agent network expects {} inputs but its window gives {}",
                                      label(slot.env.timeframe), spec.input_dim, slot.env.observation_size()));
    if (spec.action_count != kActionCount)
        throw ConfigError(fmt::format("{} agent network must have 3 actions", label(slot.env.timeframe)));
    slots_[index_of(slot.env.timeframe)] = std::move(slot);
}

bool AgentRegistry::complete() const {
    return std::all_of(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); });
}

const AgentSlot& AgentRegistry::at(Timeframe tf) const {
    const auto& slot = slots_[index_of(tf)];
    if (!slot) throw EnvError(fmt::format("no agent registered for timeframe {}", label(tf)));
    return *slot;
}

double allocator_reward(double v_current, double v_previous) {
    if (!(v_current > 0.0) || !(v_previous > 0.0))
        throw EnvError(fmt::format("portfolio values must be positive (current {}, previous {})", v_current,
                                   v_previous));
    return std::log(v_current / v_previous);
}

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace

void write_allocation_log(std::ostream& out, std::span<const AllocationDecision> decisions) {
    out << "timestamp,chosen_timeframe,forced_flag,span_bars,span_log_return\n";
    for (const auto& d : decisions)
        out << format_timestamp(d.timestamp) << ',' << label(d.chosen) << ',' << (d.forced ? 1 : 0) << ','
            << d.span_bars << ',' << shortest(d.span_log_return) << '\n';
}

std::vector<AllocationDecision> read_allocation_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open allocation log '{}'", path.string()));
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("timestamp,chosen_timeframe,forced_flag,span_bars"))
        throw DataError(fmt::format("{}: missing allocation log header", path.string()));
    std::vector<AllocationDecision> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cols = split_commas(line);
        auto fail = [&](std::string_view why) {
            throw DataError(fmt::format("{}: row {}: {}", path.string(), line_no, why));
        };
        if (cols.size() != 5) fail("expected 5 columns");
        AllocationDecision d;
        try {
            d.timestamp = parse_timestamp(cols[0]);
            d.chosen = parse_timeframe(cols[1]);
        } catch (const Error& e) {
            fail(e.what());
        }
        if (cols[2] != "0" && cols[2] != "1") fail("forced_flag must be 0 or 1");
        d.forced = cols[2] == "1";
        auto [p1, e1] = std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), d.span_bars);
        auto [p2, e2] = std::from_chars(cols[4].data(), cols[4].data() + cols[4].size(), d.span_log_return);
        if (e1 != std::errc{} || e2 != std::errc{}) fail("non-numeric span field");
        out.push_back(d);
    }
    return out;
}

HierarchicalEnv::HierarchicalEnv(std::shared_ptr<const MarketSeries> market,
                                 std::shared_ptr<const AgentRegistry> registry, AllocatorConfig config,
                                 std::size_t first_session, std::size_t end_session)
    : market_(std::move(market)), registry_(std::move(registry)), config_(config) {
    if (!market_ || !registry_) throw EnvError("hierarchy needs market data and an agent registry");
    if (first_session >= end_session || end_session > market_->sessions.size())
        throw EnvError(fmt::format("session range [{}, {}) is empty or beyond the {} available sessions",
                                   first_session, end_session, market_->sessions.size()));
    if (!registry_->has(Timeframe::OneMinute)) throw EnvError("the 1m agent must be registered");
    if (config_.market_window == 0 || config_.volatility_window < 2)
        throw ConfigError("allocator market_window must be >= 1 and volatility_window >= 2");
    start_ = market_->session_first_base[first_session];
    end_ = market_->session_first_base[end_session - 1] + market_->sessions[end_session - 1].bars.size() - 1;

    if (start_ < first_observable_index(config_.market_window) || start_ < config_.volatility_window)
        throw EnvError(fmt::format("insufficient warmup: allocator needs {} 1m bars before the first decision, have {}",
                                   std::max(first_observable_index(config_.market_window), config_.volatility_window),
                                   start_));
    for (Timeframe tf : kTimeframes) {
        if (!registry_->has(tf)) continue;
        const std::size_t need = first_observable_index(registry_->at(tf).env.window_size);
        const std::ptrdiff_t have = completed_bar(tf, start_);
        if (have < static_cast<std::ptrdiff_t>(need))
            throw EnvError(fmt::format("insufficient warmup: {} agent needs {} completed bars before the first "
                                       "decision, have {}",
                                       label(tf), need + 1, have + 1));
    }
}

std::optional<std::size_t> HierarchicalEnv::first_ready_session(const MarketSeries& market,
                                                                const AgentRegistry& registry,
                                                                const AllocatorConfig& config, std::size_t from) {
    for (std::size_t s = from; s < market.sessions.size(); ++s) {
        const std::size_t start = market.session_first_base[s];
        if (start < first_observable_index(config.market_window) || start < config.volatility_window) continue;
        bool ready = true;
        for (Timeframe tf : kTimeframes) {
            if (!registry.has(tf)) continue;
            const auto& last_base = market.at(tf).last_base;
            auto completed = std::upper_bound(last_base.begin(), last_base.end(), start) - last_base.begin() - 1;
            if (completed < static_cast<std::ptrdiff_t>(first_observable_index(registry.at(tf).env.window_size)))
                ready = false;
        }
        if (ready) return s;
    }
    return std::nullopt;
}

std::ptrdiff_t HierarchicalEnv::completed_bar(Timeframe tf, std::size_t base_index) const {
    const auto& last_base = market_->at(tf).last_base;
    return std::upper_bound(last_base.begin(), last_base.end(), base_index) - last_base.begin() - 1;
}

std::vector<double> HierarchicalEnv::agent_observation(Timeframe tf, std::size_t base_index) const {
    const TimeframeSeries& series = market_->at(tf);
    const std::size_t window = registry_->at(tf).env.window_size;
    const auto end = static_cast<std::size_t>(completed_bar(tf, base_index));
    std::vector<PortfolioFeatures> rows;
    rows.reserve(window);
    for (std::size_t r = end + 1 - window; r <= end; ++r) {
        const std::size_t b = series.last_base[r];
        rows.push_back(b >= start_ ? feature_history_[b - start_] : initial_features_);
    }
    std::vector<double> obs;
    build_observation(series, end, window, rows, obs);
    return obs;
}

std::vector<double> HierarchicalEnv::allocator_observation(std::size_t b) const {
    const TimeframeSeries& base = market_->base();
    std::vector<double> obs;
    obs.reserve(config_.observation_size());
    append_market_rows(base, b, config_.market_window, obs);

    PortfolioFeatures pf = features(portfolio_);
    obs.push_back(pf.cash_ratio);
    obs.push_back(pf.stock_ratio);
    obs.push_back(std::clamp(pf.unrealized_profit_ratio, -1.0, 1.0));

    const std::size_t n = config_.volatility_window;
    double mean = 0.0;
    std::vector<double> returns(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = b + 1 - n + k;
        returns[k] = base.bars[i].close / base.bars[i - 1].close - 1.0;
        mean += returns[k];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    obs.push_back(std::sqrt(var / static_cast<double>(n - 1)) * 100.0);

    for (double r : last_agent_reward_) obs.push_back(r);
    for (Timeframe tf : kTimeframes) obs.push_back(last_active_ == tf ? 1.0 : 0.0);
    return obs;
}

std::vector<double> HierarchicalEnv::reset() {
    const TimeframeSeries& base = market_->base();
    cursor_ = start_;
    done_ = false;
    portfolio_ = PortfolioState::with_cash(config_.initial_cash, base.bars[start_].close, config_.fee_per_sell_share);
    initial_features_ = features(portfolio_);
    feature_history_.assign(1, initial_features_);
    equity_.assign(1, portfolio_.total_value());
    trades_.clear();
    decisions_.clear();
    last_agent_reward_ = {};
    last_active_.reset();
    return allocator_observation(start_);
}

void HierarchicalEnv::mark_bar(std::size_t b) {
    portfolio_ = mark(portfolio_, market_->base().bars[b].close);
    feature_history_.push_back(features(portfolio_));
    equity_.push_back(portfolio_.total_value());
}

void HierarchicalEnv::liquidate(std::size_t b, Timeframe agent) {
    const Bar& bar = market_->base().bars[b];
    auto sold = sell_all(portfolio_, bar.close);
    portfolio_ = sold.state;
    if (!sold.trade) return;
    const double r = agent_reward(*sold.trade);
    last_agent_reward_[index_of(agent)] = r;
    trades_.push_back({bar.timestamp, Side::Sell, sold.trade->shares, bar.close, r});
}

HierStep HierarchicalEnv::hier_step(Timeframe choice) {
    if (done_) throw EnvError("hier_step called after the episode ended");
    if (!registry_->has(choice)) throw EnvError(fmt::format("no agent registered for timeframe {}", label(choice)));

    const TimeframeSeries& base = market_->base();
    const std::size_t s = cursor_;
    const std::size_t session = base.session[s];
    const std::size_t session_first = market_->session_first_base[session];
    const std::size_t session_last = session_first + market_->sessions[session].bars.size() - 1;
    const bool forced = s == session_first;
    const Timeframe chosen = forced ? Timeframe::OneMinute : choice;
    const double v_start = portfolio_.total_value();

    const AgentSlot& slot = registry_->at(chosen);
    auto action = static_cast<Action>(greedy_action(slot.params, agent_observation(chosen, s)));
    if (s == session_last && action == Action::Buy) action = Action::Hold;
    const Bar& bar = base.bars[s];
    if (action == Action::Buy) {
        auto bought = buy_all(portfolio_, bar.close);
        portfolio_ = bought.state;
        if (bought.shares_bought > 0) trades_.push_back({bar.timestamp, Side::Buy, bought.shares_bought, bar.close, 0.0});
    } else if (action == Action::Sell) {
        liquidate(s, chosen);
    }
    equity_[s - start_] = portfolio_.total_value();

    const std::size_t span_end = std::min(s + static_cast<std::size_t>(minutes_in(chosen)), session_last + 1);
    for (std::size_t b = s + 1; b <= std::min(s + static_cast<std::size_t>(minutes_in(chosen)), session_last); ++b) {
        mark_bar(b);
        if (b == session_last) {
            liquidate(b, chosen);
            equity_.back() = portfolio_.total_value();
        }
    }

    HierStep step;
    step.reward = allocator_reward(portfolio_.total_value(), v_start);
    step.decision = {bar.timestamp, chosen, forced, s, span_end - s, step.reward};
    decisions_.push_back(step.decision);
    last_active_ = chosen;

    cursor_ = span_end;
    if (cursor_ > end_) {
        done_ = true;
    } else if (cursor_ == session_last + 1) {
        mark_bar(cursor_);
    }
    step.done = done_;
    step.observation = allocator_observation(done_ ? end_ : cursor_);
    return step;
}

Transition HierarchicalEnv::step(std::size_t action) {
    if (action >= kTimeframes.size()) throw EnvError(fmt::format("allocator action {} out of range", action));
    HierStep h = hier_step(kTimeframes[action]);
    return {std::move(h.observation), h.reward, h.done};
}

EquityCurve HierarchicalEnv::equity_curve() const {
    EquityCurve curve;
    curve.reserve(equity_.size());
    for (std::size_t i = 0; i < equity_.size(); ++i)
        curve.push_back({market_->base().bars[start_ + i].timestamp, equity_[i]});
    return curve;
}

BacktestReport run_hierarchy(std::shared_ptr<const AgentRegistry> registry, const PolicyParameters& allocator,
                             std::shared_ptr<const MarketSeries> market, std::size_t first_session,
                             std::size_t end_session, const AllocatorConfig& config) {
    if (!registry->complete()) throw EnvError("hierarchy backtest needs agents for 1m, 10m and 1h");
    HierarchicalEnv env(std::move(market), std::move(registry), config, first_session, end_session);
    std::vector<double> obs = env.reset();
    while (!env.done()) {
        const std::size_t action = greedy_action(allocator, obs);
        obs = env.hier_step(kTimeframes[action]).observation;
    }
    return {env.equity_curve(), env.trades(), env.decisions()};
}

BacktestReport run_agent(const AgentSlot& agent, std::shared_ptr<const MarketSeries> market,
                         std::size_t first_session, std::size_t end_session) {
    if (first_session >= end_session || end_session > market->sessions.size())
        throw EnvError(fmt::format("session range [{}, {}) is empty or beyond the {} available sessions",
                                   first_session, end_session, market->sessions.size()));
    const Timeframe tf = agent.env.timeframe;
    std::shared_ptr<const TimeframeSeries> series(market, &market->at(tf));
    const auto& owner = series->session;
    const auto first = static_cast<std::size_t>(std::lower_bound(owner.begin(), owner.end(), first_session) - owner.begin());
    const auto last =
        static_cast<std::size_t>(std::lower_bound(owner.begin(), owner.end(), end_session) - owner.begin()) - 1;
    if (first < first_observable_index(agent.env.window_size))
        throw EnvError(fmt::format("insufficient warmup: {} agent needs {} bars before the first decision, have {}",
                                   label(tf), first_observable_index(agent.env.window_size), first));

    TradingEnv env(series, agent.env, first, last);
    std::vector<double> obs = env.reset();
    BacktestReport report;
    report.equity.push_back({series->bars[first].timestamp, env.portfolio().total_value()});
    while (!env.done()) {
        auto result = env.step(static_cast<Action>(greedy_action(agent.params, obs)));
        report.equity.push_back({series->bars[env.cursor()].timestamp, result.info.portfolio_value});
        obs = std::move(result.observation);
    }
    report.trades = env.trades();
    return report;
}

} // namespace hitrade
