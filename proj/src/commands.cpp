#include "hitrade/commands.hpp"

#include "hitrade/checkpoint.hpp"
#include "hitrade/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

namespace hitrade {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    return out;
}

std::string range_text(const DateRange& r) { return fmt::format("{}..{}", format_date(r.first), format_date(r.last)); }

std::vector<Session> range_sessions(std::span<const Session> all, const DateRange& range, std::string_view name) {
    auto picked = sessions_between(all, range.first, range.last);
    if (picked.empty()) throw DataError(fmt::format("no market data in the {} range {}", name, range_text(range)));
    return picked;
}

// Sessions up to the end of `range`, plus the index of the first one inside it.
std::pair<std::vector<Session>, std::size_t> sessions_through(std::span<const Session> all, const DateRange& range,
                                                             std::string_view name) {
    std::vector<Session> kept;
    std::size_t first = 0;
    bool any = false;
    for (const Session& s : all) {
        if (s.hours.date > range.last) break;
        if (s.hours.date < range.first) {
            ++first;
        } else {
            any = true;
        }
        kept.push_back(s);
    }
    if (!any) throw DataError(fmt::format("no market data in the {} range {}", name, range_text(range)));
    return {std::move(kept), first};
}

std::string role_of(Timeframe tf) { return std::string(label(tf)); }

AgentSlot load_agent(const RunConfig& config, Timeframe tf) {
    const fs::path path = agent_checkpoint_path(config, tf);
    if (!fs::exists(path)) throw CheckpointError(fmt::format("missing checkpoint: {}", label(tf)));
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.role != role_of(tf))
        throw CheckpointError(fmt::format("{}: holds role '{}', expected '{}'", path.string(), ckpt.role, label(tf)));
    if (ckpt.params.spec() != config.agent_network(tf))
        throw CheckpointError(fmt::format("{}: network shape does not match the [agent_{}] settings", path.string(),
                                          label(tf)));
    return {std::move(ckpt.params), config.agent(tf).env};
}

std::shared_ptr<AgentRegistry> load_registry(const RunConfig& config) {
    auto registry = std::make_shared<AgentRegistry>();
    for (Timeframe tf : kTimeframes) registry->add(load_agent(config, tf));
    return registry;
}

void write_curve_log(const fs::path& path, const TrainResult& result) {
    auto out = open_output(path);
    write_training_curve(out, result.curve);
}

std::string slug_of(const std::string& strategy) {
    if (strategy == "hierarchy" || strategy == "buyhold") return strategy;
    if (strategy.rfind("agent:", 0) == 0) return "agent_" + std::string(label(parse_timeframe(strategy.substr(6))));
    throw ConfigError(fmt::format("unknown strategy '{}' (expected hierarchy, agent:<1m|10m|1h> or buyhold)", strategy));
}

constexpr std::array<std::string_view, 5> kReportSlugs{"hierarchy", "agent_1m", "agent_10m", "agent_1h", "buyhold"};

} // namespace

std::vector<Session> load_sessions(const RunConfig& config) {
    if (config.data.kind == DataSource::Kind::Synthetic)
        return synthesize(config.data.synth, config.data.synth_seed, config.data.synth_days).sessions;
    const SessionCalendar calendar = SessionCalendar::load(config.data.calendar);
    return ingest_csv(config.data.csv, calendar).sessions;
}

fs::path checkpoint_dir(const RunConfig& config) { return config.out / "checkpoints"; }
fs::path log_dir(const RunConfig& config) { return config.out / "logs"; }
fs::path report_dir(const RunConfig& config) { return config.out / "reports"; }

fs::path agent_checkpoint_path(const RunConfig& config, Timeframe tf) {
    return checkpoint_dir(config) / fmt::format("agent_{}_seed{}.ckpt", label(tf), config.seed);
}

fs::path allocator_checkpoint_path(const RunConfig& config) {
    return checkpoint_dir(config) / fmt::format("allocator_seed{}.ckpt", config.seed);
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
    const SyntheticMarket market = synthesize(config.data.synth, config.data.synth_seed, config.data.synth_days);
    const fs::path dir = config.out / "data";
    {
        auto out = open_output(dir / "synthetic_bars.csv");
        write_csv(out, market.sessions);
    }
    std::vector<SessionHours> hours;
    for (const Session& s : market.sessions) hours.push_back(s.hours);
    SessionCalendar(std::move(hours)).save(dir / "calendar.csv");
    {
        auto out = open_output(dir / "regimes.csv");
        out << "date,regime\n";
        for (std::size_t i = 0; i < market.sessions.size(); ++i)
            out << format_date(market.sessions[i].hours.date) << ','
                << (market.session_regimes[i] == Regime::High ? "high" : "low") << '\n';
    }
    log << fmt::format("synth: {} sessions written to {}\n", market.sessions.size(), dir.string());
}

IngestResult cmd_ingest(const RunConfig& config, std::ostream& log) {
    IngestResult result;
    if (config.data.kind == DataSource::Kind::Synthetic) {
        result.sessions = load_sessions(config);
    } else {
        result = ingest_csv(config.data.csv, SessionCalendar::load(config.data.calendar));
    }
    std::size_t bars = 0;
    for (const Session& s : result.sessions) bars += s.bars.size();
    const fs::path path = config.out / "data" / "bars.csv";
    {
        auto out = open_output(path);
        write_csv(out, result.sessions);
    }
    log << fmt::format("ingest: {} sessions, {} bars, {} rows outside session hours dropped\n",
                       result.sessions.size(), bars, result.dropped_rows);
    for (const auto& [name, range] : {std::pair{"train", config.train}, std::pair{"validation", config.validation},
                                      std::pair{"test", config.test}})
        log << fmt::format("  {}: {} sessions in {}\n", name,
                           sessions_between(result.sessions, range.first, range.last).size(), range_text(range));
    return result;
}

fs::path cmd_train_agent(const RunConfig& config, Timeframe tf, bool force, std::ostream& log) {
    const fs::path path = agent_checkpoint_path(config, tf);
    if (fs::exists(path) && !force)
        throw CheckpointError(fmt::format("checkpoint '{}' already exists; pass --force to overwrite", path.string()));

    auto market = MarketSeries::build(range_sessions(load_sessions(config), config.train, "train"));
    std::shared_ptr<const TimeframeSeries> series(market, &market->at(tf));
    const AgentSettings& settings = config.agent(tf);
    const std::size_t needed = first_observable_index(settings.env.window_size) + 2;
    if (series->size() < needed)
        throw DataError(fmt::format("train range {} has {} bars of {} data; the {} agent needs at least {}",
                                    range_text(config.train), series->size(), label(tf), label(tf), needed));

    const EnvConfig env = settings.env;
    EnvFactory factory = [series, env] { return std::make_unique<TradingEnv>(series, env); };
    TrainResult result = train(factory, config.agent_network(tf), settings.hp, config.seed);

    fs::create_directories(path.parent_path());
    save_checkpoint(path, {role_of(tf), settings.hp, config.seed, result.params});
    write_curve_log(log_dir(config) / fmt::format("train_{}_seed{}.csv", label(tf), config.seed), result);
    log << fmt::format("train-agent {}: {} updates, checkpoint {}\n", label(tf), result.curve.size(), path.string());
    return path;
}

fs::path cmd_train_allocator(const RunConfig& config, bool force, std::ostream& log) {
    const fs::path path = allocator_checkpoint_path(config);
    if (fs::exists(path) && !force)
        throw CheckpointError(fmt::format("checkpoint '{}' already exists; pass --force to overwrite", path.string()));

    std::shared_ptr<const AgentRegistry> registry = load_registry(config);
    auto market = MarketSeries::build(range_sessions(load_sessions(config), config.train, "train"));
    const AllocatorConfig alloc = config.allocator.config;
    const auto first = HierarchicalEnv::first_ready_session(*market, *registry, alloc);
    if (!first)
        throw DataError(fmt::format("train range {} is too short to warm up every agent window",
                                    range_text(config.train)));
    const std::size_t end = market->sessions.size();

    EnvFactory factory = [market, registry, alloc, first, end] {
        return std::make_unique<HierarchicalEnv>(market, registry, alloc, *first, end);
    };
    TrainResult result = train(factory, config.allocator_network(), config.allocator.hp, config.seed);

    fs::create_directories(path.parent_path());
    save_checkpoint(path, {"allocator", config.allocator.hp, config.seed, result.params});
    write_curve_log(log_dir(config) / fmt::format("train_allocator_seed{}.csv", config.seed), result);
    log << fmt::format("train-allocator: {} updates over {} sessions, checkpoint {}\n", result.curve.size(),
                       end - *first, path.string());
    return path;
}

MetricsReport cmd_backtest(const RunConfig& config, const std::string& strategy, std::ostream& log) {
    const std::string slug = slug_of(strategy);
    auto [sessions, first] = sessions_through(load_sessions(config), config.test, "test");
    const std::size_t end = sessions.size();

    BacktestReport report;
    if (slug == "buyhold") {
        std::span<const Session> test(sessions.data() + first, end - first);
        report.equity = buy_and_hold(test, config.allocator.config.initial_cash);
    } else if (slug == "hierarchy") {
        const fs::path alloc_path = allocator_checkpoint_path(config);
        if (!fs::exists(alloc_path)) throw CheckpointError("missing checkpoint: allocator");
        std::shared_ptr<const AgentRegistry> registry = load_registry(config);
        Checkpoint alloc = load_checkpoint(alloc_path);
        if (alloc.role != "allocator" || alloc.params.spec() != config.allocator_network())
            throw CheckpointError(fmt::format("{}: not an allocator matching the [allocator] settings",
                                              alloc_path.string()));
        auto market = MarketSeries::build(std::move(sessions));
        report = run_hierarchy(registry, alloc.params, market, first, end, config.allocator.config);
    } else {
        const Timeframe tf = parse_timeframe(strategy.substr(6));
        AgentSlot agent = load_agent(config, tf);
        auto market = MarketSeries::build(std::move(sessions));
        report = run_agent(agent, market, first, end);
    }

    const MetricsReport metrics = compute_metrics(sample_daily(report.equity), 252.0);
    const fs::path dir = report_dir(config);
    {
        auto out = open_output(dir / (slug + "_equity.csv"));
        write_equity_curve(out, report.equity);
    }
    {
        auto out = open_output(dir / (slug + "_trades.csv"));
        write_trade_log(out, report.trades);
    }
    if (slug == "hierarchy") {
        auto out = open_output(dir / (slug + "_allocations.csv"));
        write_allocation_log(out, report.decisions);
    }
    {
        auto out = open_output(dir / (slug + "_metrics.json"));
        write_metrics_json(out, slug, metrics);
    }
    const std::pair<std::string, MetricsReport> row{slug, metrics};
    const std::string table = metrics_table(std::span(&row, 1));
    {
        auto out = open_output(dir / (slug + "_metrics.txt"));
        out << table;
    }
    log << table;
    return metrics;
}

QuartileAllocationReport cmd_analyze(const RunConfig& config, Granularity granularity,
                                     const std::optional<fs::path>& allocation_log, std::ostream& log) {
    const fs::path path = allocation_log.value_or(report_dir(config) / "hierarchy_allocations.csv");
    if (!fs::exists(path)) throw DataError(fmt::format("allocation log '{}' does not exist", path.string()));
    const std::vector<AllocationDecision> decisions = read_allocation_log(path);
    if (decisions.empty()) throw DataError(fmt::format("allocation log '{}' has no decisions", path.string()));

    const std::vector<Session> sessions = range_sessions(load_sessions(config), config.test, "test");
    const Timestamp data_first = sessions.front().bars.front().timestamp;
    const Timestamp data_last = sessions.back().bars.back().timestamp;
    const Timestamp log_first = decisions.front().timestamp;
    const Timestamp log_last = decisions.back().timestamp;
    if (log_first < data_first || log_last > data_last)
        throw DataError(fmt::format("allocation log spans {}..{} but market data spans {}..{}",
                                    format_timestamp(log_first), format_timestamp(log_last),
                                    format_timestamp(data_first), format_timestamp(data_last)));

    QuartileAllocationReport report = quartile_allocation(decisions, sessions, granularity);
    const fs::path dir = report_dir(config);
    const std::string stem = fmt::format("quartiles_{}", label(granularity));
    {
        auto out = open_output(dir / (stem + ".json"));
        write_quartile_json(out, report);
    }
    const std::string table = quartile_table(report);
    {
        auto out = open_output(dir / (stem + ".txt"));
        out << table;
    }
    {
        auto out = open_output(dir / (stem + ".csv"));
        write_quartile_csv(out, report);
    }
    log << table;
    return report;
}

void cmd_report(const RunConfig& config, std::ostream& log) {
    const fs::path dir = report_dir(config);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    nlohmann::ordered_json all = nlohmann::ordered_json::array();
    for (std::string_view slug : kReportSlugs) {
        const fs::path path = dir / fmt::format("{}_metrics.json", slug);
        if (!fs::exists(path)) continue;
        std::ifstream in(path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        std::istringstream copy(buffer.str());
        rows.emplace_back(std::string(slug), read_metrics_json(copy));
        all.push_back(nlohmann::ordered_json::parse(buffer.str()));
    }
    if (rows.empty()) throw DataError(fmt::format("no backtest metrics found under '{}'", dir.string()));
    const std::string table = metrics_table(rows);
    {
        auto out = open_output(dir / "summary.txt");
        out << table;
    }
    {
        auto out = open_output(dir / "summary.json");
        out << all.dump(2) << '\n';
    }
    log << table;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical multi-timeframe trading: data, training, backtests and reports", "hitrade"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool force = false;
    app.add_option("--config", config_path, "INI run configuration")->required();
    app.add_option("--seed", seed, "override run.seed");
    app.add_option("--out", out_dir, "override run.out");
    app.add_flag("--force", force, "overwrite existing checkpoints");

    std::string timeframe;
    std::string strategy = "hierarchy";
    std::string granularity = "daily";
    std::optional<std::string> allocations;

    CLI::App* ingest = app.add_subcommand("ingest", "validate market data and write the cleaned bars");
    CLI::App* synth = app.add_subcommand("synth", "generate the two-regime synthetic market");
    CLI::App* train_agent = app.add_subcommand("train-agent", "train one time-frame agent");
    train_agent->add_option("--timeframe", timeframe, "1m, 10m or 1h")
        ->required()
        ->check(CLI::IsMember({"1m", "10m", "1h"}));
    CLI::App* train_alloc = app.add_subcommand("train-allocator", "train the allocator over frozen agents");
    CLI::App* backtest = app.add_subcommand("backtest", "run a strategy over the test range");
    backtest->add_option("--strategy", strategy, "hierarchy, agent:<tf> or buyhold");
    CLI::App* analyze = app.add_subcommand("analyze", "volatility-quartile allocation analysis");
    analyze->add_option("--granularity", granularity, "monthly, daily or hourly")
        ->check(CLI::IsMember({"monthly", "daily", "hourly"}));
    analyze->add_option("--allocations", allocations, "allocation log (default: reports/hierarchy_allocations.csv)");
    CLI::App* report = app.add_subcommand("report", "summarize every backtest's metrics");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::string message = e.what();
        std::replace(message.begin(), message.end(), '\n', ' ');
        err << "error: usage: " << message << '\n';
        return 2;
    }

    try {
        RunConfig config = RunConfig::load(config_path);
        if (seed) config.seed = *seed;
        if (out_dir) config.out = *out_dir;

        if (*ingest) {
            cmd_ingest(config, out);
        } else if (*synth) {
            cmd_synth(config, out);
        } else if (*train_agent) {
            cmd_train_agent(config, parse_timeframe(timeframe), force, out);
        } else if (*train_alloc) {
            cmd_train_allocator(config, force, out);
        } else if (*backtest) {
            cmd_backtest(config, strategy, out);
        } else if (*analyze) {
            std::optional<fs::path> log_path;
            if (allocations) log_path = *allocations;
            cmd_analyze(config, parse_granularity(granularity), log_path, out);
        } else if (*report) {
            cmd_report(config, out);
        }
        return 0;
    } catch (const Error& e) {
        std::string message = e.what();
        std::replace(message.begin(), message.end(), '\n', ' ');
        err << "error: " << e.code() << ": " << message << '\n';
    } catch (const std::exception& e) {
        std::string message = e.what();
        std::replace(message.begin(), message.end(), '\n', ' ');
        err << "error: internal: " << message << '\n';
    }
    return 1;
}

} // namespace hitrade
