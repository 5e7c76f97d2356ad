#include "hitrade/config.hpp"

#include "hitrade/error.hpp"

#include <charconv>
#include <functional>
#include <map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace hitrade {

namespace {

PpoHyperparams make_hp(std::uint64_t total, double lr, std::size_t n_steps, std::size_t batch, double entropy) {
    PpoHyperparams hp;
    hp.total_timesteps = total;
    hp.learning_rate = lr;
    hp.n_steps = n_steps;
    hp.batch_size = batch;
    hp.n_epochs = 10;
    hp.gamma = 0.99;
    hp.gae_lambda = 0.95;
    hp.clip_range = 0.2;
    hp.entropy_coef = entropy;
    return hp;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError(fmt::format("invalid value for '{}': '{}'", key, text));
    return value;
}

std::chrono::minutes parse_clock(const std::string& key, const std::string& text) {
    if (text.size() != 5 || text[2] != ':') throw ConfigError(fmt::format("invalid value for '{}': '{}'", key, text));
    int h = parse_number<int>(key, text.substr(0, 2));
    int m = parse_number<int>(key, text.substr(3, 2));
    if (h > 23 || m > 59) throw ConfigError(fmt::format("invalid value for '{}': '{}'", key, text));
    return std::chrono::hours{h} + std::chrono::minutes{m};
}

Date parse_config_date(const std::string& key, const std::string& text) {
    try {
        return parse_date(text);
    } catch (const DataError&) {
        throw ConfigError(fmt::format("invalid value for '{}': '{}'", key, text));
    }
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

void add_hp_keys(std::map<std::string, Setter>& keys, const std::string& section, PpoHyperparams& hp) {
    keys[section + ".total_timesteps"] = [&hp](auto& k, auto& v) { hp.total_timesteps = parse_number<std::uint64_t>(k, v); };
    keys[section + ".learning_rate"] = [&hp](auto& k, auto& v) { hp.learning_rate = parse_number<double>(k, v); };
    keys[section + ".n_steps"] = [&hp](auto& k, auto& v) { hp.n_steps = parse_number<std::size_t>(k, v); };
    keys[section + ".batch_size"] = [&hp](auto& k, auto& v) { hp.batch_size = parse_number<std::size_t>(k, v); };
    keys[section + ".n_epochs"] = [&hp](auto& k, auto& v) { hp.n_epochs = parse_number<std::size_t>(k, v); };
    keys[section + ".gamma"] = [&hp](auto& k, auto& v) { hp.gamma = parse_number<double>(k, v); };
    keys[section + ".gae_lambda"] = [&hp](auto& k, auto& v) { hp.gae_lambda = parse_number<double>(k, v); };
    keys[section + ".clip_range"] = [&hp](auto& k, auto& v) { hp.clip_range = parse_number<double>(k, v); };
    keys[section + ".entropy_coef"] = [&hp](auto& k, auto& v) { hp.entropy_coef = parse_number<double>(k, v); };
    keys[section + ".value_coef"] = [&hp](auto& k, auto& v) { hp.value_coef = parse_number<double>(k, v); };
    keys[section + ".max_grad_norm"] = [&hp](auto& k, auto& v) { hp.max_grad_norm = parse_number<double>(k, v); };
}

} // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.train = {parse_date("2013-01-02"), parse_date("2022-12-31")};
    c.validation = {parse_date("2023-01-02"), parse_date("2023-12-31")};
    c.test = {parse_date("2024-01-02"), parse_date("2025-05-02")};

    AgentSettings& a1m = c.agents[index_of(Timeframe::OneMinute)];
    a1m.hp = make_hp(500000, 5e-5, 4096, 128, 0.01);
    a1m.env = EnvConfig::defaults(Timeframe::OneMinute);
    a1m.hidden = 256;

    AgentSettings& a10m = c.agents[index_of(Timeframe::TenMinute)];
    a10m.hp = make_hp(200000, 1e-4, 2048, 128, 0.03);
    a10m.env = EnvConfig::defaults(Timeframe::TenMinute);
    a10m.hidden = 64;

    AgentSettings& a1h = c.agents[index_of(Timeframe::OneHour)];
    a1h.hp = make_hp(150000, 1e-4, 1024, 64, 0.01);
    a1h.env = EnvConfig::defaults(Timeframe::OneHour);
    a1h.hidden = 256;

    c.allocator.hp = make_hp(300000, 3e-4, 2048, 256, 0.005);
    c.allocator.hidden = 64;
    return c;
}

NetworkSpec RunConfig::agent_network(Timeframe tf) const {
    const AgentSettings& a = agent(tf);
    return {a.env.observation_size(), a.hidden, a.hidden, kActionCount};
}

NetworkSpec RunConfig::allocator_network() const {
    return {allocator.config.observation_size(), allocator.hidden, allocator.hidden, 3};
}

void RunConfig::finalize() {
    if (!(fee_per_sell_share >= 0.0)) throw ConfigError("'run.fee_per_sell_share' must be non-negative");
    for (Timeframe tf : kTimeframes) {
        AgentSettings& a = agents[index_of(tf)];
        const std::string section = fmt::format("agent_{}", label(tf));
        a.env.timeframe = tf;
        a.env.fee_per_sell_share = fee_per_sell_share;
        try {
            a.hp.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("'{}': {}", section, e.what()));
        }
        if (a.env.window_size == 0) throw ConfigError(fmt::format("'{}.window_size' must be positive", section));
        if (!(a.env.initial_cash > 0.0)) throw ConfigError(fmt::format("'{}.initial_cash' must be positive", section));
        if (a.hidden == 0) throw ConfigError(fmt::format("'{}.hidden' must be positive", section));
    }
    try {
        allocator.hp.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("'allocator': {}", e.what()));
    }
    allocator.config.fee_per_sell_share = fee_per_sell_share;
    if (allocator.config.market_window == 0) throw ConfigError("'allocator.market_window' must be positive");
    if (allocator.config.volatility_window < 2) throw ConfigError("'allocator.volatility_window' must be at least 2");
    if (!(allocator.config.initial_cash > 0.0)) throw ConfigError("'allocator.initial_cash' must be positive");
    if (allocator.hidden == 0) throw ConfigError("'allocator.hidden' must be positive");

    if (train.last < train.first) throw ConfigError("'split.train_end' is before 'split.train_start'");
    if (validation.last < validation.first)
        throw ConfigError("'split.validation_end' is before 'split.validation_start'");
    if (test.last < test.first) throw ConfigError("'split.test_end' is before 'split.test_start'");
    if (validation.first <= train.last) throw ConfigError("'split.validation_start' must come after 'split.train_end'");
    if (test.first <= validation.last) throw ConfigError("'split.test_start' must come after 'split.validation_end'");

    if (data.kind == DataSource::Kind::Csv) {
        if (data.csv.empty()) throw ConfigError("'data.csv' is required when 'data.source' is csv");
        if (!std::filesystem::exists(data.csv))
            throw ConfigError(fmt::format("'data.csv': file '{}' does not exist", data.csv.string()));
        if (data.calendar.empty()) throw ConfigError("'data.calendar' is required when 'data.source' is csv");
        if (!std::filesystem::exists(data.calendar))
            throw ConfigError(fmt::format("'data.calendar': file '{}' does not exist", data.calendar.string()));
    } else {
        if (data.synth_days == 0) throw ConfigError("'synthetic.days' must be positive");
        for (std::size_t r = 0; r < 2; ++r) {
            const auto& row = data.synth.transition[r];
            if (row[0] < 0.0 || row[1] < 0.0 || std::abs(row[0] + row[1] - 1.0) > 1e-9)
                throw ConfigError(fmt::format("'synthetic.{}' transition row must be non-negative and sum to 1",
                                              r == 0 ? "p_low_low/p_low_high" : "p_high_low/p_high_high"));
        }
    }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("config file '{}' does not exist", path.string()));
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.message()));
    }

    RunConfig c = defaults();
    const std::filesystem::path base = path.parent_path();
    auto resolve = [&base](const std::string& p) {
        std::filesystem::path fp(p);
        return (fp.is_absolute() || base.empty() ? fp : base / fp).lexically_normal();
    };

    std::map<std::string, Setter> keys;
    keys["run.seed"] = [&](auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); };
    keys["run.out"] = [&](auto&, auto& v) { c.out = resolve(v); };
    keys["run.fee_per_sell_share"] = [&](auto& k, auto& v) { c.fee_per_sell_share = parse_number<double>(k, v); };

    keys["data.source"] = [&](auto& k, auto& v) {
        if (v == "synthetic") c.data.kind = DataSource::Kind::Synthetic;
        else if (v == "csv") c.data.kind = DataSource::Kind::Csv;
        else throw ConfigError(fmt::format("invalid value for '{}': '{}' (expected synthetic or csv)", k, v));
    };
    keys["data.csv"] = [&](auto&, auto& v) { c.data.csv = resolve(v); };
    keys["data.calendar"] = [&](auto&, auto& v) { c.data.calendar = resolve(v); };

    SynthConfig& s = c.data.synth;
    keys["synthetic.seed"] = [&](auto& k, auto& v) { c.data.synth_seed = parse_number<std::uint64_t>(k, v); };
    keys["synthetic.days"] = [&](auto& k, auto& v) { c.data.synth_days = parse_number<std::size_t>(k, v); };
    keys["synthetic.start_date"] = [&](auto& k, auto& v) { s.start_date = parse_config_date(k, v); };
    keys["synthetic.initial_price"] = [&](auto& k, auto& v) { s.initial_price = parse_number<double>(k, v); };
    keys["synthetic.base_volume"] = [&](auto& k, auto& v) { s.base_volume = parse_number<double>(k, v); };
    keys["synthetic.session_minutes"] = [&](auto& k, auto& v) {
        s.session_length = std::chrono::minutes{parse_number<int>(k, v)};
    };
    keys["synthetic.open_utc"] = [&](auto& k, auto& v) { s.open_utc = parse_clock(k, v); };
    keys["synthetic.low_drift"] = [&](auto& k, auto& v) { s.low.drift = parse_number<double>(k, v); };
    keys["synthetic.low_volatility"] = [&](auto& k, auto& v) { s.low.volatility = parse_number<double>(k, v); };
    keys["synthetic.high_drift"] = [&](auto& k, auto& v) { s.high.drift = parse_number<double>(k, v); };
    keys["synthetic.high_volatility"] = [&](auto& k, auto& v) { s.high.volatility = parse_number<double>(k, v); };
    keys["synthetic.p_low_low"] = [&](auto& k, auto& v) { s.transition[0][0] = parse_number<double>(k, v); };
    keys["synthetic.p_low_high"] = [&](auto& k, auto& v) { s.transition[0][1] = parse_number<double>(k, v); };
    keys["synthetic.p_high_low"] = [&](auto& k, auto& v) { s.transition[1][0] = parse_number<double>(k, v); };
    keys["synthetic.p_high_high"] = [&](auto& k, auto& v) { s.transition[1][1] = parse_number<double>(k, v); };

    keys["split.train_start"] = [&](auto& k, auto& v) { c.train.first = parse_config_date(k, v); };
    keys["split.train_end"] = [&](auto& k, auto& v) { c.train.last = parse_config_date(k, v); };
    keys["split.validation_start"] = [&](auto& k, auto& v) { c.validation.first = parse_config_date(k, v); };
    keys["split.validation_end"] = [&](auto& k, auto& v) { c.validation.last = parse_config_date(k, v); };
    keys["split.test_start"] = [&](auto& k, auto& v) { c.test.first = parse_config_date(k, v); };
    keys["split.test_end"] = [&](auto& k, auto& v) { c.test.last = parse_config_date(k, v); };

    for (Timeframe tf : kTimeframes) {
        const std::string section = fmt::format("agent_{}", label(tf));
        AgentSettings& a = c.agents[index_of(tf)];
        add_hp_keys(keys, section, a.hp);
        keys[section + ".hidden"] = [&a](auto& k, auto& v) { a.hidden = parse_number<std::size_t>(k, v); };
        keys[section + ".window_size"] = [&a](auto& k, auto& v) { a.env.window_size = parse_number<std::size_t>(k, v); };
        keys[section + ".initial_cash"] = [&a](auto& k, auto& v) { a.env.initial_cash = parse_number<double>(k, v); };
    }
    add_hp_keys(keys, "allocator", c.allocator.hp);
    keys["allocator.hidden"] = [&](auto& k, auto& v) { c.allocator.hidden = parse_number<std::size_t>(k, v); };
    keys["allocator.market_window"] = [&](auto& k, auto& v) {
        c.allocator.config.market_window = parse_number<std::size_t>(k, v);
    };
    keys["allocator.volatility_window"] = [&](auto& k, auto& v) {
        c.allocator.config.volatility_window = parse_number<std::size_t>(k, v);
    };
    keys["allocator.initial_cash"] = [&](auto& k, auto& v) {
        c.allocator.config.initial_cash = parse_number<double>(k, v);
    };

    for (const auto& [section, children] : tree) {
        if (children.empty() && !children.data().empty())
            throw ConfigError(fmt::format("key '{}' must live inside a [section]", section));
        for (const auto& [name, node] : children) {
            const std::string key = section + "." + name;
            auto it = keys.find(key);
            if (it == keys.end()) throw ConfigError(fmt::format("unknown key '{}'", key));
            it->second(key, node.data());
        }
    }
    c.finalize();
    return c;
}

} // namespace hitrade
