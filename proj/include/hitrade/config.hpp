#pragma once

#include "hitrade/allocator.hpp"
#include "hitrade/market_data.hpp"
#include "hitrade/network.hpp"
#include "hitrade/ppo.hpp"
#include "hitrade/trading_env.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hitrade {

struct DateRange {
    Date first;
    Date last;
};

struct DataSource {
    enum class Kind : std::uint8_t { Synthetic, Csv };
    Kind kind = Kind::Synthetic;
    std::filesystem::path csv;
    std::filesystem::path calendar;
    SynthConfig synth;
    std::uint64_t synth_seed = 7;
    std::size_t synth_days = 120;
};

struct AgentSettings {
    PpoHyperparams hp;
    EnvConfig env;
    std::size_t hidden = 64; // width of both hidden layers
};

struct AllocatorSettings {
    PpoHyperparams hp;
    AllocatorConfig config;
    std::size_t hidden = 64;
};

struct RunConfig {
    DataSource data;
    DateRange train;
    DateRange validation;
    DateRange test;
    std::array<AgentSettings, 3> agents; // indexed by timeframe
    AllocatorSettings allocator;
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    double fee_per_sell_share = 0.0;

    // Hyperparameters of the published setup (per-timeframe PPO settings, windows,
    // network widths, $10,000 starting cash).
    static RunConfig defaults();

    // INI file with sections run, data, synthetic, split, agent_1m, agent_10m,
    // agent_1h and allocator. Unknown keys and bad values raise ConfigError naming
    // the key. Relative paths resolve against the config file's directory.
    static RunConfig load(const std::filesystem::path& path);

    const AgentSettings& agent(Timeframe tf) const { return agents[index_of(tf)]; }
    NetworkSpec agent_network(Timeframe tf) const;
    NetworkSpec allocator_network() const;

    // Applies fee_per_sell_share to every env and checks cross-field rules.
    void finalize();
};

} // namespace hitrade
