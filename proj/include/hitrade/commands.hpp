#pragma once

#include "hitrade/allocator.hpp"
#include "hitrade/config.hpp"
#include "hitrade/evaluation.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hitrade {

// Every session of the configured source, sorted by date.
std::vector<Session> load_sessions(const RunConfig& config);

std::filesystem::path checkpoint_dir(const RunConfig& config);
std::filesystem::path log_dir(const RunConfig& config);
std::filesystem::path report_dir(const RunConfig& config);
std::filesystem::path agent_checkpoint_path(const RunConfig& config, Timeframe tf);
std::filesystem::path allocator_checkpoint_path(const RunConfig& config);

// Writes data/synthetic_bars.csv, data/calendar.csv and data/regimes.csv under out.
void cmd_synth(const RunConfig& config, std::ostream& log);

// Validates the source and writes the cleaned bars to data/bars.csv.
IngestResult cmd_ingest(const RunConfig& config, std::ostream& log);

// Trains one time-frame agent on the train range. Refuses to overwrite an
// existing checkpoint unless `force`.
std::filesystem::path cmd_train_agent(const RunConfig& config, Timeframe tf, bool force, std::ostream& log);

// Trains the allocator over the three frozen agents on the train range.
std::filesystem::path cmd_train_allocator(const RunConfig& config, bool force, std::ostream& log);

// strategy: "hierarchy", "agent:<tf>" or "buyhold". Runs over the test range and
// writes <slug>_equity.csv, <slug>_trades.csv, <slug>_metrics.{json,txt} and, for
// the hierarchy, <slug>_allocations.csv into reports/.
MetricsReport cmd_backtest(const RunConfig& config, const std::string& strategy, std::ostream& log);

// Quartile analysis of an allocation log against the test-range market data.
QuartileAllocationReport cmd_analyze(const RunConfig& config, Granularity granularity,
                                     const std::optional<std::filesystem::path>& allocation_log,
                                     std::ostream& log);

// Collects every *_metrics.json under reports/ into summary.txt and summary.json.
void cmd_report(const RunConfig& config, std::ostream& log);

// Full command-line entry point. Returns the process exit code; failures print
// "error: <code>: <message>" as a single line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hitrade
