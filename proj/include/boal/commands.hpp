#pragma once

// Implementations of the `boal` subcommands. Each returns the process exit
// status: 0 success, 1 usage/configuration error, 2 runtime failure.

#include "boal/config.hpp"

#include <iosfwd>
#include <string>

namespace boal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Writes prior_episodes.csv, eval_episodes.csv, experts/<id>.csv,
/// target/<id>.csv and models.json into the output directory.
int cmd_bench(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Protocol run: results.csv, summary.json and an RMSE grid on `out`.
int cmd_run(const RunConfig& config, int jobs, std::ostream& out, std::ostream& err);

/// Score comparison: scores.csv, scores.json and a score grid on `out`.
int cmd_scores(const RunConfig& config, int jobs, std::ostream& out, std::ostream& err);

/// Runs the advisor service until it is stopped.
int cmd_serve(const RunConfig& config, std::ostream& out, std::ostream& err);

/// One row per problem: Base, then budget groups of the querying strategies.
/// A '*' marks a significant difference from Base.
std::string format_rmse_grid(const ProtocolResult& result, const std::string& label);

/// Budget groups of the strategies plus the hindsight Max column.
std::string format_score_grid(const ScoreStudy& study, const std::string& label);

} // namespace boal
