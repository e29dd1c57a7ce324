#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace ercbf::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitInfeasible = 3,
    kExitDiverged = 4,
};

/// Command-line overrides on top of the config file.
struct CommandOptions {
    std::filesystem::path config;
    std::optional<std::string> controller;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<int> runs;
};

/// trajectory.csv + metrics.json
int cmd_run(const CommandOptions& opts);

/// trajectory_{nominal,socp,qp}.csv, deltas.csv and comparison.json
int cmd_compare(const CommandOptions& opts);

/// runs.csv + summary.json. ERCBF_THREADS caps the worker count.
int cmd_montecarlo(const CommandOptions& opts);

int monte_carlo_threads();

}  // namespace ercbf::cli
