#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ercbf/sim.hpp"

namespace ercbf::cli {

/// Schema violation. path() is a JSON pointer to the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message);
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct OutputOptions {
    std::filesystem::path dir = "out";
    bool write_trajectories = true;
};

struct ExperimentConfig {
    sim::SimConfig sim;
    std::vector<std::uint64_t> seeds{1};
    int mc_runs = 100;
    OutputOptions output;
};

/// Keys starting with "_note" are ignored anywhere; any other unknown key
/// is an error. Speeds take a _mps or _kmh suffix.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError for unknown names.
sim::ControllerKind parse_controller(const std::string& name);

nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace ercbf::cli
