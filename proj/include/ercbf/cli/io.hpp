#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "ercbf/sim.hpp"

namespace ercbf::cli {

/// Column names of trajectory.csv, in order.
const std::vector<std::string>& trajectory_columns();

/// Numbers are written with 17 significant digits so they parse back exactly.
void write_trajectory_csv(std::ostream& out, const sim::Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const sim::Trajectory& traj);

/// Inverse of write_trajectory_csv. Throws std::runtime_error on malformed input.
std::vector<sim::StepRecord> read_trajectory_csv(std::istream& in);

std::string format_double(double v);

nlohmann::json metrics_json(const sim::RunMetrics& m, double wall_time_s);

const char* to_string(sim::RunOutcome outcome);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace ercbf::cli
