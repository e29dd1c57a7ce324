#include "ercbf/cli/io.hpp"

#include <array>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace ercbf::cli {

namespace {

using Field = double sim::StepRecord::*;

constexpr std::array<std::pair<const char*, Field>, 25> kFields{{
    {"t", &sim::StepRecord::t},
    {"p", &sim::StepRecord::p},
    {"v", &sim::StepRecord::v},
    {"p_s", &sim::StepRecord::p_s},
    {"v_s", &sim::StepRecord::v_s},
    {"v_s_dot", &sim::StepRecord::v_s_dot},
    {"p_s_hat", &sim::StepRecord::p_s_hat},
    {"v_s_hat", &sim::StepRecord::v_s_hat},
    {"v_s_dot_hat", &sim::StepRecord::v_s_dot_hat},
    {"u_des", &sim::StepRecord::u_des},
    {"u_nom", &sim::StepRecord::u_nom},
    {"u_applied", &sim::StepRecord::u_applied},
    {"h_nominal", &sim::StepRecord::h_nominal},
    {"h_true", &sim::StepRecord::h_true},
    {"h_band_lo", &sim::StepRecord::h_band_lo},
    {"h_band_hi", &sim::StepRecord::h_band_hi},
    {"V", &sim::StepRecord::V},
    {"phi_nom", &sim::StepRecord::phi_nom},
    {"phi_rob", &sim::StepRecord::phi_rob},
    {"phi_rob_hat", &sim::StepRecord::phi_rob_hat},
    {"u_delta", &sim::StepRecord::u_delta},
    {"u_delta_bar", &sim::StepRecord::u_delta_bar},
    {"e_h_star", &sim::StepRecord::e_h_star},
    {"e_grad_h_star", &sim::StepRecord::e_grad_h_star},
    {"e_dhdt_star", &sim::StepRecord::e_dhdt_star},
}};

sim::StepStatus parse_status(const std::string& s) {
    for (auto st : {sim::StepStatus::kOptimal, sim::StepStatus::kInfeasible, sim::StepStatus::kDegenerate}) {
        if (s == sim::to_string(st)) {
            return st;
        }
    }
    throw std::runtime_error(fmt::format("unknown step status '{}'", s));
}

double parse_double(const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw std::runtime_error(fmt::format("'{}' is not a number", s));
    }
    return v;
}

}  // namespace

const std::vector<std::string>& trajectory_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> c;
        for (const auto& [name, field] : kFields) {
            c.emplace_back(name);
        }
        c.emplace_back("status");
        return c;
    }();
    return cols;
}

std::string format_double(double v) {
    return fmt::format("{:.17g}", v);
}

void write_trajectory_csv(std::ostream& out, const sim::Trajectory& traj) {
    const auto& cols = trajectory_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out << (i ? "," : "") << cols[i];
    }
    out << '\n';
    for (const sim::StepRecord& r : traj.records) {
        for (const auto& [name, field] : kFields) {
            out << format_double(r.*field) << ',';
        }
        out << sim::to_string(r.status) << '\n';
    }
}

void write_trajectory_csv(const std::filesystem::path& path, const sim::Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    }
    write_trajectory_csv(out, traj);
}

std::vector<sim::StepRecord> read_trajectory_csv(std::istream& in) {
    const auto& cols = trajectory_columns();
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty trajectory file");
    }
    std::string expected;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        expected += (i ? "," : "") + cols[i];
    }
    if (line != expected) {
        throw std::runtime_error("unexpected trajectory header");
    }
    std::vector<sim::StepRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != cols.size()) {
            throw std::runtime_error(
                fmt::format("row {} has {} cells, expected {}", records.size() + 1, cells.size(), cols.size()));
        }
        sim::StepRecord r;
        for (std::size_t i = 0; i < kFields.size(); ++i) {
            r.*(kFields[i].second) = parse_double(cells[i]);
        }
        r.status = parse_status(cells.back());
        records.push_back(r);
    }
    return records;
}

const char* to_string(sim::RunOutcome outcome) {
    switch (outcome) {
    case sim::RunOutcome::kCompleted:
        return "completed";
    case sim::RunOutcome::kDiverged:
        return "diverged";
    case sim::RunOutcome::kAbortedInfeasible:
        return "aborted_infeasible";
    }
    return "?";
}

nlohmann::json metrics_json(const sim::RunMetrics& m, double wall_time_s) {
    return {
        {"seed", m.seed},
        {"min_h_true", m.min_h_true},
        {"min_h_band_lo", m.min_h_band_lo},
        {"min_gap", m.min_gap},
        {"infeasible_steps", m.infeasible_steps},
        {"violation_steps", m.violation_steps},
        {"mean_abs_u", m.mean_abs_u},
        {"outcome", to_string(m.outcome)},
        {"wall_time_s", wall_time_s},
    };
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    }
    out << doc.dump(2) << '\n';
}

}  // namespace ercbf::cli
