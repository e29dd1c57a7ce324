#include "ercbf/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <set>

#include <fmt/format.h>

namespace ercbf::cli {

using nlohmann::json;

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", path.empty() ? "/" : path, message)), path_(std::move(path)) {}

namespace {

// Reads fields of one JSON object and remembers which keys were consumed.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) {
            throw ConfigError(path_, "expected an object");
        }
    }

    std::string key_path(const std::string& key) const { return path_ + "/" + key; }

    const json* find(const std::string& key) {
        auto it = doc_.find(key);
        if (it == doc_.end()) {
            return nullptr;
        }
        used_.insert(key);
        return &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) {
                throw ConfigError(key_path(key), "expected a number");
            }
            out = v->get<double>();
            if (!std::isfinite(out)) {
                throw ConfigError(key_path(key), "expected a finite number");
            }
        }
    }

    void positive(const std::string& key, double& out) {
        number(key, out);
        if (doc_.contains(key) && !(out > 0.0)) {
            throw ConfigError(key_path(key), "must be positive");
        }
    }

    void nonnegative(const std::string& key, double& out) {
        number(key, out);
        if (doc_.contains(key) && !(out >= 0.0)) {
            throw ConfigError(key_path(key), "must be nonnegative");
        }
    }

    /// `<stem>_mps` or `<stem>_kmh`, not both.
    void speed(const std::string& stem, double& out) {
        const std::string mps = stem + "_mps";
        const std::string kmh = stem + "_kmh";
        if (doc_.contains(mps) && doc_.contains(kmh)) {
            throw ConfigError(key_path(kmh), fmt::format("conflicts with {}", mps));
        }
        number(mps, out);
        double v = 0.0;
        if (doc_.contains(kmh)) {
            number(kmh, v);
            out = v * acc::kKmhToMps;
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) {
                throw ConfigError(key_path(key), "expected true or false");
            }
            out = v->get<bool>();
        }
    }

    void integer(const std::string& key, int& out, int min_value) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer() || v->get<long long>() < min_value) {
                throw ConfigError(key_path(key), fmt::format("expected an integer >= {}", min_value));
            }
            out = v->get<int>();
        }
    }

    std::optional<std::string> text(const std::string& key) {
        if (const json* v = find(key)) {
            if (!v->is_string()) {
                throw ConfigError(key_path(key), "expected a string");
            }
            return v->get<std::string>();
        }
        return std::nullopt;
    }

    std::optional<Section> child(const std::string& key) {
        if (const json* v = find(key)) {
            return Section(*v, key_path(key));
        }
        return std::nullopt;
    }

    void finish() const {
        for (const auto& [key, value] : doc_.items()) {
            if (key.rfind("_note", 0) == 0 || used_.count(key) != 0) {
                continue;
            }
            throw ConfigError(key_path(key), "unknown key");
        }
    }

private:
    const json& doc_;
    std::string path_;
    std::set<std::string> used_;
};

template <class Enum, std::size_t N>
Enum pick(const std::string& path, const std::string& value,
          const std::array<std::pair<const char*, Enum>, N>& choices) {
    std::string names;
    for (const auto& [name, e] : choices) {
        if (value == name) {
            return e;
        }
        names += names.empty() ? name : fmt::format("|{}", name);
    }
    throw ConfigError(path, fmt::format("'{}' is not one of {}", value, names));
}

constexpr std::array<std::pair<const char*, sim::ControllerKind>, 3> kControllers{{
    {"nominal", sim::ControllerKind::kNominal},
    {"socp", sim::ControllerKind::kSocp},
    {"qp", sim::ControllerKind::kQp},
}};

constexpr std::array<std::pair<const char*, sim::DesiredInputMode>, 2> kDesired{{
    {"two_stage", sim::DesiredInputMode::kTwoStage},
    {"soft_clf", sim::DesiredInputMode::kSoftClf},
}};

constexpr std::array<std::pair<const char*, acc::NoisePolicy>, 3> kPolicies{{
    {"zero", acc::NoisePolicy::kZero},
    {"uniform", acc::NoisePolicy::kUniform},
    {"corner", acc::NoisePolicy::kCorner},
}};

constexpr std::array<std::pair<const char*, acc::ResampleMode>, 2> kResample{{
    {"per_tick", acc::ResampleMode::kPerTick},
    {"held", acc::ResampleMode::kHeld},
}};

template <class Enum, std::size_t N>
const char* name_of(Enum e, const std::array<std::pair<const char*, Enum>, N>& choices) {
    for (const auto& [name, c] : choices) {
        if (c == e) {
            return name;
        }
    }
    return "?";
}

void read_simulation(Section& s, ExperimentConfig& cfg) {
    sim::SimConfig& sc = cfg.sim;
    s.positive("dt_control_s", sc.dt_control);
    double dt_int = sc.dt_integrator();
    s.positive("dt_integrator_s", dt_int);
    if (dt_int > sc.dt_control * (1.0 + 1e-12)) {
        throw ConfigError(s.key_path("dt_integrator_s"), "must not exceed dt_control_s");
    }
    const double ratio = sc.dt_control / dt_int;
    sc.substeps = static_cast<int>(std::llround(ratio));
    if (std::abs(ratio - sc.substeps) > 1e-9 * ratio) {
        throw ConfigError(s.key_path("dt_integrator_s"), "must divide dt_control_s evenly");
    }
    s.positive("horizon_s", sc.horizon);
    if (auto name = s.text("controller")) {
        sc.controller = pick(s.key_path("controller"), *name, kControllers);
    }
    if (auto name = s.text("desired_input")) {
        sc.desired_input = pick(s.key_path("desired_input"), *name, kDesired);
    }
    s.positive("clf_weight", sc.clf_weight);
    s.boolean("abort_on_infeasible", sc.abort_on_infeasible);
    if (const json* seeds = s.find("seeds")) {
        const std::string path = s.key_path("seeds");
        if (!seeds->is_array() || seeds->empty()) {
            throw ConfigError(path, "expected a nonempty array of seeds");
        }
        cfg.seeds.clear();
        for (std::size_t i = 0; i < seeds->size(); ++i) {
            const json& v = (*seeds)[i];
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
                throw ConfigError(fmt::format("{}/{}", path, i), "expected a nonnegative integer");
            }
            cfg.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    sc.seed = cfg.seeds.front();
    s.integer("monte_carlo_runs", cfg.mc_runs, 1);
    s.finish();
}

void read_vehicle(Section& s, acc::VehicleParams& v) {
    s.positive("mass_kg", v.mass);
    s.number("c0_N", v.c0);
    s.number("c1_Ns_per_m", v.c1);
    s.number("c2_Ns2_per_m2", v.c2);
    s.positive("c_d", v.c_d);
    s.positive("g_mps2", v.grav);
    s.nonnegative("T_h_s", v.T_h);
    s.finish();
}

void read_hdv(Section& s, acc::HdvModel& h) {
    s.nonnegative("lambda_per_s", h.lambda);
    s.speed("v_desired", h.v_desired);
    s.nonnegative("tau_s", h.tau);
    s.nonnegative("sigma_mps2", h.sigma);
    s.finish();
}

void read_errors(Section& s, ExperimentConfig& cfg) {
    acc::AccErrorBounds& b = cfg.sim.scenario.bounds;
    s.nonnegative("E_p_m", b.E_p);
    s.nonnegative("E_v_mps", b.E_v);
    s.nonnegative("E_vdot_mps2", b.E_vdot);
    if (auto name = s.text("measurement")) {
        cfg.sim.measurement = pick(s.key_path("measurement"), *name, kPolicies);
    }
    if (auto name = s.text("resample")) {
        cfg.sim.resample = pick(s.key_path("resample"), *name, kResample);
    }
    s.finish();
}

void read_controller(Section& s, sim::AccScenario& sc) {
    s.nonnegative("nu", sc.nu);
    s.positive("c3", sc.c3);
    s.speed("v_desired", sc.v_desired);
    s.speed("v_max", sc.v_max);
    s.speed("v_min", sc.v_min);
    s.finish();
    if (!(sc.v_max > sc.v_min)) {
        throw ConfigError(s.key_path("v_max_kmh"), "v_max must exceed v_min");
    }
}

void read_initial(Section& s, sim::AccScenario& sc) {
    s.number("gap_m", sc.initial_gap);
    s.number("ego_p_m", sc.ego_p0);
    s.speed("ego_v", sc.ego_v0);
    s.speed("lead_v", sc.lead_v0);
    s.finish();
}

void read_output(Section& s, OutputOptions& out) {
    if (auto dir = s.text("dir")) {
        out.dir = *dir;
    }
    s.boolean("write_trajectories", out.write_trajectories);
    s.finish();
}

}  // namespace

sim::ControllerKind parse_controller(const std::string& name) {
    return pick("--controller", name, kControllers);
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    Section root(doc, "");
    if (auto s = root.child("simulation")) {
        read_simulation(*s, cfg);
    }
    if (auto s = root.child("vehicle")) {
        read_vehicle(*s, cfg.sim.scenario.vehicle);
    }
    if (auto s = root.child("hdv")) {
        read_hdv(*s, cfg.sim.scenario.hdv);
    }
    if (auto s = root.child("error_bounds")) {
        read_errors(*s, cfg);
    }
    if (auto s = root.child("controller")) {
        read_controller(*s, cfg.sim.scenario);
    }
    if (auto s = root.child("initial")) {
        read_initial(*s, cfg.sim.scenario);
    }
    if (auto s = root.child("output")) {
        read_output(*s, cfg.output);
    }
    root.finish();
    try {
        cfg.sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("", e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", fmt::format("cannot open config file {}", path.string()));
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
    }
    return parse_config(doc);
}

json to_json(const ExperimentConfig& config) {
    const sim::SimConfig& sc = config.sim;
    const sim::AccScenario& s = sc.scenario;
    return json{
        {"simulation",
         {{"dt_control_s", sc.dt_control},
          {"dt_integrator_s", sc.dt_integrator()},
          {"horizon_s", sc.horizon},
          {"controller", name_of(sc.controller, kControllers)},
          {"desired_input", name_of(sc.desired_input, kDesired)},
          {"clf_weight", sc.clf_weight},
          {"abort_on_infeasible", sc.abort_on_infeasible},
          {"seeds", config.seeds},
          {"monte_carlo_runs", config.mc_runs}}},
        {"vehicle",
         {{"mass_kg", s.vehicle.mass},
          {"c0_N", s.vehicle.c0},
          {"c1_Ns_per_m", s.vehicle.c1},
          {"c2_Ns2_per_m2", s.vehicle.c2},
          {"c_d", s.vehicle.c_d},
          {"g_mps2", s.vehicle.grav},
          {"T_h_s", s.vehicle.T_h}}},
        {"hdv",
         {{"lambda_per_s", s.hdv.lambda},
          {"v_desired_mps", s.hdv.v_desired},
          {"tau_s", s.hdv.tau},
          {"sigma_mps2", s.hdv.sigma}}},
        {"error_bounds",
         {{"E_p_m", s.bounds.E_p},
          {"E_v_mps", s.bounds.E_v},
          {"E_vdot_mps2", s.bounds.E_vdot},
          {"measurement", name_of(sc.measurement, kPolicies)},
          {"resample", name_of(sc.resample, kResample)}}},
        {"controller",
         {{"nu", s.nu},
          {"c3", s.c3},
          {"v_desired_mps", s.v_desired},
          {"v_max_mps", s.v_max},
          {"v_min_mps", s.v_min}}},
        {"initial",
         {{"gap_m", s.initial_gap}, {"ego_p_m", s.ego_p0}, {"ego_v_mps", s.ego_v0}, {"lead_v_mps", s.lead_v0}}},
        {"output", {{"dir", config.output.dir.string()}, {"write_trajectories", config.output.write_trajectories}}},
    };
}

}  // namespace ercbf::cli
