// config.hpp -- YAML (or JSON) run configuration.
//
// Every key is optional; omitted keys take the defaults of the structs they
// fill. Unknown keys are rejected so typos do not pass silently. Layout:
//
//   seed: 20190101
//   pulses_per_setting: 20000000
//   batch_size: 1048576
//   workers: 1
//   analytic: false
//   source:     { mu0, p0_mw, pump_power_mw, phase_offset_rad,
//                 crystal_position_mm, reference_position_mm, phase_period_mm,
//                 imbalance, intrinsic_visibility, statistics (poisson|thermal),
//                 thermal_modes, crystal: { grating_period_um, length_mm,
//                 opening_angle_deg, temperature_c } }
//   detectors:  one map applied to both arms, or a list of two maps, each
//               { efficiency, dark_prob_per_gate, dead_time_us,
//                 gate_period_ns, coupling_efficiency }
//   spectral:   { center_wavelength_nm, pump_duration_ps, pump_center_nm,
//                 marginal_bandwidth_nm, pump_broadening, grid_size, span_fwhm }
//   scenarios:  { powers_mw: [..], fringe_step_deg, crystal_points,
//                 chsh_angles_deg: [t1, t1', t2, t2'], filters_nm: [..],
//                 filter_shape (gaussian|tophat), hom_range_fs, hom_points }

#pragma once

#include "error.hpp"
#include "experiment.hpp"
#include "spectral.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace sagnac {

struct ScenarioOptions {
    std::vector<double> powers_mw{0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0};
    double fringe_step_deg = 10.0;
    int crystal_points = 21;
    std::array<double, 4> chsh_angles_deg{0.0, 45.0, 22.5, 67.5};  // t1, t1', t2, t2'
    std::vector<double> filters_nm = default_filter_sweep();
    FilterShape filter_shape = FilterShape::Gaussian;
    double hom_range_fs = 100.0;
    int hom_points = 201;

    ChshAngles chsh() const {
        return {deg_to_rad(chsh_angles_deg[0]), deg_to_rad(chsh_angles_deg[1]), deg_to_rad(chsh_angles_deg[2]),
                deg_to_rad(chsh_angles_deg[3])};
    }
};

struct Config {
    ExperimentPlan plan{};
    SpectralConfig spectral{};
    ScenarioOptions scenarios{};
};

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return ".nan";
    if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

namespace detail {

struct Bound {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    bool hi_open = false;
};

inline Bound closed(double lo, double hi) { return {lo, hi, false, false}; }
inline Bound at_least(double lo) { return {lo, std::numeric_limits<double>::infinity(), false, false}; }
inline Bound above(double lo) { return {lo, std::numeric_limits<double>::infinity(), true, false}; }

class Reader {
public:
    Reader(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap())
            throw ConfigError(ConfigFault::Parse, path_.empty() ? "<root>" : path_, "expected a mapping");
    }

    std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

    YAML::Node get(const std::string& name) {
        seen_.insert(name);
        if (!node_ || !node_.IsMap()) return YAML::Node();
        const YAML::Node& n = node_;
        return n[name];
    }

    void number(const std::string& name, double& out, Bound b = {}) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) return;
        double v;
        try {
            v = n.as<double>();
        } catch (const YAML::Exception&) {
            throw ConfigError(ConfigFault::Parse, key(name), "expected a number");
        }
        check(name, v, b);
        out = v;
    }

    template <typename Int>
    void integer(const std::string& name, Int& out, double lo) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) return;
        Int v;
        try {
            v = n.as<Int>();
        } catch (const YAML::Exception&) {
            throw ConfigError(ConfigFault::Parse, key(name), "expected an integer");
        }
        if (static_cast<double>(v) < lo)
            throw ConfigError(ConfigFault::Constraint, key(name),
                              name + " >= " + format_double(lo) + " violated (got " + std::to_string(v) + ")");
        out = v;
    }

    void boolean(const std::string& name, bool& out) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) return;
        try {
            out = n.as<bool>();
        } catch (const YAML::Exception&) {
            throw ConfigError(ConfigFault::Parse, key(name), "expected true or false");
        }
    }

    std::string word(const std::string& name, std::initializer_list<const char*> allowed, const std::string& fallback) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) return fallback;
        std::string v;
        try {
            v = n.as<std::string>();
        } catch (const YAML::Exception&) {
            throw ConfigError(ConfigFault::Parse, key(name), "expected a string");
        }
        for (const char* a : allowed)
            if (v == a) return v;
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : "|") + a;
        throw ConfigError(ConfigFault::Constraint, key(name), name + " must be one of " + list + " (got " + v + ")");
    }

    void numbers(const std::string& name, std::vector<double>& out, Bound b = {}) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) return;
        if (!n.IsSequence()) throw ConfigError(ConfigFault::Parse, key(name), "expected a list of numbers");
        std::vector<double> v;
        for (std::size_t i = 0; i < n.size(); ++i) {
            double x;
            try {
                x = n[i].as<double>();
            } catch (const YAML::Exception&) {
                throw ConfigError(ConfigFault::Parse, key(name) + "[" + std::to_string(i) + "]", "expected a number");
            }
            check(name, x, b);
            v.push_back(x);
        }
        if (v.empty()) throw ConfigError(ConfigFault::Constraint, key(name), name + " must not be empty");
        out = std::move(v);
    }

    void finish() const {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto k = kv.first.as<std::string>();
            if (!seen_.contains(k)) throw ConfigError(ConfigFault::Parse, key(k), "unknown key");
        }
    }

private:
    void check(const std::string& name, double v, const Bound& b) const {
        if (std::isnan(v)) throw ConfigError(ConfigFault::Constraint, key(name), name + " must be a number (got nan)");
        const bool lo_bad = b.lo_open ? !(v > b.lo) : !(v >= b.lo);
        const bool hi_bad = b.hi_open ? !(v < b.hi) : !(v <= b.hi);
        if (lo_bad)
            throw ConfigError(ConfigFault::Constraint, key(name),
                              name + (b.lo_open ? " > " : " >= ") + format_double(b.lo) + " violated (got " +
                                  format_double(v) + ")");
        if (hi_bad)
            throw ConfigError(ConfigFault::Constraint, key(name),
                              name + (b.hi_open ? " < " : " <= ") + format_double(b.hi) + " violated (got " +
                                  format_double(v) + ")");
    }

    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void read_detector(const YAML::Node& node, const std::string& path, DetectorConfig& d) {
    Reader r(node, path);
    r.number("efficiency", d.efficiency, closed(0, 1));
    r.number("dark_prob_per_gate", d.dark_prob_per_gate, closed(0, 1));
    r.number("dead_time_us", d.dead_time_us, at_least(0));
    r.number("gate_period_ns", d.gate_period_ns, above(0));
    r.number("coupling_efficiency", d.coupling_efficiency, closed(0, 1));
    r.finish();
}

inline void read_source(const YAML::Node& node, SourceConfig& s) {
    Reader r(node, "source");
    r.number("mu0", s.mu0, at_least(0));
    r.number("p0_mw", s.p0_mw, above(0));
    r.number("pump_power_mw", s.pump_power_mw, at_least(0));
    r.number("phase_offset_rad", s.phase_offset);
    r.number("crystal_position_mm", s.crystal_position_mm);
    r.number("reference_position_mm", s.reference_position_mm);
    r.number("phase_period_mm", s.phase_period_mm, above(0));
    r.number("imbalance", s.imbalance, {-1, 1, true, true});
    r.number("intrinsic_visibility", s.intrinsic_visibility, closed(0, 1));
    const auto stats = r.word("statistics", {"poisson", "thermal"},
                              s.statistics == PairStatistics::Thermal ? "thermal" : "poisson");
    s.statistics = stats == "thermal" ? PairStatistics::Thermal : PairStatistics::Poisson;
    r.number("thermal_modes", s.thermal_modes, at_least(1));
    {
        Reader c(r.get("crystal"), "source.crystal");
        c.number("grating_period_um", s.crystal.grating_period_um, above(0));
        c.number("length_mm", s.crystal.length_mm, above(0));
        c.number("opening_angle_deg", s.crystal.opening_angle_deg);
        c.number("temperature_c", s.crystal.temperature_c);
        c.finish();
    }
    r.finish();
}

inline void read_spectral(const YAML::Node& node, SpectralConfig& s) {
    Reader r(node, "spectral");
    r.number("center_wavelength_nm", s.center_wavelength_nm, above(0));
    r.number("pump_duration_ps", s.pump_duration_ps, above(0));
    r.number("pump_center_nm", s.pump_center_nm, above(0));
    r.number("marginal_bandwidth_nm", s.marginal_bandwidth_nm, above(0));
    r.number("pump_broadening", s.pump_broadening, above(0));
    r.integer("grid_size", s.grid_size, 64);
    r.number("span_fwhm", s.span_fwhm, above(0));
    r.finish();
}

inline void read_scenarios(const YAML::Node& node, ScenarioOptions& o) {
    Reader r(node, "scenarios");
    r.numbers("powers_mw", o.powers_mw, at_least(0));
    r.number("fringe_step_deg", o.fringe_step_deg, {0, 180, true, false});
    r.integer("crystal_points", o.crystal_points, 5);
    std::vector<double> angles(o.chsh_angles_deg.begin(), o.chsh_angles_deg.end());
    r.numbers("chsh_angles_deg", angles);
    if (angles.size() != 4)
        throw ConfigError(ConfigFault::Constraint, r.key("chsh_angles_deg"), "chsh_angles_deg needs exactly 4 angles");
    std::copy(angles.begin(), angles.end(), o.chsh_angles_deg.begin());
    r.numbers("filters_nm", o.filters_nm, above(0));
    const auto shape = r.word("filter_shape", {"gaussian", "tophat"},
                              o.filter_shape == FilterShape::Tophat ? "tophat" : "gaussian");
    o.filter_shape = shape == "tophat" ? FilterShape::Tophat : FilterShape::Gaussian;
    r.number("hom_range_fs", o.hom_range_fs, above(0));
    r.integer("hom_points", o.hom_points, 3);
    r.finish();
}

} // namespace detail

// Parse configuration text (YAML; JSON is accepted as a YAML subset).
inline Config parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(ConfigFault::Parse, "", std::string("parse error: ") + e.what());
    }
    Config cfg;
    detail::Reader r(root, "");
    r.integer("seed", cfg.plan.seed, 0);
    r.integer("pulses_per_setting", cfg.plan.pulses_per_setting, 1);
    r.integer("batch_size", cfg.plan.batch_size, 1);
    r.integer("workers", cfg.plan.workers, 1);
    r.boolean("analytic", cfg.plan.analytic);
    detail::read_source(r.get("source"), cfg.plan.source);

    const YAML::Node det = r.get("detectors");
    if (det && det.IsSequence()) {
        if (det.size() != 2) throw ConfigError(ConfigFault::Constraint, "detectors", "detectors list needs exactly 2 entries");
        detail::read_detector(det[0], "detectors[0]", cfg.plan.detectors[0]);
        detail::read_detector(det[1], "detectors[1]", cfg.plan.detectors[1]);
    } else if (det && !det.IsNull()) {
        detail::read_detector(det, "detectors", cfg.plan.detectors[0]);
        cfg.plan.detectors[1] = cfg.plan.detectors[0];
    }
    detail::read_spectral(r.get("spectral"), cfg.spectral);
    detail::read_scenarios(r.get("scenarios"), cfg.scenarios);
    r.finish();

    // Cross-field constraints.
    try {
        cfg.plan.validate();
        cfg.spectral.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(ConfigFault::Constraint, "", e.what());
    }
    return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(ConfigFault::MissingFile, "", "cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace detail {

inline void emit_number(YAML::Emitter& e, const char* key, double v) {
    e << YAML::Key << key << YAML::Value << format_double(v);
}

inline void emit_numbers(YAML::Emitter& e, const char* key, const std::vector<double>& v) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double x : v) e << format_double(x);
    e << YAML::EndSeq;
}

inline void emit_detector(YAML::Emitter& e, const DetectorConfig& d) {
    e << YAML::BeginMap;
    emit_number(e, "efficiency", d.efficiency);
    emit_number(e, "dark_prob_per_gate", d.dark_prob_per_gate);
    emit_number(e, "dead_time_us", d.dead_time_us);
    emit_number(e, "gate_period_ns", d.gate_period_ns);
    emit_number(e, "coupling_efficiency", d.coupling_efficiency);
    e << YAML::EndMap;
}

} // namespace detail

// Every field written explicitly, so the file documents the full state.
inline std::string dump_config(const Config& cfg) {
    using detail::emit_number;
    YAML::Emitter e;
    const auto& p = cfg.plan;
    const auto& s = p.source;
    e << YAML::BeginMap;
    e << YAML::Key << "seed" << YAML::Value << p.seed;
    e << YAML::Key << "pulses_per_setting" << YAML::Value << p.pulses_per_setting;
    e << YAML::Key << "batch_size" << YAML::Value << p.batch_size;
    e << YAML::Key << "workers" << YAML::Value << p.workers;
    e << YAML::Key << "analytic" << YAML::Value << p.analytic;

    e << YAML::Key << "source" << YAML::Value << YAML::BeginMap;
    emit_number(e, "mu0", s.mu0);
    emit_number(e, "p0_mw", s.p0_mw);
    emit_number(e, "pump_power_mw", s.pump_power_mw);
    emit_number(e, "phase_offset_rad", s.phase_offset);
    emit_number(e, "crystal_position_mm", s.crystal_position_mm);
    emit_number(e, "reference_position_mm", s.reference_position_mm);
    emit_number(e, "phase_period_mm", s.phase_period_mm);
    emit_number(e, "imbalance", s.imbalance);
    emit_number(e, "intrinsic_visibility", s.intrinsic_visibility);
    e << YAML::Key << "statistics" << YAML::Value
      << (s.statistics == PairStatistics::Thermal ? "thermal" : "poisson");
    emit_number(e, "thermal_modes", s.thermal_modes);
    e << YAML::Key << "crystal" << YAML::Value << YAML::BeginMap;
    emit_number(e, "grating_period_um", s.crystal.grating_period_um);
    emit_number(e, "length_mm", s.crystal.length_mm);
    emit_number(e, "opening_angle_deg", s.crystal.opening_angle_deg);
    emit_number(e, "temperature_c", s.crystal.temperature_c);
    e << YAML::EndMap << YAML::EndMap;

    e << YAML::Key << "detectors" << YAML::Value << YAML::BeginSeq;
    detail::emit_detector(e, p.detectors[0]);
    detail::emit_detector(e, p.detectors[1]);
    e << YAML::EndSeq;

    const auto& sp = cfg.spectral;
    e << YAML::Key << "spectral" << YAML::Value << YAML::BeginMap;
    emit_number(e, "center_wavelength_nm", sp.center_wavelength_nm);
    emit_number(e, "pump_duration_ps", sp.pump_duration_ps);
    emit_number(e, "pump_center_nm", sp.pump_center_nm);
    emit_number(e, "marginal_bandwidth_nm", sp.marginal_bandwidth_nm);
    emit_number(e, "pump_broadening", sp.pump_broadening);
    e << YAML::Key << "grid_size" << YAML::Value << sp.grid_size;
    emit_number(e, "span_fwhm", sp.span_fwhm);
    e << YAML::EndMap;

    const auto& o = cfg.scenarios;
    e << YAML::Key << "scenarios" << YAML::Value << YAML::BeginMap;
    detail::emit_numbers(e, "powers_mw", o.powers_mw);
    emit_number(e, "fringe_step_deg", o.fringe_step_deg);
    e << YAML::Key << "crystal_points" << YAML::Value << o.crystal_points;
    detail::emit_numbers(e, "chsh_angles_deg", {o.chsh_angles_deg.begin(), o.chsh_angles_deg.end()});
    detail::emit_numbers(e, "filters_nm", o.filters_nm);
    e << YAML::Key << "filter_shape" << YAML::Value
      << (o.filter_shape == FilterShape::Tophat ? "tophat" : "gaussian");
    emit_number(e, "hom_range_fs", o.hom_range_fs);
    e << YAML::Key << "hom_points" << YAML::Value << o.hom_points;
    e << YAML::EndMap;

    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

inline void save_config(const Config& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write config file " + path.string());
    out << dump_config(cfg);
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace sagnac
