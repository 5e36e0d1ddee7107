// scenarios.hpp -- the named runs behind the command-line tool. Each one
// writes its CSV tables and a summary JSON into an output directory and
// returns the manifest of what it wrote.

#pragma once

#include "analysis.hpp"
#include "config.hpp"
#include "detection.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "source.hpp"
#include "spectral.hpp"
#include "tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace sagnac {

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"fig1", "fig3", "fig4", "chsh", "tomo", "spectral"};
    return names;
}

namespace detail {

// Independent seed for the k-th sweep of a scenario.
inline ExperimentPlan sub_plan(const ExperimentPlan& plan, std::uint64_t k) {
    ExperimentPlan p = plan;
    p.seed = substream_seed(plan.seed, 0x5ce7a110ULL + k, 0);
    return p;
}

inline const std::vector<std::string>& count_columns() {
    static const std::vector<std::string> c{"singles1_hz", "singles2_hz", "coincidences_counts",
                                            "accidentals_counts", "net_coincidences_counts"};
    return c;
}

inline std::vector<double> count_values(const CountsRecord& r, double f) {
    return {r.singles_rate(0), r.singles_rate(1), r.coincidences, accidental_counts(r, f), net_coincidences(r, f)};
}

inline CsvTable table_with(std::vector<std::string> lead) {
    CsvTable t;
    t.header = std::move(lead);
    for (const auto& c : count_columns()) t.header.push_back(c);
    return t;
}

inline void add_row(CsvTable& t, std::vector<double> lead, const CountsRecord& r, double f) {
    for (double v : count_values(r, f)) lead.push_back(v);
    t.add(std::move(lead));
}

inline std::vector<double> column(const std::vector<CountsRecord>& recs, CountMode mode, double f) {
    std::vector<double> out;
    out.reserve(recs.size());
    for (const auto& r : recs) out.push_back(coincidences(r, mode, f));
    return out;
}

inline Json fit_or_error(const std::vector<double>& x, const std::vector<double>& y, double period, bool free_period) {
    try {
        return to_json(fit_fringe(x, y, FringeModel::Cos2, period, free_period));
    } catch (const FitError& e) {
        return {{"error", e.what()}};
    }
}

inline Json common_summary(const std::string& name, const Config& cfg) {
    return {{"scenario", name},
            {"seed", cfg.plan.seed},
            {"pulses_per_setting", cfg.plan.pulses_per_setting},
            {"analytic", cfg.plan.analytic},
            {"mu_per_pulse", plan_mu(cfg.plan)},
            {"trigger_rate_hz", cfg.plan.trigger_rate_hz()}};
}

inline void run_fig1(const Config& cfg, OutputDir& out) {
    const auto& plan = cfg.plan;
    const double f = plan.trigger_rate_hz();
    const auto state = emitted_state(plan.source, {});
    const auto sweep = sweep_power(sub_plan(plan, 1), state, cfg.scenarios.powers_mw);

    CsvTable t = table_with({"power_mw", "mu_per_pulse"});
    t.header.insert(t.header.end(), {"coincidence_rate_hz", "accidental_rate_hz", "car", "mu_estimate",
                                     "max_trigger_rate_hz"});
    Json points = Json::array();
    const double dead_s = plan.detectors[0].dead_time_us * 1e-6;
    for (std::size_t i = 0; i < sweep.axis.size(); ++i) {
        const auto& r = sweep.records[i];
        const double acc = accidental_rate(r.singles_rate(0), r.singles_rate(1), f);
        const auto c = car(r.coincidence_rate(), acc);
        const double net = subtract_accidentals(r, f);
        const double mu_est =
            net > 0 ? estimate_pair_probability(r.singles_rate(0), r.singles_rate(1), net, f) : std::nan("");
        const double mean_singles = 0.5 * (r.singles_rate(0) + r.singles_rate(1));
        const auto trig = max_trigger_rate(f, mean_singles, dead_s, plan.gate_period_s());
        std::vector<double> row{sweep.axis[i], pair_mean_per_pulse(plan.source, sweep.axis[i])};
        for (double v : count_values(r, f)) row.push_back(v);
        row.insert(row.end(), {r.coincidence_rate(), acc, c.value, mu_est, trig.rate_hz});
        t.add(std::move(row));
        points.push_back({{"power_mw", sweep.axis[i]},
                          {"car", json_number(c.value)},
                          {"mu_estimate", json_number(mu_est)},
                          {"max_trigger_rate_hz", trig.rate_hz},
                          {"trigger_saturated", trig.saturated}});
    }
    out.csv("fig1_power.csv", t);

    Json s = common_summary("fig1", cfg);
    s["points"] = points;
    if (dead_s > 0) s["max_singles_rate_hz"] = max_singles_rate(f, dead_s, plan.gate_period_s());
    out.json("fig1_summary.json", s);
}

inline void run_fig3(const Config& cfg, OutputDir& out) {
    const auto& plan = cfg.plan;
    const double f = plan.trigger_rate_hz();
    const double period = plan.source.phase_period_mm;
    const int n = cfg.scenarios.crystal_points;
    std::vector<double> z;
    for (int i = 0; i < n; ++i) z.push_back(plan.source.reference_position_mm + period * i / (n - 1));
    const auto sweep = sweep_crystal_position(sub_plan(plan, 3), {}, z);

    CsvTable t = table_with({"position_mm", "phase_rad"});
    double acc_sum = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        add_row(t, {z[i], phase_of_position(plan.source, z[i])}, sweep.records[i], f);
        acc_sum += accidental_counts(sweep.records[i], f);
    }
    out.csv("fig3_crystal.csv", t);

    Json s = common_summary("fig3", cfg);
    s["raw_fit"] = fit_or_error(z, column(sweep.records, CountMode::Raw, f), period, true);
    s["net_fit"] = fit_or_error(z, column(sweep.records, CountMode::Net, f), period, true);
    s["accidental_level_counts"] = acc_sum / static_cast<double>(z.size());
    out.json("fig3_summary.json", s);
}

inline std::vector<double> fringe_angles(double step) {
    std::vector<double> a;
    for (int k = 0; k * step <= 360.0 + 1e-9; ++k) a.push_back(k * step);
    return a;
}

inline void run_fig4(const Config& cfg, OutputDir& out) {
    const auto& plan = cfg.plan;
    const double f = plan.trigger_rate_hz();
    struct Panel {
        const char* name;
        BellKind kind;
        bool minus;
    };
    const std::array<Panel, 4> panels{{{"phi_plus", BellKind::Phi, false},
                                       {"phi_minus", BellKind::Phi, true},
                                       {"psi_plus", BellKind::Psi, false},
                                       {"psi_minus", BellKind::Psi, true}}};
    const auto theta2 = fringe_angles(cfg.scenarios.fringe_step_deg);
    Json s = common_summary("fig4", cfg);
    Json states = Json::object();
    std::uint64_t k = 0;
    for (const auto& panel : panels) {
        const auto state = emitted_state(plan.source, loop_for(panel.kind, panel.minus));
        CsvTable t = table_with({"theta1_deg", "theta2_deg"});
        Json fits = Json::object();
        for (double theta1 : {0.0, 45.0}) {
            const auto sweep = sweep_polarizer(sub_plan(plan, 40 + k++), state, theta1, theta2);
            for (std::size_t i = 0; i < theta2.size(); ++i) add_row(t, {theta1, theta2[i]}, sweep.records[i], f);
            const std::string basis = theta1 == 0.0 ? "hv" : "diagonal";
            fits[basis] = {{"theta1_deg", theta1},
                           {"raw", fit_or_error(theta2, column(sweep.records, CountMode::Raw, f), 180.0, false)},
                           {"net", fit_or_error(theta2, column(sweep.records, CountMode::Net, f), 180.0, false)}};
        }
        out.csv(std::string("fig4_") + panel.name + ".csv", t);
        states[panel.name] = fits;
    }
    s["states"] = states;
    out.json("fig4_summary.json", s);
}

inline void run_chsh_scenario(const Config& cfg, OutputDir& out) {
    const auto& plan = cfg.plan;
    const double f = plan.trigger_rate_hz();
    const auto angles = cfg.scenarios.chsh();
    const auto recs = run_chsh(sub_plan(plan, 5), emitted_state(plan.source, {}), angles);

    CsvTable t = table_with({"theta1_deg", "theta2_deg"});
    for (const auto& r : recs)
        add_row(t, {rad_to_deg(r.settings.arm1.polarizer_angle), rad_to_deg(r.settings.arm2.polarizer_angle)}, r, f);
    out.csv("chsh_counts.csv", t);

    const auto net = chsh(recs, CountMode::Net, f);
    const auto raw = chsh(recs, CountMode::Raw, f);
    double n_max = 0;
    for (const auto& r : recs) n_max = std::max(n_max, net_coincidences(r, f));
    Json s = common_summary("chsh", cfg);
    s["angles_deg"] = {cfg.scenarios.chsh_angles_deg[0], cfg.scenarios.chsh_angles_deg[1],
                       cfg.scenarios.chsh_angles_deg[2], cfg.scenarios.chsh_angles_deg[3]};
    s["net"] = to_json(net);
    s["raw"] = to_json(raw);
    const double v = std::clamp(net.s / (2.0 * std::numbers::sqrt2), 0.0, 1.0);
    s["visibility_from_S"] = v;
    if (n_max >= 1) s["poisson_sigma_S"] = chsh_poisson_sigma(v, n_max);
    out.json("chsh_summary.json", s);
}

inline void run_tomo(const Config& cfg, OutputDir& out) {
    const auto& plan = cfg.plan;
    const double f = plan.trigger_rate_hz();
    const auto recs = run_tomography(sub_plan(plan, 6), emitted_state(plan.source, {}));

    CsvTable t = table_with({"basis1", "basis2"});
    for (std::size_t b = 0; b < recs.size(); ++b)
        add_row(t, {static_cast<double>(b / 4), static_cast<double>(b % 4)}, recs[b], f);
    out.csv("tomo_counts.csv", t);

    Json s = common_summary("tomo", cfg);
    s["basis_order"] = "H,V,D,R per arm; row index = 4*basis1 + basis2";
    s["target"] = "phi_plus";
    s["raw"] = to_json(tomography(recs, phi_plus(), CountMode::Raw, f));
    s["net"] = to_json(tomography(recs, phi_plus(), CountMode::Net, f));
    out.json("tomo_summary.json", s);
}

// Long-format JSA intensity, every `stride`-th grid point on each axis.
inline CsvTable jsa_table(const JsaGrid& g, std::size_t stride) {
    CsvTable t;
    t.header = {"signal_wavelength_nm", "idler_wavelength_nm", "intensity_per_rad2_ps2"};
    const auto ls = g.signal_wavelength_nm();
    const auto li = g.idler_wavelength_nm();
    for (std::size_t i = 0; i < ls.size(); i += stride)
        for (std::size_t j = 0; j < li.size(); j += stride)
            t.add({ls[i], li[j],
                   std::norm(g.amplitude(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))});
    return t;
}

inline void run_spectral(const Config& cfg, OutputDir& out) {
    const auto jsa = build_jsa(cfg.spectral);
    std::vector<double> filters = cfg.scenarios.filters_nm;
    for (double anchor : {1.0, 18.0, std::numeric_limits<double>::infinity()})
        if (std::find(filters.begin(), filters.end(), anchor) == filters.end()) filters.push_back(anchor);
    std::sort(filters.begin(), filters.end());
    const auto sweep = purity_sweep(jsa, filters, cfg.scenarios.filter_shape);

    CsvTable pt;
    pt.header = {"filter_bandwidth_nm", "purity", "schmidt_number", "pair_transmission", "heralding_transmission"};
    Json points = Json::array();
    for (const auto& p : sweep) {
        pt.add({p.bandwidth_nm, p.purity, p.schmidt_number, p.pair_transmission, p.heralding_transmission});
        points.push_back({{"filter_bandwidth_nm", json_number(p.bandwidth_nm)},
                          {"purity", p.purity},
                          {"schmidt_number", p.schmidt_number}});
    }
    out.csv("spectral_purity.csv", pt);

    const HomProfile hom(jsa);
    CsvTable ht;
    ht.header = {"delay_fs", "coincidence_probability"};
    const int n = cfg.scenarios.hom_points;
    const double range = cfg.scenarios.hom_range_fs;
    for (int i = 0; i < n; ++i) {
        const double tau = -range + 2.0 * range * i / (n - 1);
        ht.add({tau, hom.coincidence(tau)});
    }
    out.csv("spectral_hom.csv", ht);

    const std::size_t stride = std::max<std::size_t>(1, jsa.signal_detuning.size() / 128);
    out.csv("spectral_jsa.csv", jsa_table(jsa, stride));

    Json s = {{"scenario", "spectral"},
              {"grid_size", cfg.spectral.grid_size},
              {"pump_broadening", cfg.spectral.pump_broadening},
              {"calibrated_pump_broadening", calibrate_pump_broadening(cfg.spectral, default_purity_anchors())},
              {"marginal_fwhm_nm", marginal_fwhm_nm(jsa)},
              {"hom_dip_fwhm_fs", hom.dip_fwhm_fs()},
              {"hom_visibility", hom.exchange_overlap()},
              {"purity", points}};
    out.json("spectral_summary.json", s);
}

} // namespace detail

// Runs a scenario into `out_dir` and writes manifest.json there. Identical
// configs give byte-identical CSV and summary files; the manifest carries
// timestamps and is the only file that differs between runs.
inline RunManifest run_scenario(const std::string& name, const Config& cfg, const std::filesystem::path& out_dir,
                                const std::string& config_path = "") {
    if (std::find(scenario_names().begin(), scenario_names().end(), name) == scenario_names().end())
        throw ScenarioError("unknown scenario '" + name + "'");
    RunManifest m;
    m.scenario = name;
    m.config_path = config_path;
    m.seed = cfg.plan.seed;
    m.output_dir = out_dir.string();
    m.started = utc_timestamp();

    OutputDir out(out_dir);
    try {
        if (name == "fig1") detail::run_fig1(cfg, out);
        else if (name == "fig3") detail::run_fig3(cfg, out);
        else if (name == "fig4") detail::run_fig4(cfg, out);
        else if (name == "chsh") detail::run_chsh_scenario(cfg, out);
        else if (name == "tomo") detail::run_tomo(cfg, out);
        else detail::run_spectral(cfg, out);
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw ScenarioError(name + ": " + e.what());
    }
    m.files = out.entries();
    m.finished = utc_timestamp();
    write_text(out.path() / "manifest.json", m.to_json().dump(2) + "\n");
    return m;
}

} // namespace sagnac
