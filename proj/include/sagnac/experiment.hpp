// experiment.hpp -- pulse-by-pulse Monte Carlo of the gated coincidence
// experiment, and the scenario sweeps built on it.
//
// A run is split into fixed-size batches of pulses. Each batch draws, from
// its own substream, the sparse list of gates in which either detector would
// fire if it were live (photon detected or dark count). Gates where nothing
// fires are skipped geometrically. A single serial pass then applies both
// detectors' dead windows to the merged event list. The batch phase is
// embarrassingly parallel and the serial phase is deterministic, so the
// result does not depend on the number of workers.

#pragma once

#include "detection.hpp"
#include "error.hpp"
#include "polarization.hpp"
#include "rng.hpp"
#include "source.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

namespace sagnac {

struct ScheduleEntry {
    AnalyzerSetting setting;
    std::uint64_t pulses = 20'000'000;
};

struct ExperimentPlan {
    SourceConfig source{};
    std::array<DetectorConfig, 2> detectors{};
    std::vector<ScheduleEntry> schedule;
    std::uint64_t seed = 20190101;
    std::uint64_t batch_size = 1u << 20;
    std::uint64_t pulses_per_setting = 20'000'000;  // used by the sweeps
    unsigned workers = 1;   // execution only; never changes results
    bool analytic = false;  // closed-form expectations instead of sampling

    double trigger_rate_hz() const { return detectors[0].trigger_rate_hz(); }
    double gate_period_s() const { return detectors[0].gate_period_ns * 1e-9; }

    void validate() const {
        source.validate();
        for (const auto& d : detectors) d.validate();
        if (detectors[0].gate_period_ns != detectors[1].gate_period_ns)
            throw InvalidArgument("both detectors must share the trigger");
        if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
        if (pulses_per_setting < 1) throw InvalidArgument("pulses_per_setting must be >= 1");
        for (const auto& e : schedule)
            if (e.pulses < 1) throw InvalidArgument("every schedule entry needs >= 1 pulse");
    }
};

struct SweepResult {
    std::string axis_name;  // e.g. "theta2_deg", "power_mw", "position_mm"
    std::vector<double> axis;
    std::vector<CountsRecord> records;

    bool axis_monotone() const {
        for (std::size_t i = 1; i < axis.size(); ++i)
            if (!(axis[i] > axis[i - 1])) return false;
        return true;
    }
};

namespace detail {

// Per-pair outcome classes once analyzers and detector efficiencies act.
struct PairChannels {
    double both = 0;   // photons detected in both arms
    double only1 = 0;
    double only2 = 0;
    double any() const { return both + only1 + only2; }
};

inline PairChannels pair_channels(const DensityMatrix& state, const AnalyzerSetting& setting,
                                  double eta1, double eta2) {
    const auto p = outcome_probabilities(state, setting);
    const double pass1 = p[0] + p[1];
    const double pass2 = p[0] + p[2];
    PairChannels c;
    c.both = eta1 * eta2 * p[0];
    c.only1 = std::max(0.0, eta1 * pass1 - c.both);
    c.only2 = std::max(0.0, eta2 * pass2 - c.both);
    return c;
}

struct GateEvent {
    std::uint64_t gate;
    std::uint8_t fires;  // bit 0: arm 1, bit 1: arm 2
};

struct SettingModel {
    PairNumberLaw detected;  // pairs that reach at least one detector
    PairChannels channels;
    double dark1, dark2;
    double p_event;     // some arm fires in a gate
    double p_pair_event; // at least one detected pair in a gate

    SettingModel(const PairNumberLaw& law, const PairChannels& ch, double d1, double d2)
        : detected(law.thinned(ch.any())), channels(ch), dark1(d1), dark2(d2) {
        const double quiet_pairs = detected.p0();
        p_pair_event = 1.0 - quiet_pairs;
        p_event = 1.0 - quiet_pairs * (1.0 - d1) * (1.0 - d2);
    }

    std::uint8_t sample_event(RandomStream& rng) const {
        std::uint8_t fires = 0;
        if (rng.uniform() * p_event < p_pair_event) {
            const std::uint64_t m = detected.sample_positive(rng);
            const double total = channels.any();
            for (std::uint64_t k = 0; k < m && fires != 3; ++k) {
                const double u = rng.uniform() * total;
                if (u < channels.both) fires |= 3;
                else if (u < channels.both + channels.only1) fires |= 1;
                else fires |= 2;
            }
            if (rng.bernoulli(dark1)) fires |= 1;
            if (rng.bernoulli(dark2)) fires |= 2;
        } else {
            // No detected pair; at least one dark count.
            const double w1 = dark1 * (1.0 - dark2);
            const double w2 = (1.0 - dark1) * dark2;
            const double w3 = dark1 * dark2;
            const double u = rng.uniform() * (w1 + w2 + w3);
            fires = u < w1 ? 1 : (u < w1 + w2 ? 2 : 3);
        }
        return fires;
    }
};

inline std::vector<GateEvent> sample_batch(const SettingModel& model, std::uint64_t begin,
                                           std::uint64_t end, RandomStream& rng) {
    std::vector<GateEvent> events;
    if (!(model.p_event > 0.0)) return events;
    std::uint64_t gate = begin;
    for (;;) {
        const std::uint64_t skip = rng.geometric(model.p_event);
        if (skip >= end - gate) break;
        gate += skip;
        events.push_back({gate, model.sample_event(rng)});
        if (++gate >= end) break;
    }
    return events;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

} // namespace detail

// Simulates one analyzer setting. `stream` separates the substreams of
// different settings that share a seed.
inline CountsRecord simulate_setting(const DensityMatrix& state, const AnalyzerSetting& setting,
                                     double mu, const SourceConfig& source,
                                     const std::array<DetectorConfig, 2>& detectors,
                                     std::uint64_t pulses, std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t batch_size, unsigned workers) {
    const PairNumberLaw law(mu, source.statistics == PairStatistics::Thermal, source.thermal_modes);
    const auto channels = detail::pair_channels(state, setting, detectors[0].total_efficiency(),
                                                detectors[1].total_efficiency());
    const detail::SettingModel model(law, channels, detectors[0].dark_prob_per_gate,
                                     detectors[1].dark_prob_per_gate);

    const std::uint64_t n_batches = (pulses + batch_size - 1) / batch_size;
    std::vector<std::vector<detail::GateEvent>> batches(n_batches);
    detail::parallel_for(n_batches, workers, [&](std::size_t b) {
        RandomStream rng(seed, stream, b);
        const std::uint64_t begin = b * batch_size;
        const std::uint64_t end = std::min(pulses, begin + batch_size);
        batches[b] = detail::sample_batch(model, begin, end, rng);
    });

    GatedDetector d1(detectors[0]);
    GatedDetector d2(detectors[1]);
    std::uint64_t s1 = 0, s2 = 0, coinc = 0, dead1 = 0, dead2 = 0;
    for (const auto& batch : batches) {
        for (const auto& ev : batch) {
            const bool c1 = d1.apply(ev.gate, ev.fires & 1);
            const bool c2 = d2.apply(ev.gate, ev.fires & 2);
            if (c1) { ++s1; dead1 += d1.dead_gates_within(ev.gate, pulses); }
            if (c2) { ++s2; dead2 += d2.dead_gates_within(ev.gate, pulses); }
            if (c1 && c2) ++coinc;
        }
    }

    CountsRecord r;
    r.singles = {static_cast<double>(s1), static_cast<double>(s2)};
    r.coincidences = static_cast<double>(coinc);
    r.gates_applied = static_cast<double>(pulses);
    r.gates_live = {static_cast<double>(pulses - dead1), static_cast<double>(pulses - dead2)};
    r.wall_duration_s = static_cast<double>(pulses) * detectors[0].gate_period_ns * 1e-9;
    r.settings = setting;
    return r;
}

// Closed-form expectation: true coincidences to first order in mu plus the
// uncorrelated product of the per-gate click probabilities; no dead time.
inline CountsRecord expected_setting(const DensityMatrix& state, const AnalyzerSetting& setting,
                                     double mu, const std::array<DetectorConfig, 2>& detectors,
                                     std::uint64_t pulses) {
    const double eta1 = detectors[0].total_efficiency();
    const double eta2 = detectors[1].total_efficiency();
    const auto ch = detail::pair_channels(state, setting, eta1, eta2);
    const double s1 = mu * (ch.both + ch.only1) + detectors[0].dark_prob_per_gate;
    const double s2 = mu * (ch.both + ch.only2) + detectors[1].dark_prob_per_gate;
    const double c = mu * ch.both + s1 * s2;
    const double n = static_cast<double>(pulses);
    CountsRecord r;
    r.singles = {n * s1, n * s2};
    r.coincidences = n * c;
    r.gates_applied = n;
    r.gates_live = {n, n};
    r.wall_duration_s = n * detectors[0].gate_period_ns * 1e-9;
    r.settings = setting;
    return r;
}

namespace detail {

inline CountsRecord run_entry(const ExperimentPlan& plan, const DensityMatrix& state,
                              const AnalyzerSetting& setting, double mu, std::uint64_t pulses,
                              std::uint64_t stream) {
    if (plan.analytic) return expected_setting(state, setting, mu, plan.detectors, pulses);
    return simulate_setting(state, setting, mu, plan.source, plan.detectors, pulses, plan.seed,
                            stream, plan.batch_size, plan.workers);
}

inline double plan_mu(const ExperimentPlan& plan) {
    return pair_mean_per_pulse(plan.source, plan.source.pump_power_mw);
}

} // namespace detail

inline std::vector<CountsRecord> run_pulse_train(const ExperimentPlan& plan, const DensityMatrix& state) {
    plan.validate();
    const double mu = detail::plan_mu(plan);
    std::vector<CountsRecord> out;
    out.reserve(plan.schedule.size());
    for (std::size_t i = 0; i < plan.schedule.size(); ++i)
        out.push_back(detail::run_entry(plan, state, plan.schedule[i].setting, mu,
                                        plan.schedule[i].pulses, i));
    return out;
}

inline std::vector<CountsRecord> run_pulse_train(const ExperimentPlan& plan, const PolarizationKet& state) {
    return run_pulse_train(plan, DensityMatrix(state));
}

// Fringe with polarizer 1 fixed and polarizer 2 stepped (angles in degrees).
inline SweepResult sweep_polarizer(const ExperimentPlan& plan, const DensityMatrix& state,
                                   double theta1_deg, const std::vector<double>& theta2_deg) {
    plan.validate();
    ExperimentPlan p = plan;
    p.schedule.clear();
    for (double t2 : theta2_deg)
        p.schedule.push_back({AnalyzerSetting::polarizers(deg_to_rad(theta1_deg), deg_to_rad(t2)),
                              plan.pulses_per_setting});
    return {"theta2_deg", theta2_deg, run_pulse_train(p, state)};
}

// Rates with analyzers removed, one point per pump power.
inline SweepResult sweep_power(const ExperimentPlan& plan, const DensityMatrix& state,
                               const std::vector<double>& powers_mw) {
    plan.validate();
    SweepResult out{"power_mw", powers_mw, {}};
    for (std::size_t i = 0; i < powers_mw.size(); ++i) {
        const double mu = pair_mean_per_pulse(plan.source, powers_mw[i]);
        out.records.push_back(detail::run_entry(plan, state, AnalyzerSetting::open(), mu,
                                                plan.pulses_per_setting, i));
    }
    return out;
}

// Both polarizers at +45 degrees while the crystal is translated; the state
// at each position is re-prepared from the loop phase.
inline SweepResult sweep_crystal_position(const ExperimentPlan& plan, const LoopSettings& loop,
                                          const std::vector<double>& positions_mm) {
    plan.validate();
    SweepResult out{"position_mm", positions_mm, {}};
    const double mu = detail::plan_mu(plan);
    const auto setting = AnalyzerSetting::polarizers(deg_to_rad(45.0), deg_to_rad(45.0));
    for (std::size_t i = 0; i < positions_mm.size(); ++i) {
        SourceConfig cfg = plan.source;
        cfg.crystal_position_mm = positions_mm[i];
        out.records.push_back(detail::run_entry(plan, emitted_state(cfg, loop), setting, mu,
                                                plan.pulses_per_setting, i));
    }
    return out;
}

struct ChshAngles {
    double theta1 = 0.0;
    double theta1_prime = deg_to_rad(45.0);
    double theta2 = deg_to_rad(22.5);
    double theta2_prime = deg_to_rad(67.5);
};

// Coefficient order: E(t1,t2), E(t1,t2'), E(t1',t2), E(t1',t2').
inline std::array<std::pair<double, double>, 4> chsh_pairs(const ChshAngles& a) {
    return {{{a.theta1, a.theta2}, {a.theta1, a.theta2_prime},
             {a.theta1_prime, a.theta2}, {a.theta1_prime, a.theta2_prime}}};
}

// Settings within a coefficient: (a,b), (a,b+90), (a+90,b), (a+90,b+90).
inline std::array<AnalyzerSetting, 4> correlation_settings(double a, double b) {
    const double q = pi / 2.0;
    return {AnalyzerSetting::polarizers(a, b), AnalyzerSetting::polarizers(a, b + q),
            AnalyzerSetting::polarizers(a + q, b), AnalyzerSetting::polarizers(a + q, b + q)};
}

// 16 records, grouped by coefficient then by setting.
inline std::vector<CountsRecord> run_chsh(const ExperimentPlan& plan, const DensityMatrix& state,
                                          const ChshAngles& angles = {}) {
    plan.validate();
    ExperimentPlan p = plan;
    p.schedule.clear();
    for (const auto& [a, b] : chsh_pairs(angles))
        for (const auto& s : correlation_settings(a, b))
            p.schedule.push_back({s, plan.pulses_per_setting});
    return run_pulse_train(p, state);
}

// Per-arm tomography analyzers H, V, D, R.
inline AnalyzerArm tomography_arm(int index) {
    switch (index) {
    case 0: return {0.0, {}};
    case 1: return {pi / 2.0, {}};
    case 2: return {pi / 4.0, {}};
    default:
        // Quarter-wave plate at 45 degrees then a polarizer at 0 transmits
        // (H + iV)/sqrt2 up to phase.
        return {0.0, {WaveplateSetting::quarter_wave(pi / 4.0)}};
    }
}

inline std::vector<AnalyzerSetting> tomography_settings() {
    std::vector<AnalyzerSetting> s;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) s.push_back({tomography_arm(a), tomography_arm(b)});
    return s;
}

inline std::vector<CountsRecord> run_tomography(const ExperimentPlan& plan, const DensityMatrix& state) {
    plan.validate();
    ExperimentPlan p = plan;
    p.schedule.clear();
    for (const auto& s : tomography_settings()) p.schedule.push_back({s, plan.pulses_per_setting});
    return run_pulse_train(p, state);
}

} // namespace sagnac
