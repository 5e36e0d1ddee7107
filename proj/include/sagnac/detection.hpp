// detection.hpp -- gated InGaAs detector model and coincidence bookkeeping

#pragma once

#include "error.hpp"
#include "polarization.hpp"
#include "rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace sagnac {

struct DetectorConfig {
    double efficiency = 0.15;
    double dark_prob_per_gate = 1e-5;
    double dead_time_us = 5.0;
    double gate_period_ns = 50.0;
    // Fibre coupling and optics transmission of the arm feeding this detector.
    double coupling_efficiency = 0.21;

    double total_efficiency() const { return efficiency * coupling_efficiency; }
    double trigger_rate_hz() const { return 1e9 / gate_period_ns; }

    // Whole gates blocked after a click; partial gates round up.
    std::uint64_t dead_gates() const {
        if (dead_time_us <= 0.0) return 0;
        return static_cast<std::uint64_t>(std::ceil(dead_time_us * 1e3 / gate_period_ns - 1e-9));
    }

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob(efficiency)) throw InvalidArgument("efficiency must lie in [0, 1]");
        if (!prob(dark_prob_per_gate)) throw InvalidArgument("dark_prob_per_gate must lie in [0, 1]");
        if (!prob(coupling_efficiency)) throw InvalidArgument("coupling_efficiency must lie in [0, 1]");
        if (!(dead_time_us >= 0.0)) throw InvalidArgument("dead_time must be >= 0");
        if (!(gate_period_ns > 0.0)) throw InvalidArgument("gate_period must be > 0");
    }
};

// Tallies are doubles: Monte Carlo runs fill them with integers, analytic
// runs with expectation values.
struct CountsRecord {
    std::array<double, 2> singles{0, 0};
    double coincidences = 0;
    double gates_applied = 0;
    std::array<double, 2> gates_live{0, 0};
    double wall_duration_s = 0.0;
    AnalyzerSetting settings{};

    double singles_rate(int arm) const { return singles[static_cast<std::size_t>(arm)] / wall_duration_s; }
    double coincidence_rate() const { return coincidences / wall_duration_s; }

    bool consistent() const {
        return coincidences <= std::min(singles[0], singles[1]) &&
               gates_live[0] <= gates_applied && gates_live[1] <= gates_applied;
    }

    // Sum of tallies from disjoint gate ranges under one setting.
    CountsRecord& operator+=(const CountsRecord& o) {
        singles[0] += o.singles[0];
        singles[1] += o.singles[1];
        coincidences += o.coincidences;
        gates_applied += o.gates_applied;
        gates_live[0] += o.gates_live[0];
        gates_live[1] += o.gates_live[1];
        wall_duration_s += o.wall_duration_s;
        return *this;
    }

    friend bool operator==(const CountsRecord& a, const CountsRecord& b) {
        return a.singles == b.singles && a.coincidences == b.coincidences &&
               a.gates_applied == b.gates_applied && a.gates_live == b.gates_live &&
               a.wall_duration_s == b.wall_duration_s;
    }
};

struct TriggerLimit {
    double rate_hz = 0.0;
    bool saturated = false;  // raw formula went negative and was floored
};

// f_in - R_s (T_dead / T_trig), floored at zero
inline TriggerLimit max_trigger_rate(double f_in, double singles_rate, double dead_time_s, double gate_period_s) {
    if (!(gate_period_s > 0.0)) throw InvalidArgument("gate period must be > 0");
    if (f_in < 0.0 || singles_rate < 0.0 || dead_time_s < 0.0)
        throw InvalidArgument("rates and dead time must be non-negative");
    const double raw = f_in - singles_rate * (dead_time_s / gate_period_s);
    if (raw < 0.0) return {0.0, true};
    return {raw, false};
}

// f_in / (T_dead / T_trig)
inline double max_singles_rate(double f_in, double dead_time_s, double gate_period_s) {
    if (!(gate_period_s > 0.0)) throw InvalidArgument("gate period must be > 0");
    if (!(dead_time_s > 0.0))
        throw UnboundedRate("singles rate is not limited without dead time", f_in);
    return f_in * gate_period_s / dead_time_s;
}

// N1 N2 / f_trig
inline double accidental_rate(double n1, double n2, double f_trig) {
    if (!(f_trig > 0.0)) throw InvalidArgument("trigger rate must be > 0");
    return n1 * n2 / f_trig;
}

struct CarResult {
    double value = 0.0;
    bool infinite = false;
};

inline CarResult car(double coincidence_rate, double accidental) {
    if (accidental < 0.0) throw InvalidArgument("accidental rate must be >= 0");
    if (accidental == 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {coincidence_rate / accidental, false};
}

// Dead-window state of one gated detector. Gate indices passed in must be
// non-decreasing.
class GatedDetector {
public:
    explicit GatedDetector(const DetectorConfig& cfg)
        : dead_gates_(cfg.dead_gates()), efficiency_(cfg.total_efficiency()),
          dark_(cfg.dark_prob_per_gate) {}

    bool live(std::uint64_t gate) const { return gate >= dead_until_; }
    std::uint64_t dead_until() const { return dead_until_; }

    // Apply a gate whose raw click outcome is already known (photon or dark).
    bool apply(std::uint64_t gate, bool fires) {
        if (!live(gate) || !fires) return false;
        dead_until_ = gate + 1 + dead_gates_;
        return true;
    }

    double click_probability(double photon_present_prob) const {
        return 1.0 - (1.0 - photon_present_prob * efficiency_) * (1.0 - dark_);
    }

    // Stochastic gate: no draw is consumed while dead.
    bool gate_detect(std::uint64_t gate, double photon_present_prob, RandomStream& rng) {
        if (!live(gate)) return false;
        return apply(gate, rng.bernoulli(click_probability(photon_present_prob)));
    }

    // Dead gates a click at `gate` removes from a run ending before `end`.
    std::uint64_t dead_gates_within(std::uint64_t gate, std::uint64_t end) const {
        if (gate + 1 >= end) return 0;
        return std::min<std::uint64_t>(dead_gates_, end - gate - 1);
    }

private:
    std::uint64_t dead_gates_;
    double efficiency_;
    double dark_;
    std::uint64_t dead_until_ = 0;
};

} // namespace sagnac
