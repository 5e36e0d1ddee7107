// source.hpp -- Sagnac-loop source: emitted two-photon state and pair rate

#pragma once

#include "error.hpp"
#include "polarization.hpp"

#include <cmath>

namespace sagnac {

enum class PairStatistics { Poisson, Thermal };

// Descriptive crystal and geometry data. Carried through configs and
// manifests; no computation reads these.
struct CrystalMetadata {
    double grating_period_um = 19.2;
    double length_mm = 10.0;
    double opening_angle_deg = 4.6;
    double temperature_c = 40.0;
};

struct SourceConfig {
    double mu0 = 0.046;          // mean pairs per pulse at p0
    double p0_mw = 1.0;          // reference pump power
    double pump_power_mw = 1.0;  // operating power
    double phase_offset = 0.0;   // radians
    double crystal_position_mm = 0.0;
    double reference_position_mm = 0.0;  // z0
    double phase_period_mm = 1.0;        // crystal travel per 2 pi of phase
    double imbalance = 0.0;              // CW/CCW amplitude imbalance epsilon
    // Weight of the pure state against white noise in the emitted state.
    double intrinsic_visibility = 0.96;
    PairStatistics statistics = PairStatistics::Poisson;
    double thermal_modes = 1.0;  // effective mode count for thermal statistics
    CrystalMetadata crystal{};

    void validate() const {
        if (!(mu0 >= 0.0) || !std::isfinite(mu0)) throw InvalidArgument("mu0 must be >= 0");
        if (!(p0_mw > 0.0) || !std::isfinite(p0_mw)) throw InvalidArgument("p0 must be > 0");
        if (!(pump_power_mw >= 0.0)) throw InvalidArgument("pump power must be >= 0");
        if (!(phase_period_mm > 0.0)) throw InvalidArgument("phase_period must be > 0");
        if (!std::isfinite(phase_offset)) throw InvalidArgument("phase_offset must be finite");
        if (!(std::abs(imbalance) < 1.0)) throw InvalidArgument("imbalance must lie in (-1, 1)");
        if (!(intrinsic_visibility >= 0.0 && intrinsic_visibility <= 1.0))
            throw InvalidArgument("intrinsic_visibility must lie in [0, 1]");
        if (!(thermal_modes >= 1.0)) throw InvalidArgument("thermal_modes must be >= 1");
    }
};

// Output-arm plates: H2 (half-wave) then Q2 (quarter-wave), photon 2 only.
struct LoopSettings {
    double h2_angle = 0.0;
    double q2_angle = 0.0;
};

// phi(z) = phase_offset + 2 pi (z - z0) / period
inline double phase_of_position(const SourceConfig& cfg, double z_mm) {
    if (!(cfg.phase_period_mm > 0.0))
        throw InvalidArgument("phase_period must be > 0");
    return cfg.phase_offset + 2.0 * pi * (z_mm - cfg.reference_position_mm) / cfg.phase_period_mm;
}

inline double pair_mean_per_pulse(const SourceConfig& cfg, double power_mw) {
    if (!(power_mw >= 0.0) || !std::isfinite(power_mw))
        throw InvalidArgument("pump power must be >= 0");
    return cfg.mu0 * power_mw / cfg.p0_mw;
}

// Arm-2 plate operator relative to the reference orientation (both plates
// at 0). The fixed retardance at the reference is absorbed by the phase
// compensation that defines phi = 0.
inline Jones arm2_operator(const LoopSettings& loop) {
    const auto stack = [](double h, double q) {
        return jones_operator(WaveplateSetting::quarter_wave(q)) *
               jones_operator(WaveplateSetting::half_wave(h));
    };
    return stack(loop.h2_angle, loop.q2_angle) * stack(0.0, 0.0).inverse();
}

// 1/sqrt2 (|HH> + e^{i phi} |VV>) at the configured crystal position,
// followed by the arm-2 plates.
inline PolarizationKet prepare_state(const SourceConfig& cfg, const LoopSettings& loop) {
    const double phi = phase_of_position(cfg, cfg.crystal_position_mm);
    Ket4 v = Ket4::Zero();
    v(0) = std::sqrt((1.0 + cfg.imbalance) / 2.0);
    v(3) = std::polar(std::sqrt((1.0 - cfg.imbalance) / 2.0), phi);
    const PolarizationKet loop_state = PolarizationKet::normalize(v);
    return apply_local(loop_state, Jones::Identity(), arm2_operator(loop));
}

// Mixed state handed to the detectors: the prepared ket diluted by white
// noise down to the intrinsic visibility.
inline DensityMatrix emitted_state(const SourceConfig& cfg, const LoopSettings& loop) {
    return DensityMatrix::werner(prepare_state(cfg, loop), cfg.intrinsic_visibility);
}

inline LoopSettings loop_for(BellKind kind, bool minus) {
    LoopSettings l;
    if (kind == BellKind::Psi) l.h2_angle = deg_to_rad(45.0);
    if (minus) l.q2_angle = deg_to_rad(90.0);
    return l;
}

} // namespace sagnac
