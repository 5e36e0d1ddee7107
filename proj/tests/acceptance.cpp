// Acceptance run: one PASS/FAIL line per criterion with the measured values.

#include <sagnac/sagnac.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace sagnac;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const char* id, bool ok, const std::string& detail, double seconds) {
    std::printf("%s %s  %s  [%.3g s]\n", id, ok ? "PASS" : "FAIL", detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

template <typename Fn>
void criterion(const char* id, Fn&& fn) {
    const auto t0 = Clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail += std::string(" exception: ") + e.what();
    }
    report(id, ok, detail, std::chrono::duration<double>(Clock::now() - t0).count());
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<double> degrees(double step) {
    std::vector<double> a;
    for (int k = 0; k * step <= 360.0 + 1e-9; ++k) a.push_back(k * step);
    return a;
}

std::vector<double> column(const std::vector<CountsRecord>& r, CountMode m, double f) {
    std::vector<double> out;
    for (const auto& x : r) out.push_back(coincidences(x, m, f));
    return out;
}

} // namespace

int main() {
    const ExperimentPlan nominal{};
    const double f = nominal.trigger_rate_hz();

    criterion("AC1", [](std::string& d) {
        const auto t0 = Clock::now();
        const auto trig = max_trigger_rate(20e6, 32e3, 5e-6, 50e-9);
        const double sing = max_singles_rate(20e6, 5e-6, 50e-9);
        const double us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
        d = fmt("trigger=%.17g Hz singles=%.17g Hz (%.1f us)", trig.rate_hz, sing, us);
        return rel(trig.rate_hz, 16.8e6) <= 2e-16 && rel(sing, 200e3) <= 2e-16 && !trig.saturated && us < 1000;
    });

    criterion("AC2", [](std::string& d) {
        const auto r = chsh({Correlation{0.6857, 0.0229}, {-0.6797, 0.0179}, {0.6795, 0.0148}, {0.6745, 0.0225}});
        d = fmt("S=%.5f dS=%.5f n_sigma=%.3f", r.s, r.sigma_s, r.n_sigma);
        return std::abs(r.s - 2.7194) <= 1e-4 && std::abs(r.sigma_s - 0.0396) <= 5e-4 &&
               std::abs(r.n_sigma - 18.17) <= 0.1;
    });

    criterion("AC3", [&](std::string& d) {
        const auto t0 = Clock::now();
        ExperimentPlan p = nominal;
        p.analytic = true;
        p.pulses_per_setting = 1;
        const auto recs = run_chsh(p, DensityMatrix(phi_plus()),
                                   {0.0, deg_to_rad(45.0), deg_to_rad(22.5), deg_to_rad(67.5)});
        const auto r = chsh(recs, CountMode::Net, p.trigger_rate_hz());
        bool linear = true;
        for (double v : {0.0, 0.25, 1 / std::sqrt(2.0), 0.9615, 1.0})
            linear &= expected_s(v) == 2.0 * std::sqrt(2.0) * v;
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        d = fmt("S=%.12f |S-2sqrt2|=%.2e expected_S(1/sqrt2)=%.12f (%.3f ms)", r.s,
                std::abs(r.s - 2 * std::sqrt(2.0)), expected_s(1 / std::sqrt(2.0)), ms);
        return std::abs(r.s - 2 * std::sqrt(2.0)) <= 1e-9 && linear && std::abs(expected_s(1 / std::sqrt(2.0)) - 2) < 1e-12;
    });

    criterion("AC4", [&](std::string& d) {
        bool ok = true;
        double net_sum = 0, raw_sum = 0;
        const int seeds = 5;
        for (int k = 0; k < seeds; ++k) {
            ExperimentPlan p = nominal;
            p.seed = 1000 + static_cast<std::uint64_t>(k);
            const auto recs = run_chsh(p, emitted_state(p.source, {}));
            const auto net = chsh(recs, CountMode::Net, f);
            const auto raw = chsh(recs, CountMode::Raw, f);
            // Within 3 sigma of the band.
            ok &= in(net.s, 2.64 - 3 * net.sigma_s, 2.80 + 3 * net.sigma_s);
            ok &= in(raw.s, 2.41 - 3 * raw.sigma_s, 2.57 + 3 * raw.sigma_s);
            net_sum += net.s;
            raw_sum += raw.s;
            d += fmt("seed%d net=%.3f+-%.3f raw=%.3f+-%.3f; ", k, net.s, net.sigma_s, raw.s, raw.sigma_s);
        }
        d += fmt("mean net=%.3f raw=%.3f", net_sum / seeds, raw_sum / seeds);
        return ok;
    });

    criterion("AC5", [&](std::string& d) {
        bool ok = true;
        const auto theta2 = degrees(10);
        for (double theta1 : {0.0, 45.0}) {
            ExperimentPlan p = nominal;
            p.seed = substream_seed(nominal.seed, 5, static_cast<std::uint64_t>(theta1));
            const auto sw = sweep_polarizer(p, emitted_state(p.source, {}), theta1, theta2);
            const auto net = fit_fringe(theta2, column(sw.records, CountMode::Net, f));
            const auto raw = fit_fringe(theta2, column(sw.records, CountMode::Raw, f));
            ok &= in(net.visibility, 0.95, 0.99) && in(raw.visibility, 0.86, 0.92);
            d += fmt("%s: net V=%.4f+-%.4f raw V=%.4f+-%.4f; ", theta1 == 0 ? "H/V" : "+-45", net.visibility,
                     net.visibility_err, raw.visibility, raw.visibility_err);
        }
        return ok;
    });

    criterion("AC6", [&](std::string& d) {
        // Pure Phi+ at orthogonal polarizers has no true coincidences; a
        // single 2e7-pulse run holds about ten accidentals, so 100 runs are
        // pooled.
        double c = 0, acc = 0;
        const int runs = 100;
        for (int k = 0; k < runs; ++k) {
            ExperimentPlan p = nominal;
            p.seed = substream_seed(nominal.seed, 6, static_cast<std::uint64_t>(k));
            p.schedule = {{AnalyzerSetting::polarizers(0, deg_to_rad(90)), p.pulses_per_setting}};
            const auto r = run_pulse_train(p, phi_plus())[0];
            c += r.coincidences;
            acc += accidental_rate(r.singles_rate(0), r.singles_rate(1), f) * r.wall_duration_s;
        }
        d = fmt("coincidences=%.0f N1N2/f=%.1f ratio=%.4f (%d x 2e7 pulses)", c, acc, c / acc, runs);
        return rel(c, acc) <= 0.10;
    });

    criterion("AC7", [&](std::string& d) {
        const int n = 21;
        std::vector<double> z;
        for (int i = 0; i < n; ++i) z.push_back(nominal.source.phase_period_mm * i / (n - 1));
        ExperimentPlan p = nominal;
        p.seed = substream_seed(nominal.seed, 7, 0);
        const auto sw = sweep_crystal_position(p, {}, z);
        const auto net = fit_fringe(z, column(sw.records, CountMode::Net, f), FringeModel::Cos2,
                                    nominal.source.phase_period_mm, true);
        const auto raw = fit_fringe(z, column(sw.records, CountMode::Raw, f), FringeModel::Cos2,
                                    nominal.source.phase_period_mm, true);
        double acc = 0;
        for (const auto& r : sw.records) acc += accidental_counts(r, f);
        acc /= n;
        const double min_ratio = raw.fitted_min() / acc;
        d = fmt("net V=%.4f raw V=%.4f period=%.4f+-%.4f mm raw min=%.2f accidental level=%.2f (min/acc=%.3f)",
                net.visibility, raw.visibility, raw.period, raw.period_err, raw.fitted_min(), acc, min_ratio);
        return in(net.visibility, 0.95, 0.99) && in(raw.visibility, 0.85, 0.92) && std::abs(min_ratio - 1) <= 0.15;
    });

    criterion("AC8", [&](std::string& d) {
        bool ok = true;
        for (bool dead : {false, true}) {
            ExperimentPlan base = nominal;
            base.pulses_per_setting = 1'000'000'000;
            if (!dead)
                for (auto& det : base.detectors) det.dead_time_us = 0;
            // Dark singles from a run with the pump off.
            ExperimentPlan dark = base;
            dark.seed = substream_seed(nominal.seed, 8, dead);
            const auto r0 = sweep_power(dark, DensityMatrix(phi_plus()), {0.0}).records[0];
            for (double mu : {0.01, 0.046, 0.1}) {
                ExperimentPlan p = base;
                p.seed = substream_seed(nominal.seed, 80 + dead, static_cast<std::uint64_t>(mu * 1000));
                const double power = mu / nominal.source.mu0 * nominal.source.p0_mw;
                const auto r = sweep_power(p, emitted_state(p.source, {}), {power}).records[0];
                const double s1 = r.singles_rate(0) - r0.singles_rate(0);
                const double s2 = r.singles_rate(1) - r0.singles_rate(1);
                const double est = estimate_pair_probability(s1, s2, subtract_accidentals(r, f), f);
                const double tol = dead ? 0.12 : 0.05;
                ok &= rel(est, mu) <= tol;
                d += fmt("%s mu=%.3f est=%.4f (%.1f%%); ", dead ? "dead" : "no-dead", mu, est, 100 * rel(est, mu));
            }
        }
        return ok;
    });

    criterion("AC9", [](std::string& d) {
        const SpectralConfig cfg;
        const auto jsa = build_jsa(cfg);
        const auto sweep = purity_sweep(jsa, default_filter_sweep());
        double p_inf = 0, p18 = 0, p1 = 0;
        bool mono = true;
        for (std::size_t i = 0; i < sweep.size(); ++i) {
            if (std::isinf(sweep[i].bandwidth_nm)) p_inf = sweep[i].purity;
            if (sweep[i].bandwidth_nm == 18.0) p18 = sweep[i].purity;
            if (sweep[i].bandwidth_nm == 1.0) p1 = sweep[i].purity;
            if (i) mono &= sweep[i].purity < sweep[i - 1].purity;
        }
        const double marginal = marginal_fwhm_nm(jsa);
        d = fmt("grid=%d purity(inf)=%.4f purity(18)=%.4f purity(1)=%.4f monotone=%d marginal=%.2f nm", cfg.grid_size,
                p_inf, p18, p1, mono, marginal);
        return rel(p_inf, 0.022) <= 0.5 && rel(p18, 0.157) <= 0.3 && p1 >= 0.97 && mono && rel(marginal, 132) <= 0.05;
    });

    criterion("AC10", [&](std::string& d) {
        const auto exact = tomography(ideal_tomography_counts(DensityMatrix(phi_plus()), 1e4), phi_plus());
        ExperimentPlan p = nominal;
        p.seed = substream_seed(nominal.seed, 10, 0);
        const auto recs = run_tomography(p, emitted_state(p.source, {}));
        const auto raw = tomography(recs, phi_plus(), CountMode::Raw, f);
        const auto net = tomography(recs, phi_plus(), CountMode::Net, f);
        auto physical = [](const DensityMatrix& r) {
            return r.eigenvalues().minCoeff() >= -1e-12 && std::abs(r.matrix().trace().real() - 1) < 1e-12;
        };
        d = fmt("exact F=%.5f raw F=%.4f net F=%.4f converged=%d/%d/%d", exact.fidelity, raw.fidelity, net.fidelity,
                exact.converged, raw.converged, net.converged);
        return exact.fidelity >= 0.999 && in(raw.fidelity, 0.80, 0.90) && net.fidelity >= 0.94 &&
               physical(exact.rho) && physical(raw.rho) && physical(net.rho);
    });

    criterion("AC11", [&](std::string& d) {
        RandomStream rng(11);
        int bad = 0;
        const std::array<PolarizationKet, 4> bells{phi_plus(), phi_minus(), psi_plus(), psi_minus()};
        for (int i = 0; i < 10000; ++i) {
            const WaveplateSetting w{2 * pi * rng.uniform(), 2 * pi * rng.uniform()};
            const Jones u = jones_operator(w);
            bad += (u * u.adjoint() - Jones::Identity()).cwiseAbs().maxCoeff() > 1e-12;
            const Jones u2 = jones_operator({2 * pi * rng.uniform(), 2 * pi * rng.uniform()});
            const auto k = apply_local(bells[static_cast<std::size_t>(i % 4)], u, u2);
            bad += std::abs(k.amplitudes().squaredNorm() - 1) > 1e-12;
            const double a = 2 * pi * rng.uniform(), b = 2 * pi * rng.uniform();
            const double m = coincidence_probability(k, a, b) + coincidence_probability(k, a, b + pi / 2);
            bad += std::abs(m - 0.5) > 1e-10;  // arm-1 marginal independent of arm 2
            const auto pr = outcome_probabilities(DensityMatrix(k), AnalyzerSetting::polarizers(a, b));
            bad += std::abs(pr[0] + pr[1] + pr[2] + pr[3] - 1) > 1e-12;
        }

        double worst = 0;
        for (int t = 0; t < 1000; ++t) {
            Eigen::MatrixXcd a(8, 8);
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) a(i, j) = Complex(rng.normal(), rng.normal());
            const Eigen::MatrixXcd rho = a * a.adjoint() / (a * a.adjoint()).trace();
            worst = std::max(worst, std::abs(schmidt_purity(a).purity - (rho * rho).trace().real()));
        }

        ExperimentPlan p = nominal;
        p.pulses_per_setting = 4'000'000;
        p.batch_size = 1 << 16;
        std::string serial, threaded;
        for (unsigned w : {1u, 4u}) {
            p.workers = w;
            std::string& out = w == 1 ? serial : threaded;
            for (const auto& r : run_chsh(p, emitted_state(p.source, {}))) out += to_json(r).dump();
        }
        const bool same = serial == threaded && sha256_hex(serial) == sha256_hex(threaded);
        d = fmt("invariant failures=%d (1e4 cases) svd-vs-trace max err=%.2e determinism=%s", bad, worst,
                same ? "identical" : "DIFFERENT");
        return bad == 0 && worst <= 1e-10 && same;
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
