#include <catch_amalgamated.hpp>

#include <sagnac/analysis.hpp>
#include <sagnac/experiment.hpp>

#include <cmath>
#include <random>

using namespace sagnac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CountsRecord record(double s1, double s2, double c, double seconds = 1.0) {
    CountsRecord r;
    r.singles = {s1, s2};
    r.coincidences = c;
    r.wall_duration_s = seconds;
    r.gates_applied = 20e6 * seconds;
    r.gates_live = {r.gates_applied, r.gates_applied};
    return r;
}

std::vector<double> angles(double step = 10) {
    std::vector<double> a;
    for (double t = 0; t <= 360; t += step) a.push_back(t);
    return a;
}

} // namespace

TEST_CASE("accidental subtraction examples") {
    CHECK_THAT(subtract_accidentals(record(29e3, 25e3, 100), 20e6), WithinAbs(63.75, 1e-9));
    CHECK(subtract_accidentals(record(0, 0, 100), 20e6) == 100);
    CHECK_THAT(subtract_accidentals(record(29e3, 25e3, 36.25), 20e6), WithinAbs(0, 1e-12));
    // Negative values are reported as they are.
    CHECK(subtract_accidentals(record(29e3, 25e3, 10), 20e6) < 0);
    CHECK_THROWS_AS(subtract_accidentals(record(1, 1, 1), 0), InvalidArgument);
}

TEST_CASE("accidental subtraction scales bilinearly") {
    const double a = 2.7;
    const auto base = record(3e4, 2e4, 80);
    const auto scaled = record(3e4 * std::sqrt(a), 2e4 * std::sqrt(a), 80 * a);
    CHECK_THAT(subtract_accidentals(scaled, 20e6), WithinRel(a * subtract_accidentals(base, 20e6), 1e-12));
}

TEST_CASE("fringe fit examples") {
    const auto x = angles();
    std::vector<double> pure, offset, flat;
    for (double t : x) {
        const double c = std::pow(std::cos(deg_to_rad(t)), 2);
        pure.push_back(50 * c);
        offset.push_back(45 * c + 5);
        flat.push_back(17);
    }
    const auto a = fit_fringe(x, pure);
    CHECK_THAT(a.visibility, WithinAbs(1.0, 1e-9));
    CHECK_THAT(a.offset, WithinAbs(0.0, 1e-9));
    CHECK_THAT(a.amplitude, WithinAbs(50.0, 1e-9));
    const auto b = fit_fringe(x, offset);
    CHECK_THAT(b.visibility, WithinAbs(9.0 / 11.0, 1e-9));
    CHECK_THAT(b.fitted_max(), WithinAbs(50, 1e-9));
    CHECK_THAT(b.fitted_min(), WithinAbs(5, 1e-9));
    const auto c = fit_fringe(x, flat);
    CHECK_THAT(c.visibility, WithinAbs(0.0, 1e-12));
}

TEST_CASE("fringe fit phase and sin^2 model") {
    const auto x = angles(5);
    std::vector<double> y;
    for (double t : x) y.push_back(30 * std::pow(std::sin(deg_to_rad(t - 20)), 2) + 2);
    const auto s = fit_fringe(x, y, FringeModel::Sin2);
    CHECK_THAT(s.visibility, WithinAbs(30.0 / 34.0, 1e-9));
    CHECK_THAT(s.phase, WithinAbs(deg_to_rad(20), 1e-9));
    const auto c = fit_fringe(x, y);
    CHECK_THAT(c.phase, WithinAbs(deg_to_rad(110), 1e-9));
}

TEST_CASE("fringe fit with a free period") {
    std::vector<double> x, y;
    for (int i = 0; i <= 30; ++i) {
        x.push_back(0.05 * i);
        y.push_back(40 * std::pow(std::cos(pi * x.back() / 1.3 - 0.4), 2) + 3);
    }
    const auto f = fit_fringe(x, y, FringeModel::Cos2, 1.2, true);
    CHECK_THAT(f.period, WithinAbs(1.3, 1e-7));
    CHECK_THAT(f.visibility, WithinAbs(40.0 / 46.0, 1e-7));
}

TEST_CASE("fringe fit failures") {
    std::vector<double> x{0, 10, 20, 30}, y{1, 2, 3, 4};
    CHECK_THROWS_AS(fit_fringe(x, y), FitError);
    std::vector<double> narrow{0, 10, 20, 30, 40, 50}, ny{1, 2, 3, 4, 5, 6};
    CHECK_THROWS_AS(fit_fringe(narrow, ny), FitError);
    const auto a = angles();
    const std::vector<double> zero(a.size(), 0.0);
    CHECK_THROWS_AS(fit_fringe(a, zero), FitError);
}

TEST_CASE("fringe fit recovers Poisson-noised fringes") {
    const auto x = angles();
    std::mt19937_64 gen(2024);
    const double v_true = 0.93, phase_true = deg_to_rad(12);
    const double peak = 1e4;
    double v_sum = 0, ph_sum = 0;
    const int trials = 100;
    for (int k = 0; k < trials; ++k) {
        std::vector<double> y;
        for (double t : x) {
            const double m = peak * ((1 - v_true) / (1 + v_true) +
                                     2 * v_true / (1 + v_true) * std::pow(std::cos(deg_to_rad(t) - phase_true), 2));
            y.push_back(static_cast<double>(std::poisson_distribution<long>(m)(gen)));
        }
        const auto f = fit_fringe(x, y);
        v_sum += f.visibility;
        ph_sum += f.phase;
        CHECK(f.visibility_err > 0);
    }
    CHECK_THAT(v_sum / trials, WithinAbs(v_true, 0.01));
    CHECK_THAT(rad_to_deg(ph_sum / trials), WithinAbs(12.0, 0.5));
}

TEST_CASE("correlation coefficient examples") {
    auto counts = [](double a, double b) {
        const double q = pi / 2;
        return std::array<double, 4>{std::pow(std::cos(a - b), 2), std::pow(std::cos(a - b - q), 2),
                                     std::pow(std::cos(a + q - b), 2), std::pow(std::cos(a - b), 2)};
    };
    const auto c = counts(0, deg_to_rad(22.5));
    CHECK_THAT(correlation_coefficient(c, c).value, WithinAbs(1 / std::sqrt(2.0), 1e-12));
    CHECK(correlation_coefficient({5, 5, 5, 5}, {5, 5, 5, 5}).value == 0);
    CHECK(correlation_coefficient({7, 0, 0, 3}, {7, 0, 0, 3}).value == 1);
    CHECK_THROWS_AS(correlation_coefficient({0, 0, 0, 0}, {0, 0, 0, 0}), InvalidArgument);

    // Poisson error of E = (a - b)/(a + b) with two bins: sqrt((1 - E^2)/N).
    const auto e = correlation_coefficient({60, 40, 0, 0}, {60, 40, 0, 0});
    CHECK_THAT(e.sigma, WithinRel(std::sqrt((1 - 0.04) / 100), 1e-12));
}

TEST_CASE("CHSH examples") {
    const auto r = chsh({Correlation{0.6857, 0.0229}, {-0.6797, 0.0179}, {0.6795, 0.0148}, {0.6745, 0.0225}});
    CHECK_THAT(r.s, WithinAbs(2.7194, 1e-4));
    CHECK_THAT(r.sigma_s, WithinAbs(0.0396, 5e-4));
    CHECK_THAT(r.n_sigma, WithinAbs(18.17, 0.1));
    const double h = 1 / std::sqrt(2.0);
    CHECK_THAT(chsh({Correlation{h, 0}, {-h, 0}, {h, 0}, {h, 0}}).s, WithinAbs(2 * std::sqrt(2.0), 1e-12));
}

TEST_CASE("CHSH is linear in E and invariant under the primed swap") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(gen), b = u(gen), c = u(gen), d = u(gen);
        const double s = chsh({Correlation{a, 0}, {b, 0}, {c, 0}, {d, 0}}).s;
        CHECK_THAT(s, WithinAbs(std::abs(a - b + c + d), 1e-15));
        // Swap theta2 with theta2' and turn theta1 by 90 degrees.
        CHECK_THAT(chsh({Correlation{-b, 0}, {-a, 0}, {d, 0}, {c, 0}}).s, WithinAbs(s, 1e-15));
    }
}

TEST_CASE("Poisson sigma and expected S examples") {
    CHECK_THAT(chsh_poisson_sigma(1, 8), WithinAbs(std::sqrt(1.0 / 8), 1e-12));
    CHECK_THAT(chsh_poisson_sigma(0.9615, 750), WithinAbs(0.03787, 1e-5));
    CHECK_THAT((2.7194 - 2) / chsh_poisson_sigma(0.9615, 750), WithinAbs(19.0, 0.05));
    CHECK_THAT(chsh_poisson_sigma(0, 50), WithinAbs(std::sqrt(2.0 / 50), 1e-15));
    CHECK_THROWS_AS(chsh_poisson_sigma(0.5, 0), InvalidArgument);

    CHECK(expected_s(1) - 2 * std::sqrt(2.0) == 0);
    CHECK_THAT(expected_s(0.9615), WithinAbs(2.7195, 1e-4));
    CHECK_THAT(expected_s(0.7071), WithinAbs(2.0, 1e-4));
}

TEST_CASE("CHSH of analytic records matches expected S of the fitted visibility") {
    ExperimentPlan p;
    p.analytic = true;
    for (auto& d : p.detectors) d.dark_prob_per_gate = 0;
    const auto state = DensityMatrix::werner(phi_plus(), 0.9);
    const auto rec = run_chsh(p, state);
    const auto s = chsh(rec, CountMode::Raw, p.trigger_rate_hz());
    const auto sw = sweep_polarizer(p, state, 0, angles());
    std::vector<double> y;
    for (const auto& r : sw.records) y.push_back(r.coincidences);
    const auto f = fit_fringe(sw.axis, y);
    CHECK_THAT(s.s, WithinAbs(expected_s(f.visibility), 1e-6));
}

TEST_CASE("pair probability estimator") {
    CHECK_THAT(estimate_pair_probability(32e3, 32e3, 1113, 20e6), WithinAbs(0.046, 1e-4));
    const double k = 3.3;
    CHECK_THAT(estimate_pair_probability(k * 32e3, k * 32e3, k * 1113, 20e6),
               WithinRel(k * estimate_pair_probability(32e3, 32e3, 1113, 20e6), 1e-12));
    // Round trip through the oracle relations.
    const double mu = 0.037, e1 = 0.03, e2 = 0.02, f = 20e6;
    CHECK_THAT(estimate_pair_probability(mu * e1 * f, mu * e2 * f, mu * e1 * e2 * f, f), WithinRel(mu, 1e-12));
    CHECK_THROWS_AS(estimate_pair_probability(1, 1, 0, 20e6), InvalidArgument);
}

TEST_CASE("pair probability from simulated rates at mu = 0.02") {
    ExperimentPlan p;
    p.source.pump_power_mw = 0.02 / 0.046;
    for (auto& d : p.detectors) {
        d.dead_time_us = 0;
        d.efficiency = 0.5;
        d.coupling_efficiency = 1;
    }
    p.pulses_per_setting = 4'000'000;
    p.batch_size = 1 << 18;
    const auto r = sweep_power(p, DensityMatrix(phi_plus()), {p.source.pump_power_mw}).records[0];
    const double f = p.trigger_rate_hz();
    const double mu = estimate_pair_probability(r.singles_rate(0), r.singles_rate(1),
                                                subtract_accidentals(r, f), f);
    CHECK_THAT(mu, WithinRel(0.02, 0.05));
}
