#include <catch_amalgamated.hpp>

#include <sagnac/tomography.hpp>

#include <cmath>
#include <random>

using namespace sagnac;
using Catch::Matchers::WithinAbs;

namespace {

bool physical(const DensityMatrix& rho) {
    const auto ev = rho.eigenvalues();
    return ev.minCoeff() >= -1e-12 && std::abs(rho.matrix().trace().real() - 1.0) < 1e-12 &&
           (rho.matrix() - rho.matrix().adjoint()).cwiseAbs().maxCoeff() < 1e-12;
}

bool monotone(const std::vector<double>& t) {
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] < t[i - 1]) return false;
    return true;
}

} // namespace

TEST_CASE("exact Phi+ counts") {
    const auto counts = ideal_tomography_counts(DensityMatrix(phi_plus()), 1e4);
    const auto r = tomography(counts, phi_plus());
    CHECK(r.fidelity >= 0.999);
    CHECK(physical(r.rho));
    CHECK(monotone(r.trace));
    CHECK_THAT(r.linear_fidelity, WithinAbs(1.0, 1e-9));
}

TEST_CASE("Werner counts recover the analytic fidelity") {
    const auto counts = ideal_tomography_counts(DensityMatrix::werner(phi_plus(), 0.9), 1e5);
    const auto r = tomography(counts, phi_plus());
    CHECK_THAT(r.fidelity, WithinAbs(0.925, 0.01));
    CHECK(r.converged);
    CHECK(physical(r.rho));
    CHECK(monotone(r.trace));
}

TEST_CASE("equal counts give the maximally mixed state") {
    std::array<double, 16> counts;
    counts.fill(1000);
    const auto r = tomography(counts, psi_minus());
    CHECK((r.rho.matrix() - Matrix4::Identity() / 4.0).cwiseAbs().maxCoeff() < 1e-4);
    CHECK_THAT(r.fidelity, WithinAbs(0.25, 1e-4));
    CHECK_THAT(tomography(counts, phi_plus()).fidelity, WithinAbs(0.25, 1e-4));
}

TEST_CASE("Poisson-noised and negative counts stay physical") {
    std::mt19937_64 gen(31);
    const auto mean = ideal_tomography_counts(DensityMatrix::werner(psi_plus(), 0.8), 300);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 16> c;
        for (std::size_t b = 0; b < 16; ++b) {
            c[b] = static_cast<double>(std::poisson_distribution<long>(mean[b] + 1e-9)(gen));
            // Accidental-subtracted data can dip below zero.
            if (trial % 2) c[b] -= 3;
        }
        const auto r = tomography(c, psi_plus());
        CHECK(physical(r.rho));
        CHECK(monotone(r.trace));
        CHECK(r.fidelity >= 0.0);
        CHECK(r.fidelity <= 1.0);
    }
}

TEST_CASE("linear inversion of exact counts is exact") {
    const auto rho = DensityMatrix::werner(phi_minus(), 0.6);
    const Matrix4 lin = linear_inversion(ideal_tomography_counts(rho, 1));
    CHECK((lin - rho.matrix()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("tomography input errors") {
    std::array<double, 16> zero{};
    CHECK_THROWS_AS(tomography(zero, phi_plus()), InvalidArgument);
    std::vector<CountsRecord> few(3);
    CHECK_THROWS_AS(tomography(few, phi_plus(), CountMode::Raw, 20e6), InvalidArgument);
}

TEST_CASE("iteration cap reports non-convergence with the best iterate") {
    const auto counts = ideal_tomography_counts(DensityMatrix::werner(phi_plus(), 0.7), 1e4);
    const auto r = tomography(counts, phi_plus(), {1, 1e-30});
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 1);
    CHECK(physical(r.rho));
}
