// polarization.hpp -- two-photon polarization algebra
//
// Kets and density matrices live in the product basis ordered
// (HH, HV, VH, VV); the first letter is photon 1 (detector D1), the
// second photon 2 (D2). Angles are radians measured counterclockwise
// from the H axis; conversion from degrees happens at the I/O boundary.

#pragma once

#include "error.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace sagnac {

using Complex = std::complex<double>;
using Jones = Eigen::Matrix2cd;
using Ket2 = Eigen::Vector2cd;
using Ket4 = Eigen::Vector4cd;
using Matrix4 = Eigen::Matrix4cd;

inline constexpr double pi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / pi; }

inline constexpr double ket_tolerance = 1e-12;
inline constexpr double density_tolerance = 1e-10;
inline constexpr double eigen_floor = -1e-8;

class PolarizationKet {
public:
    // Throws InvalidArgument unless the amplitudes have unit norm (1e-12).
    explicit PolarizationKet(const Ket4& amplitudes) : amp_(amplitudes) {
        if (!amp_.allFinite())
            throw InvalidArgument("ket amplitudes must be finite");
        if (std::abs(amp_.squaredNorm() - 1.0) > ket_tolerance)
            throw InvalidArgument("ket is not normalized");
    }

    static PolarizationKet normalize(const Ket4& amplitudes) {
        const double n = amplitudes.norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw InvalidArgument("cannot normalize a zero or non-finite ket");
        return PolarizationKet(amplitudes / n);
    }

    static PolarizationKet product(const Ket2& photon1, const Ket2& photon2) {
        Ket4 v;
        v << photon1(0) * photon2(0), photon1(0) * photon2(1),
             photon1(1) * photon2(0), photon1(1) * photon2(1);
        return normalize(v);
    }

    const Ket4& amplitudes() const { return amp_; }
    Complex operator[](int i) const { return amp_(i); }

    Matrix4 projector() const { return amp_ * amp_.adjoint(); }

private:
    Ket4 amp_;
};

class DensityMatrix {
public:
    // Validates hermiticity, unit trace and positivity.
    explicit DensityMatrix(const Matrix4& m) : m_(m) {
        if (!m_.allFinite())
            throw InvalidArgument("density matrix entries must be finite");
        if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > density_tolerance)
            throw InvalidArgument("density matrix is not Hermitian");
        if (std::abs(m_.trace() - Complex(1.0, 0.0)) > density_tolerance)
            throw InvalidArgument("density matrix trace is not 1");
        Eigen::SelfAdjointEigenSolver<Matrix4> es(m_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < eigen_floor)
            throw InvalidArgument("density matrix has a negative eigenvalue");
    }

    DensityMatrix(const PolarizationKet& ket) : m_(ket.projector()) {}  // NOLINT

    static DensityMatrix maximally_mixed() { return DensityMatrix(Matrix4::Identity() / 4.0); }

    // p|psi><psi| + (1-p) I/4
    static DensityMatrix werner(const PolarizationKet& ket, double p) {
        if (!(p >= 0.0 && p <= 1.0))
            throw InvalidArgument("werner weight must lie in [0, 1]");
        return DensityMatrix(p * ket.projector() + (1.0 - p) * Matrix4::Identity() / 4.0);
    }

    // Hermitize and renormalize a numerically noisy positive matrix.
    static DensityMatrix from_unnormalized(const Matrix4& m) {
        Matrix4 h = 0.5 * (m + m.adjoint());
        const double tr = h.trace().real();
        if (!(tr > 0.0))
            throw InvalidArgument("matrix has non-positive trace");
        return DensityMatrix(h / tr);
    }

    const Matrix4& matrix() const { return m_; }
    Complex operator()(int r, int c) const { return m_(r, c); }

    Eigen::Vector4d eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Matrix4> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

private:
    Matrix4 m_;
};

struct WaveplateSetting {
    double retardance = pi;      // pi for a half-wave plate, pi/2 for quarter-wave
    double fast_axis_angle = 0;  // radians from H

    static WaveplateSetting half_wave(double angle) { return {pi, angle}; }
    static WaveplateSetting quarter_wave(double angle) { return {pi / 2.0, angle}; }
};

inline Eigen::Matrix2d rotation(double angle) {
    Eigen::Matrix2d r;
    r << std::cos(angle), -std::sin(angle),
         std::sin(angle),  std::cos(angle);
    return r;
}

// R(angle) diag(1, e^{i delta}) R(-angle)
inline Jones jones_operator(const WaveplateSetting& w) {
    const Jones r = rotation(w.fast_axis_angle).cast<Complex>();
    Jones d = Jones::Zero();
    d(0, 0) = 1.0;
    d(1, 1) = std::polar(1.0, w.retardance);
    return r * d * r.adjoint();
}

inline Ket2 linear_polarization(double theta) { return Ket2(std::cos(theta), std::sin(theta)); }

inline Jones polarizer_projector(double theta) {
    const Ket2 v = linear_polarization(theta);
    return v * v.adjoint();
}

// One arm of the analyzer: optional waveplates (applied in list order)
// followed by a linear polarizer.
struct AnalyzerArm {
    double polarizer_angle = 0.0;
    std::vector<WaveplateSetting> plates;
    bool open = false;  // no analyzer in the arm: everything is transmitted

    static AnalyzerArm none() { return {0.0, {}, true}; }

    // Vector e such that the transmission projector is |e><e|.
    Ket2 transmitted_state() const {
        Jones j = Jones::Identity();
        for (const auto& p : plates) j = jones_operator(p) * j;
        return j.adjoint() * linear_polarization(polarizer_angle);
    }

    Jones projector() const {
        if (open) return Jones::Identity();
        const Ket2 e = transmitted_state();
        return e * e.adjoint();
    }

    // Polarizer rotated by an extra 90 degrees.
    AnalyzerArm orthogonal() const { return {polarizer_angle + pi / 2.0, plates, open}; }
};

struct AnalyzerSetting {
    AnalyzerArm arm1;
    AnalyzerArm arm2;

    static AnalyzerSetting polarizers(double theta1, double theta2) {
        return {AnalyzerArm{theta1, {}}, AnalyzerArm{theta2, {}}};
    }

    static AnalyzerSetting open() { return {AnalyzerArm::none(), AnalyzerArm::none()}; }
};

enum class BellKind { Phi, Psi };

inline PolarizationKet bell_state(BellKind kind, double phase) {
    if (!std::isfinite(phase))
        throw InvalidArgument("bell_state phase must be finite");
    const double s = 1.0 / std::sqrt(2.0);
    const Complex e = std::polar(s, phase);
    Ket4 v = Ket4::Zero();
    if (kind == BellKind::Phi) {
        v(0) = s;
        v(3) = e;
    } else {
        v(1) = s;
        v(2) = e;
    }
    return PolarizationKet(v);
}

inline PolarizationKet phi_plus() { return bell_state(BellKind::Phi, 0.0); }
inline PolarizationKet phi_minus() { return bell_state(BellKind::Phi, pi); }
inline PolarizationKet psi_plus() { return bell_state(BellKind::Psi, 0.0); }
inline PolarizationKet psi_minus() { return bell_state(BellKind::Psi, pi); }

inline Matrix4 kron(const Jones& a, const Jones& b) {
    Matrix4 k;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return k;
}

inline PolarizationKet apply_local(const PolarizationKet& ket, const Jones& op1, const Jones& op2) {
    return PolarizationKet::normalize(kron(op1, op2) * ket.amplitudes());
}

// |<a|b>| = 1 within tol
inline bool same_up_to_global_phase(const PolarizationKet& a, const PolarizationKet& b,
                                    double tol = ket_tolerance) {
    return std::abs(std::abs(a.amplitudes().dot(b.amplitudes())) - 1.0) <= tol;
}

inline Jones reduced_arm1(const DensityMatrix& rho) {
    Jones r;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            r(a, b) = rho(2 * a, 2 * b) + rho(2 * a + 1, 2 * b + 1);
    return r;
}

inline Jones reduced_arm2(const DensityMatrix& rho) {
    Jones r;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            r(a, b) = rho(a, b) + rho(2 + a, 2 + b);
    return r;
}

// Joint outcome probabilities (pass/pass, pass/block, block/pass, block/block)
// of the two arm analyzers.
inline std::array<double, 4> outcome_probabilities(const DensityMatrix& rho, const AnalyzerSetting& s) {
    const Jones p1 = s.arm1.projector();
    const Jones p2 = s.arm2.projector();
    const Jones q1 = Jones::Identity() - p1;
    const Jones q2 = Jones::Identity() - p2;
    auto expect = [&](const Jones& a, const Jones& b) {
        return std::max(0.0, (rho.matrix() * kron(a, b)).trace().real());
    };
    return {expect(p1, p2), expect(p1, q2), expect(q1, p2), expect(q1, q2)};
}

inline double coincidence_probability(const DensityMatrix& rho, const AnalyzerSetting& s) {
    return outcome_probabilities(rho, s)[0];
}

// Tr[rho (Pi(theta1) (x) Pi(theta2))]
inline double coincidence_probability(const DensityMatrix& rho, double theta1, double theta2) {
    return (rho.matrix() * kron(polarizer_projector(theta1), polarizer_projector(theta2))).trace().real();
}

inline double coincidence_probability(const PolarizationKet& ket, double theta1, double theta2) {
    const Ket2 a = linear_polarization(theta1);
    const Ket2 b = linear_polarization(theta2);
    const PolarizationKet proj = PolarizationKet::product(a, b);
    return std::norm(proj.amplitudes().dot(ket.amplitudes()));
}

// Correlation coefficient built from the four coincidence probabilities at
// (t1,t2), (t1,t2+90), (t1+90,t2), (t1+90,t2+90).
template <typename State>
double ideal_correlation(const State& state, double theta1, double theta2) {
    const double b1 = theta1 + pi / 2.0;
    const double b2 = theta2 + pi / 2.0;
    const double c11 = coincidence_probability(state, theta1, theta2);
    const double c12 = coincidence_probability(state, theta1, b2);
    const double c21 = coincidence_probability(state, b1, theta2);
    const double c22 = coincidence_probability(state, b1, b2);
    const double total = c11 + c12 + c21 + c22;
    if (!(total > 0.0))
        throw InvalidArgument("state has no weight in the analyzer settings");
    return std::clamp((c11 - c12 - c21 + c22) / total, -1.0, 1.0);
}

// <psi|rho|psi>
inline double fidelity(const DensityMatrix& rho, const PolarizationKet& target) {
    const Ket4& v = target.amplitudes();
    return std::clamp((v.adjoint() * rho.matrix() * v)(0, 0).real(), 0.0, 1.0);
}

} // namespace sagnac
