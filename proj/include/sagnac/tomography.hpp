// tomography.hpp -- maximum-likelihood two-qubit state reconstruction from
// coincidences in the 16 product bases {H, V, D, R} x {H, V, D, R}.
//
// The state is sigma = T T^dagger / Tr(T T^dagger) with T lower triangular,
// so every iterate is a valid density matrix. The Poisson likelihood with
// the overall rate profiled out is
//     L(T) = sum_b n_b log q_b - n log sum_b q_b,   q_b = Tr(M_b T T^dagger),
// which is invariant under scaling T. BFGS with backtracking maximizes it;
// a step is accepted only if L does not decrease.

#pragma once

#include "analysis.hpp"
#include "detection.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "polarization.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace sagnac {

struct TomographyOptions {
    int max_iterations = 10'000;
    double gradient_tolerance = 1e-8;
};

struct TomographyResult {
    DensityMatrix rho = DensityMatrix::maximally_mixed();
    double fidelity = 0;  // against the target
    double log_likelihood = 0;  // per count, at rho
    int iterations = 0;
    bool converged = false;
    // Linear inversion, before and after projection onto physical states.
    Matrix4 linear_rho = Matrix4::Zero();
    double linear_min_eigenvalue = 0;
    double linear_fidelity = 0;
    // Accepted-step likelihoods, first entry at the starting point.
    std::vector<double> trace;
};

namespace detail {

using TomoParams = Eigen::Matrix<double, 16, 1>;

inline std::array<Matrix4, 16> tomography_operators() {
    std::array<Matrix4, 16> m;
    const auto settings = tomography_settings();
    for (std::size_t b = 0; b < 16; ++b)
        m[b] = kron(settings[b].arm1.projector(), settings[b].arm2.projector());
    return m;
}

// Layout: 4 real diagonal entries, then (re, im) of the 6 entries below it.
inline Matrix4 unpack(const TomoParams& t) {
    Matrix4 m = Matrix4::Zero();
    int k = 4;
    for (int i = 0; i < 4; ++i) {
        m(i, i) = t(i);
        for (int j = 0; j < i; ++j) {
            m(i, j) = Complex(t(k), t(k + 1));
            k += 2;
        }
    }
    return m;
}

inline TomoParams pack(const Matrix4& m) {
    TomoParams t;
    int k = 4;
    for (int i = 0; i < 4; ++i) {
        t(i) = m(i, i).real();
        for (int j = 0; j < i; ++j) {
            t(k) = m(i, j).real();
            t(k + 1) = m(i, j).imag();
            k += 2;
        }
    }
    return t;
}

struct Likelihood {
    std::array<Matrix4, 16> ops;
    std::array<double, 16> n{};
    double total = 0;

    // L / total; -inf where a basis with counts has zero probability.
    double value(const TomoParams& t) const {
        const Matrix4 tm = unpack(t);
        const Matrix4 s = tm * tm.adjoint();
        double sum_q = 0, acc = 0;
        for (std::size_t b = 0; b < 16; ++b) {
            const double q = (ops[b] * s).trace().real();
            sum_q += q;
            if (n[b] > 0) {
                if (!(q > 0)) return -std::numeric_limits<double>::infinity();
                acc += n[b] * std::log(q);
            }
        }
        if (!(sum_q > 0)) return -std::numeric_limits<double>::infinity();
        return (acc - total * std::log(sum_q)) / total;
    }

    TomoParams gradient(const TomoParams& t) const {
        const Matrix4 tm = unpack(t);
        const Matrix4 s = tm * tm.adjoint();
        std::array<double, 16> q{};
        double sum_q = 0;
        for (std::size_t b = 0; b < 16; ++b) {
            q[b] = (ops[b] * s).trace().real();
            sum_q += q[b];
        }
        // dq_b/dRe T = 2 Re(M_b T), dq_b/dIm T = 2 Im(M_b T)
        Matrix4 g = Matrix4::Zero();
        for (std::size_t b = 0; b < 16; ++b) {
            const double wgt = (n[b] > 0 ? n[b] / q[b] : 0.0) - total / sum_q;
            g += wgt * (ops[b] * tm);
        }
        g *= 2.0 / total;
        TomoParams out;
        int k = 4;
        for (int i = 0; i < 4; ++i) {
            out(i) = g(i, i).real();
            for (int j = 0; j < i; ++j) {
                out(k) = g(i, j).real();
                out(k + 1) = g(i, j).imag();
                k += 2;
            }
        }
        return out;
    }
};

inline DensityMatrix project_physical(const Matrix4& m) {
    const Matrix4 h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix4> es(h);
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
    if (!(ev.sum() > 0)) return DensityMatrix::maximally_mixed();
    ev /= ev.sum();
    Matrix4 r = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    return DensityMatrix::from_unnormalized(0.5 * (r + r.adjoint()));
}

} // namespace detail

// Solves n_b = N Tr(M_b X) for Hermitian X in the Pauli-product basis, then
// divides by the trace. The result need not be positive.
inline Matrix4 linear_inversion(const std::array<double, 16>& counts) {
    const auto ops = detail::tomography_operators();
    const std::array<Jones, 4> pauli = [] {
        std::array<Jones, 4> p;
        p[0] << 1, 0, 0, 1;
        p[1] << 0, 1, 1, 0;
        p[2] << 0, Complex(0, -1), Complex(0, 1), 0;
        p[3] << 1, 0, 0, -1;
        return p;
    }();
    std::array<Matrix4, 16> basis;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) basis[static_cast<std::size_t>(4 * i + j)] = kron(pauli[i], pauli[j]);
    Eigen::Matrix<double, 16, 16> a;
    Eigen::Matrix<double, 16, 1> y;
    for (std::size_t b = 0; b < 16; ++b) {
        y(static_cast<Eigen::Index>(b)) = counts[b];
        for (std::size_t k = 0; k < 16; ++k)
            a(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = (ops[b] * basis[k]).trace().real();
    }
    const Eigen::Matrix<double, 16, 1> r = a.fullPivLu().solve(y);
    Matrix4 x = Matrix4::Zero();
    for (std::size_t k = 0; k < 16; ++k) x += r(static_cast<Eigen::Index>(k)) * basis[k];
    const double tr = x.trace().real();
    if (!(std::abs(tr) > 0)) throw InvalidArgument("tomography counts carry no information");
    return x / tr;
}

// counts in the order of tomography_settings(). Negative entries (possible
// after accidental subtraction) are set to zero: the likelihood has no
// maximum otherwise.
inline TomographyResult tomography(const std::array<double, 16>& counts, const PolarizationKet& target,
                                   const TomographyOptions& opt = {}) {
    detail::Likelihood like{detail::tomography_operators(), {}, 0};
    for (std::size_t b = 0; b < 16; ++b) {
        if (!std::isfinite(counts[b])) throw InvalidArgument("tomography counts must be finite");
        like.n[b] = std::max(0.0, counts[b]);
        like.total += like.n[b];
    }
    if (!(like.total > 0)) throw InvalidArgument("tomography needs non-zero total counts");

    TomographyResult res;
    res.linear_rho = linear_inversion(like.n);
    {
        Eigen::SelfAdjointEigenSolver<Matrix4> es(0.5 * (res.linear_rho + res.linear_rho.adjoint()));
        res.linear_min_eigenvalue = es.eigenvalues()(0);
        const Ket4& v = target.amplitudes();
        res.linear_fidelity = (v.adjoint() * res.linear_rho * v)(0, 0).real();
    }

    // Start from the physical projection, mixed slightly so the Cholesky
    // factor exists and no basis starts at zero probability.
    const DensityMatrix start = detail::project_physical(res.linear_rho);
    const Matrix4 seed = 0.9 * start.matrix() + 0.1 * Matrix4::Identity() / 4.0;
    Eigen::LLT<Matrix4> llt(seed);
    detail::TomoParams t = detail::pack(llt.matrixL());

    double f = like.value(t);
    detail::TomoParams g = like.gradient(t);
    Eigen::Matrix<double, 16, 16> h = Eigen::Matrix<double, 16, 16>::Identity();
    res.trace.push_back(f);

    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (g.norm() < opt.gradient_tolerance) {
            res.converged = true;
            break;
        }
        // Ascent direction from the inverse-Hessian estimate.
        detail::TomoParams d = h * g;
        if (!(d.dot(g) > 0)) {
            h.setIdentity();
            d = g;
        }
        double step = 1.0;
        detail::TomoParams tn;
        double fn = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            tn = t + step * d;
            fn = like.value(tn);
            if (std::isfinite(fn) && fn >= f + 1e-4 * step * d.dot(g)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Stalled at the resolution of double precision.
            if (h.isIdentity()) {
                res.converged = g.norm() < std::sqrt(opt.gradient_tolerance);
                break;
            }
            h.setIdentity();
            continue;
        }
        // Keep T at unit norm; L does not see the scale.
        const double scale = detail::unpack(tn).norm();
        tn /= scale;
        const detail::TomoParams gn = like.gradient(tn);
        const detail::TomoParams s = tn - t;
        const detail::TomoParams yv = g - gn;  // gradient of -L
        const double sy = s.dot(yv);
        if (sy > 1e-300) {
            const double rho_k = 1.0 / sy;
            const Eigen::Matrix<double, 16, 16> id = Eigen::Matrix<double, 16, 16>::Identity();
            h = (id - rho_k * s * yv.transpose()) * h * (id - rho_k * yv * s.transpose()) +
                rho_k * s * s.transpose();
        }
        t = tn;
        f = fn;
        g = gn;
        res.trace.push_back(f);
    }
    res.iterations = it;
    const Matrix4 tm = detail::unpack(t);
    const Matrix4 s = tm * tm.adjoint();
    const Matrix4 rho = s / s.trace().real();
    res.rho = DensityMatrix::from_unnormalized(0.5 * (rho + rho.adjoint()));
    res.log_likelihood = f;
    res.fidelity = fidelity(res.rho, target);
    return res;
}

// Records in tomography_settings() order, reduced as raw or net counts.
inline TomographyResult tomography(std::span<const CountsRecord> records, const PolarizationKet& target,
                                   CountMode mode, double f_trig, const TomographyOptions& opt = {}) {
    if (records.size() != 16) throw InvalidArgument("tomography needs 16 basis records");
    std::array<double, 16> c{};
    for (std::size_t b = 0; b < 16; ++b) c[b] = coincidences(records[b], mode, f_trig);
    return tomography(c, target, opt);
}

// Exact expected counts for a state, scale coincidences per unit probability.
inline std::array<double, 16> ideal_tomography_counts(const DensityMatrix& rho, double scale) {
    const auto ops = detail::tomography_operators();
    std::array<double, 16> c{};
    for (std::size_t b = 0; b < 16; ++b) c[b] = scale * std::max(0.0, (rho.matrix() * ops[b]).trace().real());
    return c;
}

} // namespace sagnac
