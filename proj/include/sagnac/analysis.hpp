// analysis.hpp -- reduction of counting records: accidental subtraction,
// fringe fits, correlation coefficients, CHSH statistics and the
// pair-probability estimator.

#pragma once

#include "detection.hpp"
#include "error.hpp"
#include "polarization.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace sagnac {

// ---------------------------------------------------------------------------
// accidentals

// Raw coincidence rate minus N1 N2 / f_trig. Negative results are kept.
inline double subtract_accidentals(const CountsRecord& r, double f_trig) {
    if (!(f_trig > 0.0)) throw InvalidArgument("trigger rate must be > 0");
    if (!(r.wall_duration_s > 0.0)) throw InvalidArgument("record has no duration");
    return r.coincidence_rate() - accidental_rate(r.singles_rate(0), r.singles_rate(1), f_trig);
}

// Same correction in counts over the record's duration.
inline double net_coincidences(const CountsRecord& r, double f_trig) {
    return subtract_accidentals(r, f_trig) * r.wall_duration_s;
}

inline double accidental_counts(const CountsRecord& r, double f_trig) {
    return r.coincidences - net_coincidences(r, f_trig);
}

enum class CountMode { Raw, Net };

inline double coincidences(const CountsRecord& r, CountMode mode, double f_trig) {
    return mode == CountMode::Raw ? r.coincidences : net_coincidences(r, f_trig);
}

// ---------------------------------------------------------------------------
// fringe fitting

enum class FringeModel { Cos2, Sin2 };

struct FringeFit {
    double visibility = 0;
    double amplitude = 0;
    double phase = 0;   // radians, in [0, pi)
    double offset = 0;
    double period = 0;  // in units of the abscissa
    double visibility_err = 0;
    double amplitude_err = 0;
    double phase_err = 0;
    double offset_err = 0;
    double period_err = 0;
    double chi2 = 0;
    int iterations = 0;

    double fitted_max() const { return offset + amplitude; }
    double fitted_min() const { return offset; }
};

namespace detail {

struct FringeProblem {
    std::span<const double> x;
    std::span<const double> y;
    std::vector<double> w;
    bool fit_period;

    // params: offset, amplitude, phase (rad), period
    double model(const Eigen::Vector4d& p, double xi) const {
        const double c = std::cos(pi * xi / p(3) - p(2));
        return p(0) + p(1) * c * c;
    }

    double chi2(const Eigen::Vector4d& p) const {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - model(p, x[i]);
            s += w[i] * r * r;
        }
        return s;
    }

    Eigen::MatrixXd jacobian(const Eigen::Vector4d& p) const {
        const int n = fit_period ? 4 : 3;
        Eigen::MatrixXd j(static_cast<Eigen::Index>(x.size()), n);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = pi * x[i] / p(3) - p(2);
            const double c = std::cos(u), s = std::sin(u);
            const auto r = static_cast<Eigen::Index>(i);
            j(r, 0) = 1.0;
            j(r, 1) = c * c;
            j(r, 2) = 2.0 * p(1) * c * s;  // d/dphase of cos^2(u) = 2 c s
            if (fit_period) j(r, 3) = 2.0 * p(1) * c * s * pi * x[i] / (p(3) * p(3));
        }
        return j;
    }

    // Weighted least squares of a + b cos(2 pi x / P) + c sin(2 pi x / P):
    // the Fourier fundamental, which for cos^2 data fixes all three
    // parameters at the given period.
    Eigen::Vector4d fundamental(double period) const {
        Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
        Eigen::Vector3d b = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = 2.0 * pi * x[i] / period;
            const Eigen::Vector3d f(1.0, std::cos(u), std::sin(u));
            a += w[i] * f * f.transpose();
            b += w[i] * y[i] * f;
        }
        const Eigen::Vector3d sol = a.completeOrthogonalDecomposition().solve(b);
        const double half = std::hypot(sol(1), sol(2));
        return {sol(0) - half, 2.0 * half, 0.5 * std::atan2(sol(2), sol(1)), period};
    }
};

inline double wrap_phase(double phase) {
    double p = std::fmod(phase, pi);
    if (p < 0) p += pi;
    return p;
}

} // namespace detail

// Least-squares fit of offset + amplitude * cos^2(pi (x - x0) / period)
// with Poisson weights, 1/max(counts, 1) to start and then 1/max(model, 1).
// The phase is pi x0 / period, so for angles in degrees with period 180
// it is x0 in radians. Starting values come from the Fourier fundamental;
// Levenberg-Marquardt refines.
inline FringeFit fit_fringe(std::span<const double> x, std::span<const double> counts,
                            FringeModel model = FringeModel::Cos2, double period = 180.0,
                            bool fit_period = false) {
    if (x.size() != counts.size()) throw InvalidArgument("abscissa and counts differ in length");
    if (x.size() < 5) throw FitError("fringe fit needs at least 5 points");
    if (!(period > 0.0)) throw InvalidArgument("period must be > 0");
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    if (*xmax - *xmin < 0.5 * period) throw FitError("points span less than half a period");
    double total = 0;
    for (double c : counts) total += std::abs(c);
    if (!(total > 0.0)) throw FitError("all counts are zero");

    detail::FringeProblem prob{x, counts, {}, fit_period};
    prob.w.reserve(counts.size());
    for (double c : counts) prob.w.push_back(1.0 / std::max(std::abs(c), 1.0));

    const Eigen::Vector4d best = prob.fundamental(period);
    const double best_chi2 = prob.chi2(best);

    FringeFit fit;
    const double mean_count = total / static_cast<double>(counts.size());
    const bool flat = std::abs(best(1)) <= 1e-12 * std::max(mean_count, 1.0);
    Eigen::Vector4d p = best;
    double c2 = best_chi2;
    const int n = fit_period ? 4 : 3;

    auto refine = [&] {
        double lambda = 1e-3;
        for (int it = 0; it < 500; ++it) {
            ++fit.iterations;
            const Eigen::MatrixXd j = prob.jacobian(p);
            Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
            for (std::size_t i = 0; i < x.size(); ++i)
                r(static_cast<Eigen::Index>(i)) = counts[i] - prob.model(p, x[i]);
            const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(prob.w.data(), r.size());
            const Eigen::MatrixXd jtw = j.transpose() * wv.asDiagonal();
            const Eigen::MatrixXd h = jtw * j;
            const Eigen::VectorXd g = jtw * r;
            bool improved = false;
            for (int inner = 0; inner < 40 && !improved; ++inner) {
                Eigen::MatrixXd damped = h;
                damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
                const Eigen::VectorXd step = damped.ldlt().solve(g);
                Eigen::Vector4d trial = p;
                trial.head(n) += step;
                if (trial(3) <= 0.0) {
                    lambda *= 10.0;
                    continue;
                }
                const double tc2 = prob.chi2(trial);
                if (tc2 <= c2) {
                    const double gain = c2 - tc2;
                    p = trial;
                    c2 = tc2;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    improved = true;
                    if (gain <= 1e-15 * std::max(c2, 1e-300) || step.norm() < 1e-14) it = 1 << 20;
                } else {
                    lambda *= 10.0;
                }
            }
            if (!improved) break;
        }
    };

    if (!flat) {
        refine();
        // Weights from the data pull the curve toward low fluctuations near
        // the minimum; redo the fit with variances taken from the model.
        for (int pass = 0; pass < 4; ++pass) {
            const Eigen::Vector4d before = p;
            for (std::size_t i = 0; i < x.size(); ++i)
                prob.w[i] = 1.0 / std::max(std::abs(prob.model(p, x[i])), 1.0);
            c2 = prob.chi2(p);
            refine();
            if ((p - before).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, p.cwiseAbs().maxCoeff())) break;
        }
    }

    // Canonical form: amplitude >= 0, phase in [0, pi).
    if (p(1) < 0) {
        p(0) += p(1);
        p(1) = -p(1);
        p(2) += pi / 2.0;
    }
    fit.offset = p(0);
    fit.amplitude = flat ? 0.0 : p(1);
    fit.period = p(3);
    fit.chi2 = c2;
    double phase = detail::wrap_phase(p(2));
    if (model == FringeModel::Sin2) phase = detail::wrap_phase(phase - pi / 2.0);
    fit.phase = phase;

    const double cmax = fit.offset + fit.amplitude;
    const double cmin = fit.offset;
    const double denom = cmax + cmin;
    fit.visibility = denom > 0 ? std::clamp((cmax - cmin) / denom, 0.0, 1.0) : 0.0;

    if (!flat) {
        const Eigen::MatrixXd j = prob.jacobian(p);
        Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(prob.w.data(), static_cast<Eigen::Index>(x.size()));
        const Eigen::MatrixXd h = j.transpose() * wv.asDiagonal() * j;
        const Eigen::MatrixXd cov = h.completeOrthogonalDecomposition().pseudoInverse();
        fit.offset_err = std::sqrt(std::max(0.0, cov(0, 0)));
        fit.amplitude_err = std::sqrt(std::max(0.0, cov(1, 1)));
        fit.phase_err = std::sqrt(std::max(0.0, cov(2, 2)));
        if (fit_period) fit.period_err = std::sqrt(std::max(0.0, cov(3, 3)));
        if (denom > 0) {
            const double d2 = denom * denom;
            const double dv_do = -2.0 * fit.amplitude / d2;
            const double dv_da = 2.0 * fit.offset / d2;
            const double var = dv_do * dv_do * cov(0, 0) + dv_da * dv_da * cov(1, 1) +
                               2.0 * dv_do * dv_da * cov(0, 1);
            fit.visibility_err = std::sqrt(std::max(0.0, var));
        }
    }
    return fit;
}

inline FringeFit fit_fringe(const std::vector<double>& x, const std::vector<double>& counts,
                            FringeModel model = FringeModel::Cos2, double period = 180.0,
                            bool fit_period = false) {
    return fit_fringe(std::span<const double>(x), std::span<const double>(counts), model, period, fit_period);
}

// ---------------------------------------------------------------------------
// correlation coefficients and CHSH

struct Correlation {
    double value = 0;
    double sigma = 0;
};

// E from four counts ordered (a,b), (a,b'), (a',b), (a',b') where primes
// denote the orthogonal polarizer, with first-order propagation of the
// given count variances.
inline Correlation correlation_coefficient(const std::array<double, 4>& c,
                                           const std::array<double, 4>& variance) {
    const double total = c[0] + c[1] + c[2] + c[3];
    if (!(std::abs(total) > 0.0)) throw InvalidArgument("correlation needs non-zero total counts");
    const double e = (c[0] - c[1] - c[2] + c[3]) / total;
    const std::array<double, 4> sign{1.0, -1.0, -1.0, 1.0};
    double var = 0;
    for (std::size_t k = 0; k < 4; ++k) {
        const double d = (sign[k] - e) / total;
        var += d * d * variance[k];
    }
    return {e, std::sqrt(var)};
}

// Poisson errors taken from the raw coincidences in both modes; the
// accidental estimate itself is treated as exact.
inline Correlation correlation_coefficient(std::span<const CountsRecord> records, CountMode mode,
                                           double f_trig) {
    if (records.size() != 4) throw InvalidArgument("correlation needs exactly four records");
    std::array<double, 4> c{}, v{};
    for (std::size_t k = 0; k < 4; ++k) {
        c[k] = coincidences(records[k], mode, f_trig);
        v[k] = records[k].coincidences;
    }
    return correlation_coefficient(c, v);
}

struct ChshResult {
    std::array<Correlation, 4> e{};
    double s = 0;
    double sigma_s = 0;
    double n_sigma = 0;
};

// S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|, sigma_S from the four sigma_E.
inline ChshResult chsh(const std::array<Correlation, 4>& e) {
    ChshResult r;
    r.e = e;
    r.s = std::abs(e[0].value - e[1].value + e[2].value + e[3].value);
    double v = 0;
    for (const auto& c : e) v += c.sigma * c.sigma;
    r.sigma_s = std::sqrt(v);
    r.n_sigma = r.sigma_s > 0 ? (r.s - 2.0) / r.sigma_s : std::numeric_limits<double>::infinity();
    return r;
}

// 16 records grouped by coefficient, as produced by run_chsh.
inline ChshResult chsh(std::span<const CountsRecord> records, CountMode mode, double f_trig) {
    if (records.size() != 16) throw InvalidArgument("CHSH needs 16 records");
    std::array<Correlation, 4> e;
    for (std::size_t k = 0; k < 4; ++k)
        e[k] = correlation_coefficient(records.subspan(4 * k, 4), mode, f_trig);
    return chsh(e);
}

// sqrt((2 - V^2) / N)
inline double chsh_poisson_sigma(double visibility, double n_coin) {
    if (!(visibility >= 0.0 && visibility <= 1.0)) throw InvalidArgument("visibility must lie in [0, 1]");
    if (!(n_coin >= 1.0)) throw InvalidArgument("coincidence count must be >= 1");
    return std::sqrt((2.0 - visibility * visibility) / n_coin);
}

inline double expected_s(double visibility) {
    if (!(visibility >= 0.0 && visibility <= 1.0)) throw InvalidArgument("visibility must lie in [0, 1]");
    return 2.0 * std::numbers::sqrt2 * visibility;
}

// ---------------------------------------------------------------------------
// pair probability

// mu = s1 s2 / (c f), from s_i = mu eta_i f and c = mu eta_1 eta_2 f.
// The derivation counts only true pairs in c, so pass accidental-corrected
// coincidences when multi-pair events matter; with raw coincidences the
// estimate is low by a factor of about 1/(1 + mu).
inline double estimate_pair_probability(double s1, double s2, double c, double f) {
    if (!(c > 0.0)) throw InvalidArgument("coincidence rate must be > 0");
    if (!(f > 0.0)) throw InvalidArgument("trigger rate must be > 0");
    return s1 * s2 / (c * f);
}

} // namespace sagnac
