// spectral.hpp -- joint spectral amplitude of the pair, filtering, Schmidt
// purity and the Hong-Ou-Mandel dip.
//
// Everything is computed on angular-frequency detunings (rad/ps) from the
// degenerate frequency; wavelengths appear only when converting filter
// widths and axes at the boundary. The JSA is the product of a Gaussian pump
// envelope in the sum detuning and a Gaussian phase-matching envelope in the
// difference detuning. The phase-matching width is fixed by the requested
// marginal bandwidth; the pump width is the transform limit of the pulse
// times a calibrated broadening factor.

#pragma once

#include "error.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace sagnac {

inline constexpr double speed_of_light_nm_per_ps = 299'792.458;
inline constexpr double gaussian_tbp = 0.441;  // FWHM time-bandwidth product

inline double wavelength_to_omega(double nm) { return 2.0 * std::numbers::pi * speed_of_light_nm_per_ps / nm; }
inline double omega_to_wavelength(double w) { return 2.0 * std::numbers::pi * speed_of_light_nm_per_ps / w; }

// Angular-frequency width of the band center +- width/2 (both in nm).
inline double band_omega_width(double center_nm, double width_nm) {
    if (!(width_nm > 0.0) || !(width_nm < 2.0 * center_nm)) throw InvalidArgument("band width out of range");
    return wavelength_to_omega(center_nm - width_nm / 2.0) - wavelength_to_omega(center_nm + width_nm / 2.0);
}

struct SpectralConfig {
    double center_wavelength_nm = 1550.0;
    double pump_duration_ps = 3.5;
    double pump_center_nm = 775.0;
    double marginal_bandwidth_nm = 132.0;
    // Pump spectral width over its transform limit, from calibrate_pump_broadening().
    double pump_broadening = 2.40;
    int grid_size = 2048;
    double span_fwhm = 1.75;  // half-width of the grid in marginal FWHMs

    void validate() const {
        if (!(center_wavelength_nm > 0.0)) throw InvalidArgument("center_wavelength must be > 0");
        if (!(pump_duration_ps > 0.0)) throw InvalidArgument("pump_duration must be > 0");
        if (!(pump_center_nm > 0.0)) throw InvalidArgument("pump_center must be > 0");
        if (!(marginal_bandwidth_nm > 0.0)) throw InvalidArgument("marginal_bandwidth must be > 0");
        if (!(pump_broadening > 0.0)) throw InvalidArgument("pump_broadening must be > 0");
        if (grid_size < 64) throw InvalidArgument("grid_size must be >= 64");
        if (!(span_fwhm > 0.0)) throw InvalidArgument("span_fwhm must be > 0");
    }

    double center_omega() const { return wavelength_to_omega(center_wavelength_nm); }
    // Intensity FWHM of the pump in angular frequency.
    double pump_fwhm_omega() const {
        return 2.0 * std::numbers::pi * gaussian_tbp / pump_duration_ps * pump_broadening;
    }
    double marginal_fwhm_omega() const { return band_omega_width(center_wavelength_nm, marginal_bandwidth_nm); }
};

inline constexpr double fwhm_per_sigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

namespace detail {

// Intensity standard deviations of the sum (pump) and difference
// (phase-matching) detunings. The signal marginal has variance
// (a^2 + b^2) / 4.
struct EnvelopeWidths {
    double a;
    double b;
};

inline EnvelopeWidths envelope_widths(const SpectralConfig& cfg) {
    const double a = cfg.pump_fwhm_omega() / fwhm_per_sigma;
    const double sx = cfg.marginal_fwhm_omega() / fwhm_per_sigma;
    const double b2 = 4.0 * sx * sx - a * a;
    if (!(b2 > 0.0)) throw InvalidArgument("pump bandwidth exceeds what the marginal bandwidth allows");
    return {a, std::sqrt(b2)};
}

} // namespace detail

struct JsaGrid {
    double center_omega = 0;             // rad/ps
    std::vector<double> signal_detuning;  // rad/ps, increasing
    std::vector<double> idler_detuning;
    Eigen::MatrixXcd amplitude;           // rows: signal, columns: idler
    double pair_transmission = 1.0;       // product of applied filter losses
    double heralding_transmission = 1.0;  // idler passes given signal passed, last filter

    double signal_step() const { return signal_detuning[1] - signal_detuning[0]; }
    double idler_step() const { return idler_detuning[1] - idler_detuning[0]; }
    bool symmetric() const { return signal_detuning == idler_detuning; }

    // Decreasing, since wavelength falls as frequency rises.
    std::vector<double> signal_wavelength_nm() const { return wavelengths(signal_detuning); }
    std::vector<double> idler_wavelength_nm() const { return wavelengths(idler_detuning); }

    double norm() const { return amplitude.squaredNorm() * signal_step() * idler_step(); }

    void normalize() {
        const double n = norm();
        if (!(n > 0.0)) throw InvalidArgument("JSA is zero");
        amplitude /= std::sqrt(n);
    }

private:
    std::vector<double> wavelengths(const std::vector<double>& d) const {
        std::vector<double> out;
        out.reserve(d.size());
        for (double x : d) out.push_back(omega_to_wavelength(center_omega + x));
        return out;
    }
};

// A(x, y) = alpha(x + y) beta(x - y), normalized.
inline JsaGrid build_jsa(const SpectralConfig& cfg) {
    cfg.validate();
    const auto [a, b] = detail::envelope_widths(cfg);
    const double half = cfg.span_fwhm * cfg.marginal_fwhm_omega();
    const auto n = static_cast<std::size_t>(cfg.grid_size);
    const double step = 2.0 * half / static_cast<double>(n - 1);

    const double narrow = std::min(a, b) * fwhm_per_sigma;
    if (narrow / step < 8.0)
        throw ResolutionError("grid step does not resolve the narrower JSA envelope (need >= 8 points per FWHM)");

    JsaGrid g;
    g.center_omega = cfg.center_omega();
    g.signal_detuning.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.signal_detuning[i] = -half + step * static_cast<double>(i);
    g.signal_detuning[n - 1] = half;
    g.idler_detuning = g.signal_detuning;
    g.amplitude.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const double y = g.idler_detuning[j];
        for (std::size_t i = 0; i < n; ++i) {
            const double x = g.signal_detuning[i];
            const double s = x + y, d = x - y;
            g.amplitude(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::exp(-s * s / (4.0 * a * a) - d * d / (4.0 * b * b));
        }
    }
    g.normalize();
    return g;
}

enum class FilterShape { Gaussian, Tophat };

// Amplitude transmission of a filter centered on the degenerate wavelength;
// its intensity transmission has the given FWHM (nm).
struct SpectralFilter {
    double low = 0;   // detuning band edges, rad/ps
    double high = 0;
    FilterShape shape = FilterShape::Gaussian;

    SpectralFilter(const JsaGrid& g, double bandwidth_nm, FilterShape s) : shape(s) {
        const double lambda0 = omega_to_wavelength(g.center_omega);
        if (!(bandwidth_nm > 0.0)) throw InvalidArgument("filter bandwidth must be > 0");
        if (!(bandwidth_nm < 2.0 * lambda0)) throw InvalidArgument("filter bandwidth too large");
        low = wavelength_to_omega(lambda0 + bandwidth_nm / 2.0) - g.center_omega;
        high = wavelength_to_omega(lambda0 - bandwidth_nm / 2.0) - g.center_omega;
    }

    double fwhm() const { return high - low; }
    double mid() const { return 0.5 * (low + high); }

    double amplitude(double x) const {
        if (shape == FilterShape::Tophat) return (x >= low && x <= high) ? 1.0 : 0.0;
        const double u = (x - mid()) / fwhm();
        return std::exp(-2.0 * std::numbers::ln2 * u * u);
    }

    // Detuning interval outside which the amplitude is below 1e-8.
    std::pair<double, double> support() const {
        if (shape == FilterShape::Tophat) return {low, high};
        const double r = fwhm() * std::sqrt(std::log(1e8) / (2.0 * std::numbers::ln2));
        return {mid() - r, mid() + r};
    }
};

// Filter both photons and crop the grid to the filter's support.
inline JsaGrid apply_filter(const JsaGrid& jsa, double bandwidth_nm, FilterShape shape = FilterShape::Gaussian) {
    if (!std::isfinite(bandwidth_nm) && bandwidth_nm > 0) return jsa;
    const SpectralFilter f(jsa, bandwidth_nm, shape);
    if (f.fwhm() < 4.0 * std::max(jsa.signal_step(), jsa.idler_step()))
        throw ResolutionError("filter is narrower than 4 grid steps");

    const auto [lo, hi] = f.support();
    auto crop = [&](const std::vector<double>& axis) {
        std::size_t first = 0, last = axis.size();
        while (first < axis.size() && axis[first] < lo) ++first;
        while (last > first && axis[last - 1] > hi) --last;
        return std::pair{first, last};
    };
    const auto [si, se] = crop(jsa.signal_detuning);
    const auto [ii, ie] = crop(jsa.idler_detuning);
    if (se - si < 2 || ie - ii < 2) throw ResolutionError("filter passband holds fewer than 2 grid points");

    std::vector<double> ts(jsa.signal_detuning.size()), ti(jsa.idler_detuning.size());
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = f.amplitude(jsa.signal_detuning[i]);
    for (std::size_t j = 0; j < ti.size(); ++j) ti[j] = f.amplitude(jsa.idler_detuning[j]);

    // Signal-filtered and doubly-filtered weights over the full grid.
    double before = 0, signal_only = 0, both = 0;
    for (Eigen::Index j = 0; j < jsa.amplitude.cols(); ++j)
        for (Eigen::Index i = 0; i < jsa.amplitude.rows(); ++i) {
            const double p = std::norm(jsa.amplitude(i, j));
            const double t1 = ts[static_cast<std::size_t>(i)] * ts[static_cast<std::size_t>(i)];
            before += p;
            signal_only += p * t1;
            both += p * t1 * ti[static_cast<std::size_t>(j)] * ti[static_cast<std::size_t>(j)];
        }

    JsaGrid out;
    out.center_omega = jsa.center_omega;
    out.signal_detuning.assign(jsa.signal_detuning.begin() + static_cast<std::ptrdiff_t>(si),
                               jsa.signal_detuning.begin() + static_cast<std::ptrdiff_t>(se));
    out.idler_detuning.assign(jsa.idler_detuning.begin() + static_cast<std::ptrdiff_t>(ii),
                              jsa.idler_detuning.begin() + static_cast<std::ptrdiff_t>(ie));
    const auto rows = static_cast<Eigen::Index>(se - si);
    const auto cols = static_cast<Eigen::Index>(ie - ii);
    out.amplitude.resize(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            out.amplitude(i, j) = jsa.amplitude(i + static_cast<Eigen::Index>(si), j + static_cast<Eigen::Index>(ii)) *
                                  ts[static_cast<std::size_t>(i) + si] * ti[static_cast<std::size_t>(j) + ii];
    if (!(both > 0.0)) throw InvalidArgument("filter blocks the whole spectrum");
    out.pair_transmission = jsa.pair_transmission * both / before;
    out.heralding_transmission = both / signal_only;
    out.normalize();
    return out;
}

struct SchmidtResult {
    double purity = 0;
    double schmidt_number = 0;
    std::vector<double> weights;          // lambda_k, summing to 1
    std::vector<double> singular_values;  // of the amplitude matrix
};

inline SchmidtResult schmidt_purity(const Eigen::MatrixXcd& a) {
    if (a.size() == 0 || !(a.squaredNorm() > 0.0)) throw InvalidArgument("JSA matrix is zero");
    Eigen::VectorXd sv;
    if (a.imag().isZero(0.0)) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a.real());
        sv = svd.singularValues();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
        sv = svd.singularValues();
    }
    SchmidtResult r;
    const double total = sv.squaredNorm();
    r.singular_values.assign(sv.data(), sv.data() + sv.size());
    r.weights.reserve(static_cast<std::size_t>(sv.size()));
    double p = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        const double l = sv(k) * sv(k) / total;
        r.weights.push_back(l);
        p += l * l;
    }
    r.purity = std::min(p, 1.0);
    r.schmidt_number = 1.0 / r.purity;
    return r;
}

inline SchmidtResult schmidt_purity(const JsaGrid& jsa) { return schmidt_purity(jsa.amplitude); }

// Coincidence probability behind a balanced beam splitter with the idler
// delayed by tau:
//   P(tau) = 1/2 [1 - Re sum A(x,y) A*(y,x) e^{i (x - y) tau} dx dy].
// The exchange overlap only depends on i - j, so it is binned once and each
// delay costs O(N).
class HomProfile {
public:
    explicit HomProfile(const JsaGrid& jsa) {
        if (!jsa.symmetric()) throw InvalidArgument("HOM needs identical signal and idler axes");
        const auto n = static_cast<Eigen::Index>(jsa.signal_detuning.size());
        step_ = jsa.signal_step();
        bins_.assign(static_cast<std::size_t>(2 * n - 1), Complex(0.0, 0.0));
        const double area = jsa.signal_step() * jsa.idler_step();
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                bins_[static_cast<std::size_t>(i - j + n - 1)] +=
                    jsa.amplitude(i, j) * std::conj(jsa.amplitude(j, i)) * area;
        offset_ = n - 1;
    }

    double coincidence(double delay_fs) const {
        const double tau = delay_fs * 1e-3;  // ps
        double acc = 0;
        for (std::size_t k = 0; k < bins_.size(); ++k) {
            const double d = static_cast<double>(static_cast<Eigen::Index>(k) - offset_) * step_;
            acc += (bins_[k] * std::polar(1.0, d * tau)).real();
        }
        return 0.5 * (1.0 - acc);
    }

    // Re sum A(x,y) A*(y,x): the dip visibility 1 - 2 P(0).
    double exchange_overlap() const {
        double acc = 0;
        for (const auto& b : bins_) acc += b.real();
        return acc;
    }

    // Full width of the dip at half depth, by bisection on each side.
    double dip_fwhm_fs() const {
        const double p0 = coincidence(0.0);
        const double level = 0.5 * (p0 + 0.5);
        auto edge = [&](double sign) {
            double lo = 0.0, hi = 1.0;
            while (sign * hi < 1e9 && coincidence(sign * hi) < level) hi *= 2.0;
            for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (coincidence(sign * mid) < level ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        };
        return edge(1.0) + edge(-1.0);
    }

private:
    using Complex = std::complex<double>;
    std::vector<Complex> bins_;
    Eigen::Index offset_ = 0;
    double step_ = 0;
};

inline double hom_coincidence(const JsaGrid& jsa, double delay_fs) { return HomProfile(jsa).coincidence(delay_fs); }

// Signal marginal FWHM in nm, from the half-maximum crossings in frequency.
inline double marginal_fwhm_nm(const JsaGrid& jsa) {
    const auto n = jsa.signal_detuning.size();
    std::vector<double> m(n, 0.0);
    for (Eigen::Index i = 0; i < jsa.amplitude.rows(); ++i)
        m[static_cast<std::size_t>(i)] = jsa.amplitude.row(i).squaredNorm();
    const auto peak_it = std::max_element(m.begin(), m.end());
    const double half = 0.5 * *peak_it;
    const auto peak = static_cast<std::size_t>(peak_it - m.begin());
    auto crossing = [&](std::size_t from, int dir) {
        std::size_t i = from;
        while (true) {
            if ((dir < 0 && i == 0) || (dir > 0 && i + 1 == n)) throw ResolutionError("marginal extends past the grid");
            const std::size_t k = dir > 0 ? i + 1 : i - 1;
            if (m[k] < half) {
                const double t = (m[i] - half) / (m[i] - m[k]);
                return jsa.signal_detuning[i] + t * (jsa.signal_detuning[k] - jsa.signal_detuning[i]);
            }
            i = k;
        }
    };
    const double lo = crossing(peak, -1), hi = crossing(peak, 1);
    return omega_to_wavelength(jsa.center_omega + lo) - omega_to_wavelength(jsa.center_omega + hi);
}

// Closed-form purity of the Gaussian JSA, optionally behind identical
// Gaussian filters on both arms. For an amplitude exp(-z^T Q z / 2) the
// purity is sqrt(1 - Q01^2 / (Q00 Q11)).
inline double gaussian_purity(const SpectralConfig& cfg, std::optional<double> filter_nm = std::nullopt) {
    const auto [a, b] = detail::envelope_widths(cfg);
    const double c = 1.0 / (a * a) + 1.0 / (b * b);
    const double d = 1.0 / (a * a) - 1.0 / (b * b);
    double q = c;
    if (filter_nm && std::isfinite(*filter_nm)) {
        const double sf = band_omega_width(cfg.center_wavelength_nm, *filter_nm) / fwhm_per_sigma;
        q += 1.0 / (sf * sf);
    }
    return std::sqrt(1.0 - d * d / (q * q));
}

struct PurityAnchor {
    double bandwidth_nm;  // infinity for no filter
    double purity;
};

inline std::vector<PurityAnchor> default_purity_anchors() {
    return {{std::numeric_limits<double>::infinity(), 0.022}, {18.0, 0.157}, {1.0, 0.994}};
}

// Pump broadening factor minimizing the summed squared log error of the
// closed-form purities against the anchors (golden-section search).
inline double calibrate_pump_broadening(SpectralConfig cfg, const std::vector<PurityAnchor>& anchors,
                                        double lo = 1.0, double hi = 10.0) {
    if (anchors.empty()) throw InvalidArgument("calibration needs at least one anchor");
    auto cost = [&](double k) {
        cfg.pump_broadening = k;
        double s = 0;
        for (const auto& an : anchors) {
            const double e = std::log(gaussian_purity(cfg, an.bandwidth_nm)) - std::log(an.purity);
            s += e * e;
        }
        return s;
    };
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = cost(x1), f2 = cost(x2);
    while (hi - lo > 1e-10 * (std::abs(lo) + std::abs(hi))) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    return 0.5 * (lo + hi);
}

struct PurityPoint {
    double bandwidth_nm;
    double purity;
    double schmidt_number;
    double pair_transmission;
    double heralding_transmission;
};

inline std::vector<PurityPoint> purity_sweep(const JsaGrid& jsa, const std::vector<double>& bandwidths_nm,
                                             FilterShape shape = FilterShape::Gaussian) {
    std::vector<PurityPoint> out;
    out.reserve(bandwidths_nm.size());
    for (double bw : bandwidths_nm) {
        const JsaGrid g = std::isfinite(bw) ? apply_filter(jsa, bw, shape) : jsa;
        const auto s = schmidt_purity(g);
        out.push_back({bw, s.purity, s.schmidt_number, g.pair_transmission, g.heralding_transmission});
    }
    return out;
}

inline std::vector<double> default_filter_sweep() {
    return {1.0, 3.0, 6.0, 10.0, 18.0, 40.0, std::numeric_limits<double>::infinity()};
}

} // namespace sagnac
