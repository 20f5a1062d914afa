/**
 * @file stability.hpp
 * @brief Exponential stability of the orbit-error dynamics xi' = A(t) xi,
 *
 *   A(t) = [ 0                      1                        ]
 *          [ -delta w^2 cos^2(wt)   -p1 - delta w sin(2wt)   ]
 *
 * which is periodic with T = pi / w. Two independent routes are provided:
 * a quadratic Lyapunov certificate V = xi' P xi / 2 with
 * P = [[1, 1/p1], [1/p1, eta]] checked by sampling Q(t) = -(PA + A'P)/2,
 * and Floquet multipliers from the RK4 monodromy matrix.
 */
#pragma once

#include "ebvs/dvs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace ebvs {

struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    Mat2 transposed() const { return {a11, a21, a12, a22}; }
    double trace() const { return a11 + a22; }
    double det() const { return a11 * a22 - a12 * a21; }

    friend Mat2 operator+(const Mat2& x, const Mat2& y) {
        return {x.a11 + y.a11, x.a12 + y.a12, x.a21 + y.a21, x.a22 + y.a22};
    }
    friend Mat2 operator*(double s, const Mat2& m) { return {s * m.a11, s * m.a12, s * m.a21, s * m.a22}; }
    friend Mat2 operator*(const Mat2& x, const Mat2& y) {
        return {x.a11 * y.a11 + x.a12 * y.a21, x.a11 * y.a12 + x.a12 * y.a22, x.a21 * y.a11 + x.a22 * y.a21,
                x.a21 * y.a12 + x.a22 * y.a22};
    }
    std::array<double, 2> apply(std::array<double, 2> v) const {
        return {a11 * v[0] + a12 * v[1], a21 * v[0] + a22 * v[1]};
    }
};

inline std::array<std::complex<double>, 2> eigenvalues(const Mat2& m) {
    const double half_tr = 0.5 * m.trace();
    const std::complex<double> disc = std::sqrt(std::complex<double>(half_tr * half_tr - m.det(), 0.0));
    return {half_tr + disc, half_tr - disc};
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
inline double lambda_min_sym(const Mat2& m) {
    const double half_tr = 0.5 * (m.a11 + m.a22);
    const double d = 0.5 * (m.a11 - m.a22);
    return half_tr - std::sqrt(d * d + m.a12 * m.a12);
}

inline double lambda_max_sym(const Mat2& m) {
    const double half_tr = 0.5 * (m.a11 + m.a22);
    const double d = 0.5 * (m.a11 - m.a22);
    return half_tr + std::sqrt(d * d + m.a12 * m.a12);
}

struct LtvParams {
    double delta;
    double omega;  ///< [rad/s]
    double p1;     ///< [1/s]

    void validate() const {
        if (!(omega > 0.0)) throw std::invalid_argument("stability: omega must be positive");
        if (!(p1 > 0.0)) throw std::invalid_argument("stability: p1 must be positive");
        if (!(delta >= 0.0)) throw std::invalid_argument("stability: delta must be non-negative");
    }

    double period() const { return std::numbers::pi / omega; }
};

inline Mat2 A_of_t(const LtvParams& lp, double t) {
    const double c = std::cos(lp.omega * t);
    return {0.0, 1.0, -lp.delta * lp.omega * lp.omega * c * c, -lp.p1 - lp.delta * lp.omega * std::sin(2.0 * lp.omega * t)};
}

inline double eta_dagger(double p1, double omega) {
    return (1.0 + std::sqrt(1.0 + 4.0 * p1 * p1 / (omega * omega))) / (p1 * p1);
}

inline double delta_dagger(double p1, double omega) {
    return (std::sqrt(omega * omega + 4.0 * p1 * p1) - omega) / (2.0 * omega);
}

/// Largest delta for which a given eta keeps det Q(t) >= 0.
inline double delta_admissible(double eta, double p1, double omega) {
    return 4.0 * (eta * p1 * p1 - 1.0) / (eta * eta * omega * omega * p1 * p1 + 4.0);
}

struct LyapunovCertificate {
    double eta;
    double p1;

    bool valid() const { return eta * p1 * p1 > 1.0; }
    Mat2 P() const { return {1.0, 1.0 / p1, 1.0 / p1, eta}; }
};

inline Mat2 Q_of_t(const LtvParams& lp, const LyapunovCertificate& cert, double t) {
    const Mat2 P = cert.P();
    const Mat2 A = A_of_t(lp, t);
    return -0.5 * (P * A + A.transposed() * P);
}

struct CertificateCheck {
    bool psd_ok;
    double min_trace;
    double min_det;
};

namespace detail {

/// Golden-section minimisation of g on [lo, hi].
template <class G>
double golden_min(G&& g, double lo, double hi, int iters = 80) {
    constexpr double r = 0.6180339887498949;
    double x1 = hi - r * (hi - lo);
    double x2 = lo + r * (hi - lo);
    double g1 = g(x1);
    double g2 = g(x2);
    for (int i = 0; i < iters; ++i) {
        if (g1 < g2) {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - r * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + r * (hi - lo);
            g2 = g(x2);
        }
    }
    return std::min({g1, g2, g(lo), g(hi)});
}

/// Minimum of g over one period from n samples, refined around each sampled local minimum.
template <class G>
double sampled_min(G&& g, double T, int n) {
    std::vector<double> vals(static_cast<std::size_t>(n));
    const double dt = T / n;
    for (int i = 0; i < n; ++i) vals[i] = g(i * dt);
    double best = *std::min_element(vals.begin(), vals.end());
    for (int i = 0; i < n; ++i) {
        const double prev = vals[(i + n - 1) % n];
        const double next = vals[(i + 1) % n];
        if (vals[i] <= prev && vals[i] <= next) best = std::min(best, golden_min(g, (i - 1) * dt, (i + 1) * dt));
    }
    return best;
}

}  // namespace detail

inline constexpr double kPsdTolerance = 1e-12;

/// Q(t) is PSD over a period iff trace and determinant stay non-negative.
inline CertificateCheck verify_certificate(const LtvParams& lp, const LyapunovCertificate& cert, int n_samples = 4096) {
    lp.validate();
    if (n_samples < 1000) throw std::invalid_argument("verify_certificate: need at least 1000 samples per period");
    if (!cert.valid()) return {false, -INFINITY, -INFINITY};
    const double T = lp.period();
    const double min_tr = detail::sampled_min([&](double t) { return Q_of_t(lp, cert, t).trace(); }, T, n_samples);
    const double min_det = detail::sampled_min([&](double t) { return Q_of_t(lp, cert, t).det(); }, T, n_samples);
    return {min_tr >= -kPsdTolerance && min_det >= -kPsdTolerance, min_tr, min_det};
}

/// Integral over one period of lambda_min(Q(t)), composite Simpson.
inline double lyapunov_decay_integral(const LtvParams& lp, const LyapunovCertificate& cert, int n = 4096) {
    if (n % 2) ++n;
    const double T = lp.period();
    const double h = T / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * lambda_min_sym(Q_of_t(lp, cert, i * h));
    }
    return s * h / 3.0;
}

/// One RK4 step of X' = A(t) X.
inline Mat2 ltv_step(const LtvParams& lp, const Mat2& X, double t, double h) {
    const Mat2 k1 = A_of_t(lp, t) * X;
    const Mat2 k2 = A_of_t(lp, t + 0.5 * h) * (X + (0.5 * h) * k1);
    const Mat2 k3 = A_of_t(lp, t + 0.5 * h) * (X + (0.5 * h) * k2);
    const Mat2 k4 = A_of_t(lp, t + h) * (X + h * k3);
    return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Monodromy {
    Mat2 M;
    std::array<std::complex<double>, 2> multipliers;
    double spectral_radius;
};

/// State transition over one period from X(0) = I. The step is shrunk so an
/// integer number of steps spans the period exactly.
inline Monodromy monodromy(const LtvParams& lp, double h) {
    lp.validate();
    const double T = lp.period();
    if (!(h > 0.0) || h > T / 1000.0) throw ContractViolation("monodromy: step must be in (0, T/1000]");
    const auto n = static_cast<long>(std::ceil(T / h - 1e-9));
    const double hs = T / static_cast<double>(n);
    Mat2 X = Mat2::identity();
    for (long i = 0; i < n; ++i) X = ltv_step(lp, X, i * hs, hs);
    const auto ev = eigenvalues(X);
    return {X, ev, std::max(std::abs(ev[0]), std::abs(ev[1]))};
}

struct StabilityReport {
    double delta = 0.0;
    double p1 = 0.0;
    double omega = 0.0;
    double delta_dagger = 0.0;
    double eta_dagger = 0.0;
    bool within_bound = false;  ///< delta <= delta_dagger
    bool psd_ok = false;        ///< sampled certificate at eta_dagger
    Mat2 monodromy;
    std::array<std::complex<double>, 2> multipliers{};
    double spectral_radius = 0.0;
    double decay_rate_est = 0.0;  ///< -ln(spectral_radius) / T [1/s]
    double lyapunov_integral = 0.0;
    bool conservative = false;  ///< Floquet-stable but the certificate does not cover it
};

inline StabilityReport analyze(double p1, double omega, double delta, int n_samples = 4096, int steps_per_period = 4096) {
    StabilityReport r;
    r.delta = delta;
    r.p1 = p1;
    r.omega = omega;
    r.delta_dagger = delta_dagger(p1, omega);
    r.eta_dagger = eta_dagger(p1, omega);
    r.within_bound = delta <= r.delta_dagger;
    const LtvParams lp{delta, omega, p1};
    const LyapunovCertificate cert{r.eta_dagger, p1};
    r.psd_ok = verify_certificate(lp, cert, n_samples).psd_ok;
    const auto mono = monodromy(lp, lp.period() / steps_per_period);
    r.monodromy = mono.M;
    r.multipliers = mono.multipliers;
    r.spectral_radius = mono.spectral_radius;
    r.decay_rate_est = -std::log(mono.spectral_radius) / lp.period();
    r.lyapunov_integral = lyapunov_decay_integral(lp, cert, n_samples);
    r.conservative = r.spectral_radius < 1.0 && !r.psd_ok;
    return r;
}

inline std::vector<StabilityReport> stability_scan(double p1, double omega, std::span<const double> delta_grid) {
    if (delta_grid.empty()) throw std::invalid_argument("stability_scan: empty grid");
    std::vector<StabilityReport> out;
    out.reserve(delta_grid.size());
    for (double d : delta_grid) out.push_back(analyze(p1, omega, d));
    return out;
}

inline void write_stability_csv(std::ostream& os, std::span<const StabilityReport> rows) {
    os << "delta,delta_dagger,cert_ok,floquet_radius,decay_rate\n";
    for (const auto& r : rows)
        os << r.delta << ',' << r.delta_dagger << ',' << (r.psd_ok ? 1 : 0) << ',' << r.spectral_radius << ','
           << r.decay_rate_est << '\n';
}

}  // namespace ebvs
