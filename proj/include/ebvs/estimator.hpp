/**
 * @file estimator.hpp
 * @brief Kernel net event counts, the net event rate estimator with its
 *        certified error bound, least-squares calibration of the lumped
 *        constants, and the x * xdot^2 feedback product.
 *
 * A kernel symmetric about the principal point cancels the first-order
 * spatial Taylor term, so over a window of length dt
 *
 *     |N_net - M dt| <= L_time dt^2 + L_space dt
 *
 * with M = -(N_u N_v f_x / (C Z)) xdot f'(mu). Quadratic profiles make M
 * proportional to x * xdot, linear profiles to xdot.
 */
#pragma once

#include "ebvs/dvs.hpp"
#include "ebvs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebvs {

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class KernelRole { K1_quadratic, K2_linear };

inline const char* to_string(KernelRole r) { return r == KernelRole::K1_quadratic ? "K1" : "K2"; }

struct Kernel {
    PixelRegion rect;
    KernelRole role;

    int N_u() const { return rect.columns(); }
    int N_v() const { return rect.rows(); }
    long pixels() const { return static_cast<long>(N_u()) * N_v(); }
};

/// Throws std::invalid_argument unless the kernel is inside the sensor, exactly
/// symmetric about the principal point and entirely on the sub-profile its role names.
inline void validate_kernel(const Kernel& k, const CameraIntrinsics& intr, const ScenePattern& pattern) {
    const auto& r = k.rect;
    if (r.u_min > r.u_max || r.v_min > r.v_max) throw std::invalid_argument("kernel: empty rectangle");
    if (r.u_min < 0 || r.v_min < 0 || r.u_max >= intr.width || r.v_max >= intr.height)
        throw std::invalid_argument("kernel: rectangle outside sensor");
    // sum over columns of (u - o_x) is N_u * ((u_min + u_max)/2 - o_x)
    if (static_cast<double>(r.u_min) + static_cast<double>(r.u_max) != 2.0 * intr.o_x)
        throw std::invalid_argument("kernel: not horizontally symmetric about the principal point (u_min + u_max = " +
                                    std::to_string(r.u_min + r.u_max) + ", 2 o_x = " + std::to_string(2.0 * intr.o_x) +
                                    ")");
    const bool want_quadratic = k.role == KernelRole::K1_quadratic;
    for (int v : {r.v_min, r.v_max}) {
        const bool is_quadratic = std::holds_alternative<QuadraticProfile>(pattern.row_profile(v));
        if (is_quadratic != want_quadratic)
            throw std::invalid_argument(std::string("kernel: ") + to_string(k.role) + " rows must lie on the " +
                                        (want_quadratic ? "quadratic" : "linear") + " profile");
    }
}

/// Half-open [begin_us, end_us).
struct Window {
    std::int64_t begin_us;
    std::int64_t end_us;

    double seconds() const { return (end_us - begin_us) * 1e-6; }
    bool contains(std::int64_t t) const { return t >= begin_us && t < end_us; }
};

/// Events are stamped at the end of the step that produced them, so the
/// motion over (t0, t0 + dt] is counted by the window [t0 + 1, t0 + dt + 1) us.
inline Window motion_window(std::int64_t t0_us, std::int64_t dt_us) { return {t0_us + 1, t0_us + dt_us + 1}; }

struct NetCount {
    long n_pos = 0;
    long n_neg = 0;
    double n_net = 0.0;
    Window window{0, 0};
};

/// Events must be canonically sorted.
inline NetCount net_event_count(std::span<const Event> events, const Kernel& kernel, const Window& window) {
    NetCount nc;
    nc.window = window;
    auto first = std::lower_bound(events.begin(), events.end(), window.begin_us,
                                  [](const Event& e, std::int64_t t) { return e.t_us < t; });
    for (auto it = first; it != events.end() && it->t_us < window.end_us; ++it) {
        if (!kernel.rect.contains(it->u, it->v)) continue;
        if (it->p > 0) ++nc.n_pos;
        else ++nc.n_neg;
    }
    nc.n_net = static_cast<double>(nc.n_pos - nc.n_neg);
    return nc;
}

/// Ideal-fractional count over a window from two snapshots of the kernel's
/// accumulated fractional sum.
inline NetCount fractional_net_count(double sum_begin, double sum_end, const Window& window) {
    NetCount nc;
    nc.window = window;
    nc.n_net = sum_end - sum_begin;
    return nc;
}

/// Net event rate M [events/s] for the kernel's sub-profile with the camera at
/// (x, xdot) and the pattern origin taken from its schedule at time t.
inline double event_rate_M(const ScenePattern& pattern, const CameraIntrinsics& intr, const Kernel& kernel, double C,
                           double x, double x_dot, double t = 0.0) {
    const SubProfile sub = pattern.row_profile(kernel.rect.v_min);
    const double mu = image_shift(intr, x) - image_shift(intr, pattern.center.offset_at(t));
    const double n = static_cast<double>(kernel.pixels());
    return -(n * intr.f_x) / (C * intr.Z) * x_dot * profile_derivative_at(sub, mu, 1);
}

/// C_q: M = C_q * x * xdot on a quadratic profile.
inline double rate_constant_quadratic(double N_u, double N_v, const CameraIntrinsics& intr, double C, double sigma) {
    return -(N_u * N_v * intr.f_x * intr.f_x) / (C * intr.Z * intr.Z * sigma * sigma);
}

/// C_l: M = C_l * xdot on a linear profile.
inline double rate_constant_linear(double N_u, double N_v, const CameraIntrinsics& intr, double C, double k) {
    return -(N_u * N_v * intr.f_x * k) / (C * intr.Z);
}

inline double analytic_rate_constant(const Kernel& kernel, const ScenePattern& pattern, const CameraIntrinsics& intr,
                                     double C) {
    const SubProfile sub = pattern.row_profile(kernel.rect.v_min);
    if (const auto* q = std::get_if<QuadraticProfile>(&sub))
        return rate_constant_quadratic(kernel.N_u(), kernel.N_v(), intr, C, q->sigma);
    return rate_constant_linear(kernel.N_u(), kernel.N_v(), intr, C, std::get<LinearProfile>(sub).k);
}

struct BoundParams {
    double v_max = 0.0;  ///< [m/s]
    double a_max = 0.0;  ///< [m/s^2]
    DerivativeSuprema suprema;
    double C = 0.2;
    double N_u = 1.0;
    double N_v = 1.0;
    double f_x = 1000.0;
    double Z = 1.0;
};

struct BoundConstants {
    double L_time;   ///< [events/s^2]
    double L_space;  ///< [events/s]
};

inline BoundConstants bound_constants(const BoundParams& bp) {
    const double n = bp.N_u * bp.N_v;
    const double vel_px = bp.f_x / bp.Z * bp.v_max;
    const double acc_px = bp.f_x / bp.Z * bp.a_max;
    const double L_time = n / (2.0 * bp.C) * (bp.suprema.F2 * vel_px * vel_px + bp.suprema.F1 * acc_px);
    const double L_space = n / bp.C * (bp.N_u * bp.N_u / 8.0) * vel_px * bp.suprema.F3;
    return {L_time, L_space};
}

/// Suprema of the kernel's sub-profile over every coordinate the kernel sees
/// while the camera stays in [x_lo, x_hi] relative to the pattern origin.
inline DerivativeSuprema observed_suprema(const Kernel& kernel, const ScenePattern& pattern,
                                          const CameraIntrinsics& intr, double x_lo, double x_hi) {
    const double mu_a = image_shift(intr, x_lo);
    const double mu_b = image_shift(intr, x_hi);
    const double lo = kernel.rect.u_min - intr.o_x + std::min(mu_a, mu_b);
    const double hi = kernel.rect.u_max - intr.o_x + std::max(mu_a, mu_b);
    return suprema_over(pattern.row_profile(kernel.rect.v_min), lo, hi);
}

inline BoundParams make_bound_params(const Kernel& kernel, const ScenePattern& pattern, const CameraIntrinsics& intr,
                                     double C, double v_max, double a_max, double x_lo, double x_hi) {
    BoundParams bp;
    bp.v_max = v_max;
    bp.a_max = a_max;
    bp.suprema = observed_suprema(kernel, pattern, intr, x_lo, x_hi);
    bp.C = C;
    bp.N_u = kernel.N_u();
    bp.N_v = kernel.N_v();
    bp.f_x = intr.f_x;
    bp.Z = intr.Z;
    return bp;
}

struct BoundCheck {
    bool ok;
    double error;   ///< |n_net - M dt| [events]
    double bound;   ///< L_time dt^2 + L_space dt + quantization slack [events]
    double margin;  ///< bound - error
};

/// Latched counts get N_u * N_v events of slack: each pixel's residual is below one threshold.
inline BoundCheck check_bound(const NetCount& n, double M, const BoundConstants& bc, double dt, DvsMode mode,
                              const BoundParams& bp) {
    const double q_slack = mode == DvsMode::Latched ? bp.N_u * bp.N_v : 0.0;
    const double err = std::abs(n.n_net - M * dt);
    const double bound = bc.L_time * dt * dt + bc.L_space * dt + q_slack;
    return {err <= bound, err, bound, bound - err};
}

struct CalibrationSample {
    double n_net;
    double state;  ///< x * xdot for K1, xdot for K2
};

struct LumpedConstant {
    double value = 0.0;         ///< events per state unit over one window (C_q dt or C_l dt)
    double fit_residual = 0.0;  ///< ||n/value - state||_2 / N_s, in state units
    std::size_t n_samples = 0;
};

inline LumpedConstant calibrate(std::span<const CalibrationSample> samples) {
    if (samples.size() < 2) throw CalibrationError("calibrate: need at least 2 samples");
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& s : samples) {
        sxy += s.n_net * s.state;
        sxx += s.state * s.state;
    }
    if (!(sxx > 0.0)) throw CalibrationError("calibrate: degenerate regressor (all states zero)");
    const double c = sxy / sxx;
    if (c == 0.0 || !std::isfinite(c)) throw CalibrationError("calibrate: fitted constant is zero or non-finite");
    double ss = 0.0;
    for (const auto& s : samples) {
        const double e = s.n_net / c - s.state;
        ss += e * e;
    }
    return {c, std::sqrt(ss) / static_cast<double>(samples.size()), samples.size()};
}

/// est(x * xdot) * est(xdot) [m^3/s^2]
inline double synthesize_feedback(double n_net_k1, double n_net_k2, const LumpedConstant& lumped_k1,
                                  const LumpedConstant& lumped_k2) {
    return (n_net_k1 / lumped_k1.value) * (n_net_k2 / lumped_k2.value);
}

struct CalibrationRow {
    std::string kernel;
    LumpedConstant lumped;
};

inline void write_calibration_csv(std::ostream& os, std::span<const CalibrationRow> rows) {
    os << "kernel,lumped_value,fit_residual,n_samples\n";
    for (const auto& r : rows)
        os << r.kernel << ',' << r.lumped.value << ',' << r.lumped.fit_residual << ',' << r.lumped.n_samples << '\n';
}

}  // namespace ebvs
