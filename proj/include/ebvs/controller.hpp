/**
 * @file controller.hpp
 * @brief Limit-cycle reference x* = a sin(wt) and the active-sensing control law.
 *
 *   u = (1/p2) [ p1 a w cos(wt) - a w^2 sin(wt) + p3
 *                - K (fb - a^3 w^2 sin(wt) cos^2(wt)) ]
 *
 * fb is the event-synthesized estimate of x * xdot^2; the bracket vanishes on the orbit.
 */
#pragma once

#include "ebvs/plant.hpp"

#include <cmath>
#include <stdexcept>

namespace ebvs {

struct ControllerParams {
    double a = 0.18;      ///< amplitude [m]
    double omega = 0.0;   ///< [rad/s]
    double K = 0.0;       ///< feedback gain

    void validate() const {
        if (!(a > 0.0)) throw std::invalid_argument("controller: a must be positive");
        if (!(omega > 0.0)) throw std::invalid_argument("controller: omega must be positive");
        if (!(K >= 0.0)) throw std::invalid_argument("controller: K must be non-negative");
    }
};

struct Reference {
    double x_star;
    double xdot_star;
};

inline Reference reference(const ControllerParams& cp, double t) {
    return {cp.a * std::sin(cp.omega * t), cp.a * cp.omega * std::cos(cp.omega * t)};
}

/// x* (xdot*)^2 on the orbit.
inline double orbit_feedback(const ControllerParams& cp, double t) {
    const double s = std::sin(cp.omega * t);
    const double c = std::cos(cp.omega * t);
    return cp.a * cp.a * cp.a * cp.omega * cp.omega * s * c * c;
}

/// Unclamped duty cycle; the caller clamps to the plant limits.
inline double control_input(const ControllerParams& cp, const DirectionalParams& p, double t, double fb) {
    if (p.p2 == 0.0) throw std::invalid_argument("controller: p2 must be nonzero");
    const double w = cp.omega;
    const double feedforward = p.p1 * cp.a * w * std::cos(w * t) - cp.a * w * w * std::sin(w * t) + p.p3;
    return (feedforward - cp.K * (fb - orbit_feedback(cp, t))) / p.p2;
}

inline double delta(const ControllerParams& cp) { return cp.K * cp.a * cp.a; }

}  // namespace ebvs
