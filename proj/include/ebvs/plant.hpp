/**
 * @file plant.hpp
 * @brief Longitudinal vehicle dynamics  xddot = -p1 xdot + p2 u - p3  with
 *        separate forward/backward parameter sets blended by tanh(beta xdot).
 */
#pragma once

#include "ebvs/dvs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ebvs {

struct DirectionalParams {
    double p1;  ///< [1/s]
    double p2;  ///< [m/s^2 per unit duty]
    double p3;  ///< [m/s^2]
};

struct PlantParams {
    DirectionalParams forward{2.530, 33.977, 1.349};
    DirectionalParams backward{2.954, 37.497, -1.510};
    double beta = 20.0;  ///< [s/m]
    double u_lo = -1.0;
    double u_hi = 1.0;

    void validate() const {
        if (!(forward.p1 > 0.0 && backward.p1 > 0.0)) throw std::invalid_argument("plant: p1 must be positive");
        if (!(forward.p2 > 0.0 && backward.p2 > 0.0)) throw std::invalid_argument("plant: p2 must be positive");
        if (!(u_lo < u_hi)) throw std::invalid_argument("plant: u_lo must be below u_hi");
        if (!(beta >= 0.0)) throw std::invalid_argument("plant: beta must be non-negative");
    }

    double clamp(double u) const { return std::clamp(u, u_lo, u_hi); }
};

struct RobotState {
    double x = 0.0;      ///< [m]
    double x_dot = 0.0;  ///< [m/s]
    double t = 0.0;      ///< [s]
};

inline DirectionalParams blended_params(const PlantParams& pp, double x_dot) {
    const double s = std::tanh(pp.beta * x_dot);
    const double wf = 0.5 * (1.0 + s);
    const double wb = 0.5 * (1.0 - s);
    return {pp.forward.p1 * wf + pp.backward.p1 * wb, pp.forward.p2 * wf + pp.backward.p2 * wb,
            pp.forward.p3 * wf + pp.backward.p3 * wb};
}

struct StateDerivative {
    double x_dot;
    double x_ddot;
};

/// Input is clamped to [u_lo, u_hi] before use.
inline StateDerivative dynamics_deriv(const RobotState& s, double u, const PlantParams& pp) {
    if (!std::isfinite(s.x) || !std::isfinite(s.x_dot) || !std::isfinite(u))
        throw ContractViolation("plant: non-finite state or input");
    const auto p = blended_params(pp, s.x_dot);
    return {s.x_dot, -p.p1 * s.x_dot + p.p2 * pp.clamp(u) - p.p3};
}

/// Classical RK4 with u held over the step.
inline RobotState step_rk4(const RobotState& s, double u, const PlantParams& pp, double h) {
    if (!(h > 0.0)) throw ContractViolation("plant: step size must be positive");
    auto at = [&](double dx, double dv) { return RobotState{s.x + dx, s.x_dot + dv, s.t}; };
    const auto k1 = dynamics_deriv(s, u, pp);
    const auto k2 = dynamics_deriv(at(0.5 * h * k1.x_dot, 0.5 * h * k1.x_ddot), u, pp);
    const auto k3 = dynamics_deriv(at(0.5 * h * k2.x_dot, 0.5 * h * k2.x_ddot), u, pp);
    const auto k4 = dynamics_deriv(at(h * k3.x_dot, h * k3.x_ddot), u, pp);
    return {s.x + h / 6.0 * (k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot),
            s.x_dot + h / 6.0 * (k1.x_ddot + 2.0 * k2.x_ddot + 2.0 * k3.x_ddot + k4.x_ddot), s.t + h};
}

}  // namespace ebvs
