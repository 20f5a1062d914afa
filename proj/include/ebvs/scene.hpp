/**
 * @file scene.hpp
 * @brief Displayed log-intensity patterns, pinhole geometry and the
 *        image shift induced by lateral camera motion.
 *
 * Horizontal coordinates handed to the profile functions are image-plane
 * coordinates re-centered on the principal point (u - o_x), so a kernel
 * that is symmetric about the principal point has a column sum of zero.
 * Rows are raw sensor indices; v grows downward.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ebvs {

struct CameraIntrinsics {
    double f_x = 1000.0;
    double f_y = 1000.0;
    double o_x = 639.5;
    double o_y = 359.5;
    int width = 1280;
    int height = 720;
    double Z = 1.0;  ///< camera-to-scene distance [m]

    void validate() const {
        if (!(f_x > 0.0) || !(f_y > 0.0)) throw std::invalid_argument("camera: focal lengths must be positive");
        if (!(Z > 0.0)) throw std::invalid_argument("camera: Z must be positive");
        if (width <= 0 || height <= 0) throw std::invalid_argument("camera: resolution must be positive");
        if (!(o_x >= 0.0 && o_x < width)) throw std::invalid_argument("camera: o_x outside sensor");
        if (!(o_y >= 0.0 && o_y < height)) throw std::invalid_argument("camera: o_y outside sensor");
    }

    /// Pixels of image shift per meter of camera translation.
    double pixels_per_meter() const { return f_x / Z; }
};

/// f(s) = k s
struct LinearProfile {
    double k;
};

/// f(s) = -s^2 / (2 sigma^2)
struct QuadraticProfile {
    double sigma;
};

using SubProfile = std::variant<LinearProfile, QuadraticProfile>;

/// Upper rows (v < split_row) show the quadratic profile, the rest the linear one.
struct DualSplitProfile {
    QuadraticProfile quadratic;
    LinearProfile linear;
    int split_row;
};

/// Piecewise-constant world-frame offset of the pattern origin [m].
/// Each step takes effect at its start time and holds until the next one.
class TargetSchedule {
public:
    struct Step {
        double t;
        double offset;
    };

    TargetSchedule() = default;
    explicit TargetSchedule(std::vector<Step> steps) : steps_(std::move(steps)) {
        std::stable_sort(steps_.begin(), steps_.end(),
                         [](const Step& a, const Step& b) { return a.t < b.t; });
    }

    double offset_at(double t) const {
        double off = 0.0;
        for (const auto& s : steps_) {
            if (s.t <= t) off = s.offset;
            else break;
        }
        return off;
    }

    const std::vector<Step>& steps() const { return steps_; }
    bool empty() const { return steps_.empty(); }

private:
    std::vector<Step> steps_;
};

/// Sensor extent in re-centered horizontal coordinates and raw rows.
struct SensorExtent {
    double u_lo;
    double u_hi;
    int height;

    static SensorExtent of(const CameraIntrinsics& intr) {
        return {-intr.o_x, static_cast<double>(intr.width - 1) - intr.o_x, intr.height};
    }
};

struct ScenePattern {
    std::variant<LinearProfile, QuadraticProfile, DualSplitProfile> shape;
    SensorExtent extent;
    TargetSchedule center;

    void validate() const {
        auto check_sub = [](const SubProfile& p) {
            if (const auto* l = std::get_if<LinearProfile>(&p)) {
                if (l->k == 0.0 || !std::isfinite(l->k)) throw std::invalid_argument("scene: k must be nonzero and finite");
            } else {
                const auto& q = std::get<QuadraticProfile>(p);
                if (q.sigma == 0.0 || !std::isfinite(q.sigma)) throw std::invalid_argument("scene: sigma must be nonzero and finite");
            }
        };
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, DualSplitProfile>) {
                    check_sub(s.quadratic);
                    check_sub(s.linear);
                    if (s.split_row < 1 || s.split_row > extent.height - 1)
                        throw std::invalid_argument("scene: split_row must lie in [1, height-1]");
                } else {
                    check_sub(s);
                }
            },
            shape);
    }

    /// Sub-profile that governs row v.
    SubProfile row_profile(int v) const {
        return std::visit(
            [v](const auto& s) -> SubProfile {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, DualSplitProfile>) {
                    if (v < s.split_row) return s.quadratic;
                    return s.linear;
                } else {
                    return s;
                }
            },
            shape);
    }
};

struct DerivativeSuprema {
    double F1 = 0.0;
    double F2 = 0.0;
    double F3 = 0.0;
};

// ---------------------------------------------------------------------------
// Profile evaluation (globally defined, no extent checks)

inline double profile_value(const SubProfile& p, double s) {
    if (const auto* l = std::get_if<LinearProfile>(&p)) return l->k * s;
    const double sg = std::get<QuadraticProfile>(p).sigma;
    return -(s * s) / (2.0 * sg * sg);
}

inline double profile_derivative_at(const SubProfile& p, double s, int order) {
    if (order < 1 || order > 3) throw std::invalid_argument("profile_derivative: order must be 1, 2 or 3");
    if (const auto* l = std::get_if<LinearProfile>(&p)) return order == 1 ? l->k : 0.0;
    const double sg = std::get<QuadraticProfile>(p).sigma;
    switch (order) {
        case 1: return -s / (sg * sg);
        case 2: return -1.0 / (sg * sg);
        default: return 0.0;
    }
}

/// Suprema of |f'|, |f''|, |f'''| over the closed interval [lo, hi].
inline DerivativeSuprema suprema_over(const SubProfile& p, double lo, double hi) {
    if (lo > hi) std::swap(lo, hi);
    if (const auto* l = std::get_if<LinearProfile>(&p)) return {std::abs(l->k), 0.0, 0.0};
    const double sg2 = std::get<QuadraticProfile>(p).sigma * std::get<QuadraticProfile>(p).sigma;
    return {std::max(std::abs(lo), std::abs(hi)) / sg2, 1.0 / sg2, 0.0};
}

// ---------------------------------------------------------------------------
// Checked operations

inline void check_in_extent(const ScenePattern& pattern, double u, int v) {
    const auto& e = pattern.extent;
    if (!(u >= e.u_lo && u <= e.u_hi) || v < 0 || v >= e.height)
        throw std::domain_error("scene: coordinate (" + std::to_string(u) + ", " + std::to_string(v) +
                                ") outside sensor extent");
}

/// f(u) of the sub-profile governing row v; the intensity itself is exp(f).
inline double log_intensity(const ScenePattern& pattern, double u, int v) {
    check_in_extent(pattern, u, v);
    return profile_value(pattern.row_profile(v), u);
}

inline double profile_derivative(const ScenePattern& pattern, double u, int v, int order) {
    check_in_extent(pattern, u, v);
    return profile_derivative_at(pattern.row_profile(v), u, order);
}

/// mu = -(f_x / Z) x
inline double image_shift(const CameraIntrinsics& intr, double x) { return -(intr.f_x / intr.Z) * x; }

/// Log intensity seen at re-centered coordinate u, row v, with the camera at
/// x and the pattern origin displaced by center_offset(t).
inline double intensity_at_time(const ScenePattern& pattern, const CameraIntrinsics& intr, double u, int v,
                                double x, double t) {
    const double mu = image_shift(intr, x);
    const double mu_offset = image_shift(intr, pattern.center.offset_at(t));
    return profile_value(pattern.row_profile(v), u + mu - mu_offset);
}

inline ScenePattern make_dual_split(const CameraIntrinsics& intr, double sigma, double k, int split_row,
                                    TargetSchedule center = {}) {
    ScenePattern p{DualSplitProfile{{sigma}, {k}, split_row}, SensorExtent::of(intr), std::move(center)};
    p.validate();
    return p;
}

inline ScenePattern make_uniform(const CameraIntrinsics& intr, SubProfile profile, TargetSchedule center = {}) {
    ScenePattern p;
    p.extent = SensorExtent::of(intr);
    p.center = std::move(center);
    if (const auto* l = std::get_if<LinearProfile>(&profile)) p.shape = *l;
    else p.shape = std::get<QuadraticProfile>(profile);
    p.validate();
    return p;
}

}  // namespace ebvs
