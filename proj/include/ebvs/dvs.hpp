/**
 * @file dvs.hpp
 * @brief Per-pixel dynamic vision sensor model.
 *
 * Each pixel keeps a reference log intensity. In latched mode a step emits
 * floor(|d| / C) events of polarity sign(d) where d is the change since the
 * reference, and the reference advances by whole thresholds so the residual
 * stays below one threshold. In ideal-fractional mode no discrete events are
 * emitted; the fractional count (log I - reference) / C is queried instead.
 *
 * Only pixels inside the active regions are stepped. The latch array itself
 * covers the full sensor so reset() leaves every pixel event-free.
 */
#pragma once

#include "ebvs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace ebvs {

struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

enum class DvsMode { Latched, IdealFractional };

struct DvsConfig {
    double C = 0.2;  ///< contrast threshold [log-intensity]
    DvsMode mode = DvsMode::Latched;
    std::uint64_t seed = 0;
    double threshold_jitter = 0.0;  ///< relative std-dev of C per pixel per step

    void validate() const {
        if (!(C > 0.0)) throw std::invalid_argument("dvs: contrast threshold must be positive");
        if (!(threshold_jitter >= 0.0)) throw std::invalid_argument("dvs: threshold_jitter must be >= 0");
    }
};

struct Event {
    int u;
    int v;
    int p;  ///< -1 or +1
    std::int64_t t_us;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Canonical order: (t_us, v, u, p).
inline bool canonical_less(const Event& a, const Event& b) {
    return std::tie(a.t_us, a.v, a.u, a.p) < std::tie(b.t_us, b.v, b.u, b.p);
}

inline void canonical_sort(std::vector<Event>& events) {
    std::stable_sort(events.begin(), events.end(), canonical_less);
}

inline void write_events_header(std::ostream& os) { os << "t_us,u,v,p\n"; }

inline void write_events_rows(std::ostream& os, const std::vector<Event>& events) {
    for (const auto& e : events) os << e.t_us << ',' << e.u << ',' << e.v << ',' << e.p << '\n';
}

/// Inclusive pixel rectangle.
struct PixelRegion {
    int u_min;
    int u_max;
    int v_min;
    int v_max;

    bool contains(int u, int v) const { return u >= u_min && u <= u_max && v >= v_min && v <= v_max; }
    int columns() const { return u_max - u_min + 1; }
    int rows() const { return v_max - v_min + 1; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Standard normal draw keyed on (seed, pixel, step); truncated to [-6, 6].
inline double keyed_normal(std::uint64_t seed, std::uint64_t pixel, std::uint64_t step) {
    const std::uint64_t h1 = splitmix64(seed ^ splitmix64(pixel * 0x100000001B3ull + step));
    const std::uint64_t h2 = splitmix64(h1);
    const double u1 = (static_cast<double>(h1 >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return std::clamp(z, -6.0, 6.0);
}

}  // namespace detail

class DvsSimulator {
public:
    DvsSimulator(CameraIntrinsics intr, DvsConfig cfg, std::vector<PixelRegion> active = {})
        : intr_(intr), cfg_(cfg), active_(std::move(active)) {
        intr_.validate();
        cfg_.validate();
        if (active_.empty()) active_.push_back({0, intr_.width - 1, 0, intr_.height - 1});
        for (const auto& r : active_) {
            if (r.u_min < 0 || r.v_min < 0 || r.u_max >= intr_.width || r.v_max >= intr_.height || r.u_min > r.u_max ||
                r.v_min > r.v_max)
                throw std::invalid_argument("dvs: active region outside sensor");
        }
        std::stable_sort(active_.begin(), active_.end(),
                         [](const PixelRegion& a, const PixelRegion& b) { return a.v_min < b.v_min; });
        ref_.assign(static_cast<std::size_t>(intr_.width) * intr_.height, 0.0);
    }

    const CameraIntrinsics& intrinsics() const { return intr_; }
    const DvsConfig& config() const { return cfg_; }
    const std::vector<PixelRegion>& active_regions() const { return active_; }

    /// Latch every pixel to the scene seen from pose x0 at time t0_us.
    void reset(const ScenePattern& pattern, double x0, std::int64_t t0_us = 0) {
        pattern_ = &pattern;
        const double t = t0_us * 1e-6;
        for (int v = 0; v < intr_.height; ++v) {
            double* row = &ref_[index(0, v)];
            for (int u = 0; u < intr_.width; ++u) row[u] = intensity_at_time(pattern, intr_, u - intr_.o_x, v, x0, t);
        }
        x_now_ = x0;
        t_last_us_ = t0_us;
        steps_ = 0;
        events_since_reset_ = 0;
    }

    /// Advance to pose x_new at t_us; returns the latched events in canonical order.
    std::vector<Event> step(const ScenePattern& pattern, double x_new, std::int64_t t_us) {
        if (t_us <= t_last_us_)
            throw ContractViolation("dvs: step timestamp " + std::to_string(t_us) + " not after " +
                                    std::to_string(t_last_us_));
        pattern_ = &pattern;
        x_now_ = x_new;
        t_last_us_ = t_us;
        ++steps_;
        std::vector<Event> out;
        if (cfg_.mode == DvsMode::IdealFractional) return out;

        const double t = t_us * 1e-6;
        const double C = cfg_.C;
        const double jit = cfg_.threshold_jitter;
        const double skip_below = jit > 0.0 ? C * std::max(0.0, 1.0 - 6.0 * jit) : C;
        for (const auto& r : active_) {
            fill_columns(pattern, r, t);
            for (int v = r.v_min; v <= r.v_max; ++v) {
                const std::vector<double>& cols = row_values(pattern, v);
                double* ref = &ref_[index(0, v)];
                for (int u = r.u_min; u <= r.u_max; ++u) {
                    const double d = cols[u - r.u_min] - ref[u];
                    const double ad = std::abs(d);
                    if (ad < skip_below) continue;
                    double c_eff = C;
                    if (jit > 0.0) {
                        const auto pix = static_cast<std::uint64_t>(index(u, v));
                        c_eff = C * std::max(1e-3, 1.0 + jit * detail::keyed_normal(cfg_.seed, pix, steps_));
                    }
                    if (ad < c_eff) continue;
                    const auto n = static_cast<long>(std::floor(ad / c_eff));
                    const int p = d > 0.0 ? 1 : -1;
                    ref[u] += p * static_cast<double>(n) * c_eff;
                    for (long i = 0; i < n; ++i) out.push_back({u, v, p, t_us});
                }
            }
        }
        if (!std::is_sorted(out.begin(), out.end(), canonical_less)) canonical_sort(out);
        events_since_reset_ += out.size();
        return out;
    }

    /// (log I_now - reference) / C at pixel (u, v). In ideal-fractional mode this is
    /// the exact fractional count accumulated since reset; in latched mode it is the
    /// residual not yet converted into events.
    double fractional_count(int u, int v) const {
        require_reset();
        return (intensity_at_time(*pattern_, intr_, u - intr_.o_x, v, x_now_, t_last_us_ * 1e-6) - ref_[index(u, v)]) /
               cfg_.C;
    }

    /// Sum of fractional_count over a region. Differences per pixel are formed before summing.
    double fractional_count(const PixelRegion& r) const {
        require_reset();
        const double t = t_last_us_ * 1e-6;
        double sum = 0.0;
        for (int v = r.v_min; v <= r.v_max; ++v) {
            const SubProfile sub = pattern_->row_profile(v);
            const double mu = image_shift(intr_, x_now_) - image_shift(intr_, pattern_->center.offset_at(t));
            const double* ref = &ref_[index(0, v)];
            double row_sum = 0.0;
            for (int u = r.u_min; u <= r.u_max; ++u) row_sum += profile_value(sub, u - intr_.o_x + mu) - ref[u];
            sum += row_sum;
        }
        return sum / cfg_.C;
    }

    double reference(int u, int v) const { return ref_[index(u, v)]; }
    std::int64_t last_timestamp_us() const { return t_last_us_; }
    std::uint64_t events_since_reset() const { return events_since_reset_; }

private:
    std::size_t index(int u, int v) const {
        return static_cast<std::size_t>(v) * static_cast<std::size_t>(intr_.width) + static_cast<std::size_t>(u);
    }

    void require_reset() const {
        if (pattern_ == nullptr) throw ContractViolation("dvs: simulator used before reset");
    }

    // Log intensity depends on the row only through its sub-profile, so each
    // step evaluates the region's columns once per sub-profile.
    void fill_columns(const ScenePattern& pattern, const PixelRegion& r, double t) {
        const double mu = image_shift(intr_, x_now_) - image_shift(intr_, pattern.center.offset_at(t));
        const SubProfile top = pattern.row_profile(r.v_min);
        const SubProfile bottom = pattern.row_profile(r.v_max);
        first_cols_.resize(static_cast<std::size_t>(r.columns()));
        second_cols_.resize(static_cast<std::size_t>(r.columns()));
        for (int u = r.u_min; u <= r.u_max; ++u) {
            const double s = u - intr_.o_x + mu;
            first_cols_[u - r.u_min] = profile_value(top, s);
            second_cols_[u - r.u_min] = profile_value(bottom, s);
        }
        first_sub_ = top;
    }

    const std::vector<double>& row_values(const ScenePattern& pattern, int v) const {
        const SubProfile sub = pattern.row_profile(v);
        return sub.index() == first_sub_.index() ? first_cols_ : second_cols_;
    }

    CameraIntrinsics intr_;
    DvsConfig cfg_;
    std::vector<PixelRegion> active_;
    std::vector<double> ref_;
    const ScenePattern* pattern_ = nullptr;
    double x_now_ = 0.0;
    std::int64_t t_last_us_ = std::numeric_limits<std::int64_t>::min();
    std::uint64_t steps_ = 0;
    std::uint64_t events_since_reset_ = 0;

    std::vector<double> first_cols_;
    std::vector<double> second_cols_;
    SubProfile first_sub_ = LinearProfile{1.0};
};

}  // namespace ebvs
