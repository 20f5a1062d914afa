/**
 * @file config.hpp
 * @brief Experiment configuration and its plain-text reader.
 *
 * Format: `[section]` headers followed by `key = value` lines; `#` starts a
 * comment. Sections: scene, camera, plant, controller, estimator, sim.
 * Unknown sections or keys are rejected. controller.a, controller.omega and
 * controller.K must always be given in the file.
 */
#pragma once

#include "ebvs/controller.hpp"
#include "ebvs/dvs.hpp"
#include "ebvs/estimator.hpp"
#include "ebvs/plant.hpp"
#include "ebvs/scene.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebvs {

/// Raised for malformed or incomplete configuration; `key` names the offending entry.
struct ConfigError : std::runtime_error {
    ConfigError(std::string key_, const std::string& msg) : std::runtime_error(key_ + ": " + msg), key(std::move(key_)) {}
    std::string key;
};

enum class FeedbackSource { Events, Perfect };

struct SimConfig {
    // [scene]
    double sigma = 330.0;
    double k = 1.299e-3;
    int split_row = 360;
    // [camera]
    CameraIntrinsics camera;
    // [plant]
    PlantParams plant;
    // [controller]
    ControllerParams controller{0.18, 2.0 * std::numbers::pi / 1.5, 1.5};
    // [estimator]
    Kernel k1{{540, 739, 130, 229}, KernelRole::K1_quadratic};
    Kernel k2{{540, 739, 490, 589}, KernelRole::K2_linear};
    DvsConfig dvs;
    double dt = 0.01;        ///< sensing window [s]
    double lumped_k1 = 0.0;  ///< 0 means calibrate in a preamble run
    double lumped_k2 = 0.0;
    // [sim]
    double duration = 30.0;
    double h = 0.001;
    std::uint64_t seed = 1;
    double x0 = 0.0;
    double xdot0 = 0.0;
    std::vector<TargetSchedule::Step> targets;
    int latency_windows = 1;
    FeedbackSource feedback = FeedbackSource::Events;
    double excitation_v_max = 0.45;
    double excitation_a_max = 2.0;
    double excitation_span = 0.2;
    double calibration_duration = 20.0;
    bool export_events = true;
    int stability_points = 20;

    ScenePattern pattern() const { return make_dual_split(camera, sigma, k, split_row, TargetSchedule(targets)); }

    std::int64_t dt_us() const { return static_cast<std::int64_t>(std::llround(dt * 1e6)); }
    std::int64_t h_us() const { return static_cast<std::int64_t>(std::llround(h * 1e6)); }

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const {
        camera.validate();
        plant.validate();
        controller.validate();
        dvs.validate();
        const auto pat = pattern();
        validate_kernel(k1, camera, pat);
        validate_kernel(k2, camera, pat);
        if (!(duration > 0.0)) throw std::invalid_argument("sim: duration must be positive");
        if (!(h > 0.0) || !(dt > 0.0)) throw std::invalid_argument("sim: h and dt must be positive");
        if (h_us() <= 0 || dt_us() % h_us() != 0) throw std::invalid_argument("sim: dt must be a whole multiple of h in microseconds");
        if (h > dt / 10.0 + 1e-12) throw std::invalid_argument("sim: h must not exceed dt/10");
        if (latency_windows < 1) throw std::invalid_argument("sim: latency_windows must be >= 1");
        if (!(excitation_v_max > 0.0) || !(excitation_a_max > 0.0) || !(excitation_span > 0.0))
            throw std::invalid_argument("sim: excitation limits must be positive");
        if (!(calibration_duration > 0.0)) throw std::invalid_argument("sim: calibration_duration must be positive");
        if (stability_points < 1) throw std::invalid_argument("sim: stability_points must be >= 1");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a number, got '" + v + "'");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

/// "t:offset, t:offset"
inline std::vector<TargetSchedule::Step> parse_targets(const std::string& key, const std::string& v) {
    std::vector<TargetSchedule::Step> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError(key, "expected time:offset, got '" + item + "'");
        out.push_back({parse_double(key, trim(item.substr(0, colon))), parse_double(key, trim(item.substr(colon + 1)))});
    }
    return out;
}

}  // namespace detail

inline SimConfig parse_config(std::istream& in) {
    SimConfig c;
    using Setter = std::function<void(const std::string& key, const std::string& value)>;
    auto num = [](double& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = detail::parse_double(k, v); }; };
    auto integer = [](int& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) { dst = static_cast<int>(detail::parse_int(k, v)); };
    };

    std::map<std::string, Setter> table{
        {"scene.sigma", num(c.sigma)},
        {"scene.k", num(c.k)},
        {"scene.split_row", integer(c.split_row)},
        {"camera.fx", num(c.camera.f_x)},
        {"camera.fy", num(c.camera.f_y)},
        {"camera.ox", num(c.camera.o_x)},
        {"camera.oy", num(c.camera.o_y)},
        {"camera.width", integer(c.camera.width)},
        {"camera.height", integer(c.camera.height)},
        {"camera.Z", num(c.camera.Z)},
        {"plant.fwd_p1", num(c.plant.forward.p1)},
        {"plant.fwd_p2", num(c.plant.forward.p2)},
        {"plant.fwd_p3", num(c.plant.forward.p3)},
        {"plant.bwd_p1", num(c.plant.backward.p1)},
        {"plant.bwd_p2", num(c.plant.backward.p2)},
        {"plant.bwd_p3", num(c.plant.backward.p3)},
        {"plant.beta", num(c.plant.beta)},
        {"plant.u_lo", num(c.plant.u_lo)},
        {"plant.u_hi", num(c.plant.u_hi)},
        {"controller.a", num(c.controller.a)},
        {"controller.omega", num(c.controller.omega)},
        {"controller.K", num(c.controller.K)},
        {"estimator.k1_u_min", integer(c.k1.rect.u_min)},
        {"estimator.k1_u_max", integer(c.k1.rect.u_max)},
        {"estimator.k1_v_min", integer(c.k1.rect.v_min)},
        {"estimator.k1_v_max", integer(c.k1.rect.v_max)},
        {"estimator.k2_u_min", integer(c.k2.rect.u_min)},
        {"estimator.k2_u_max", integer(c.k2.rect.u_max)},
        {"estimator.k2_v_min", integer(c.k2.rect.v_min)},
        {"estimator.k2_v_max", integer(c.k2.rect.v_max)},
        {"estimator.C", num(c.dvs.C)},
        {"estimator.threshold_jitter", num(c.dvs.threshold_jitter)},
        {"estimator.dvs_mode",
         [&c](const std::string& k, const std::string& v) {
             if (v == "latched") c.dvs.mode = DvsMode::Latched;
             else if (v == "ideal_fractional") c.dvs.mode = DvsMode::IdealFractional;
             else throw ConfigError(k, "expected latched or ideal_fractional, got '" + v + "'");
         }},
        {"estimator.dt", num(c.dt)},
        {"estimator.lumped_k1", num(c.lumped_k1)},
        {"estimator.lumped_k2", num(c.lumped_k2)},
        {"sim.duration", num(c.duration)},
        {"sim.h", num(c.h)},
        {"sim.seed",
         [&c](const std::string& k, const std::string& v) { c.seed = static_cast<std::uint64_t>(detail::parse_int(k, v)); }},
        {"sim.x0", num(c.x0)},
        {"sim.xdot0", num(c.xdot0)},
        {"sim.targets", [&c](const std::string& k, const std::string& v) { c.targets = detail::parse_targets(k, v); }},
        {"sim.latency_windows", integer(c.latency_windows)},
        {"sim.feedback",
         [&c](const std::string& k, const std::string& v) {
             if (v == "events") c.feedback = FeedbackSource::Events;
             else if (v == "perfect") c.feedback = FeedbackSource::Perfect;
             else throw ConfigError(k, "expected events or perfect, got '" + v + "'");
         }},
        {"sim.excitation_v_max", num(c.excitation_v_max)},
        {"sim.excitation_a_max", num(c.excitation_a_max)},
        {"sim.excitation_span", num(c.excitation_span)},
        {"sim.calibration_duration", num(c.calibration_duration)},
        {"sim.export_events", [&c](const std::string& k, const std::string& v) { c.export_events = detail::parse_bool(k, v); }},
        {"sim.stability_points", integer(c.stability_points)},
    };
    const std::set<std::string> sections{"scene", "camera", "plant", "controller", "estimator", "sim"};
    const std::vector<std::string> required{"controller.a", "controller.omega", "controller.K"};

    std::set<std::string> seen;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!sections.count(section)) throw ConfigError(section, "unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(lineno), "key outside any section");
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError(key, "unknown key");
        if (!seen.insert(key).second) throw ConfigError(key, "duplicate key");
        it->second(key, value);
    }
    for (const auto& r : required)
        if (!seen.count(r)) throw ConfigError(r, "missing required key");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config", e.what());
    }
    return c;
}

inline SimConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    return parse_config(in);
}

}  // namespace ebvs
