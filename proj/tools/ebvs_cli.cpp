// Command-line front end: simulate, calibrate, bounds, stability, sweep.
//
// Exit codes: 0 success, 1 validation failure, 2 bad flags or config.

#include "ebvs/config.hpp"
#include "ebvs/harness.hpp"
#include "ebvs/stability.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kBadConfig = 2;

struct Options {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

std::ofstream open_csv(const Options& opt, const std::string& name) {
    std::ofstream os(fs::path(opt.out) / name);
    if (!os) throw std::runtime_error("cannot write " + (fs::path(opt.out) / name).string());
    os << std::setprecision(12);
    return os;
}

void say(const Options& opt, const std::string& line) {
    if (!opt.quiet) std::cout << line << '\n';
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(prec) << v;
    return ss.str();
}

void write_calibration(const Options& opt, const ebvs::ExperimentResult& r) {
    auto os = open_csv(opt, "calibration.csv");
    std::vector<ebvs::CalibrationRow> rows;
    if (r.lumped_k1) rows.push_back({"K1", *r.lumped_k1});
    if (r.lumped_k2) rows.push_back({"K2", *r.lumped_k2});
    ebvs::write_calibration_csv(os, rows);
}

int cmd_simulate(const Options& opt, const ebvs::SimConfig& cfg) {
    std::optional<std::ofstream> events;
    if (cfg.export_events) {
        events.emplace(open_csv(opt, "events.csv"));
        ebvs::write_events_header(*events);
    }
    const auto r = ebvs::run_closed_loop(cfg, events ? &*events : nullptr);
    {
        auto os = open_csv(opt, "trajectory.csv");
        ebvs::write_trajectory_csv(os, r.trajectory);
    }
    if (r.lumped_k1 || r.lumped_k2) write_calibration(opt, r);
    say(opt, "simulate: windows=" + std::to_string(r.trajectory.size()) + " amplitude=" + fmt(r.summary.amplitude) +
                 " amplitude_error=" + fmt(r.summary.amplitude_error) + " settle_time_15=" + fmt(r.summary.settle_time_15, 2) +
                 " bound_violations=" + std::to_string(r.summary.bound_violations) +
                 " events=" + std::to_string(r.events_emitted));
    return r.summary.bound_violations == 0 ? kOk : kValidationFailure;
}

int cmd_calibrate(const Options& opt, const ebvs::SimConfig& cfg) {
    std::optional<std::ofstream> events;
    if (cfg.export_events) {
        events.emplace(open_csv(opt, "events.csv"));
        ebvs::write_events_header(*events);
    }
    const auto r = ebvs::run_open_loop_excitation(cfg, events ? &*events : nullptr);
    write_calibration(opt, r);
    say(opt, "calibrate: K1=" + fmt(r.lumped_k1->value, 6) + " K2=" + fmt(r.lumped_k2->value, 6) +
                 " resid_q=" + fmt(r.lumped_k1->fit_residual, 6) + " resid_l=" + fmt(r.lumped_k2->fit_residual, 6) +
                 " windows=" + std::to_string(r.windows.size()));
    return kOk;
}

int cmd_bounds(const Options& opt, const ebvs::SimConfig& cfg) {
    const auto r = ebvs::run_open_loop_excitation(cfg);
    {
        auto os = open_csv(opt, "bounds.csv");
        ebvs::write_bounds_csv(os, r.bounds_k1);
    }
    {
        auto os = open_csv(opt, "bounds_k2.csv");
        ebvs::write_bounds_csv(os, r.bounds_k2);
    }
    say(opt, "bounds: windows=" + std::to_string(r.summary.windows_checked) +
                 " violations=" + std::to_string(r.summary.bound_violations));
    return r.summary.bound_violations == 0 ? kOk : kValidationFailure;
}

int cmd_stability(const Options& opt, const ebvs::SimConfig& cfg) {
    const double omega = cfg.controller.omega;
    const double op_delta = ebvs::delta(cfg.controller);
    bool sound = true;
    std::optional<ebvs::StabilityReport> op;
    for (const auto& [name, p1] : {std::pair{std::string("stability.csv"), cfg.plant.forward.p1},
                                   std::pair{std::string("stability_backward.csv"), cfg.plant.backward.p1}}) {
        const double dd = ebvs::delta_dagger(p1, omega);
        std::vector<double> grid{op_delta};
        for (int i = 1; i <= cfg.stability_points; ++i) grid.push_back(2.0 * dd * i / cfg.stability_points);
        const auto reports = ebvs::stability_scan(p1, omega, grid);
        for (const auto& r : reports)
            if (r.within_bound && r.delta > 0.0 && !(r.psd_ok && r.spectral_radius < 1.0)) sound = false;
        if (!op) op = reports.front();
        auto os = open_csv(opt, name);
        ebvs::write_stability_csv(os, reports);
    }
    say(opt, "delta=" + fmt(op->delta) + " delta_dagger=" + fmt(op->delta_dagger) +
                 (op->spectral_radius < 1.0 ? " floquet_radius<1" : " floquet_radius>=1"));
    return sound ? kOk : kValidationFailure;
}

int cmd_sweep(const Options& opt, const ebvs::SimConfig& cfg) {
    const auto rows = ebvs::run_table1_sweep(cfg);
    auto os = open_csv(opt, "sweep.csv");
    ebvs::write_sweep_csv(os, rows);
    say(opt, "sweep: rows=" + std::to_string(rows.size()));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-based visual servoing simulator"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&opt](CLI::App* sub) {
        sub->add_option("--config", opt.config, "Configuration file")->required();
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_option("--seed", opt.seed, "Override sim.seed");
        sub->add_flag("--quiet", opt.quiet, "Suppress the summary line");
    };
    using Handler = int (*)(const Options&, const ebvs::SimConfig&);
    std::vector<std::pair<CLI::App*, Handler>> subs{
        {app.add_subcommand("simulate", "Closed-loop run"), cmd_simulate},
        {app.add_subcommand("calibrate", "Open-loop excitation and least-squares calibration"), cmd_calibrate},
        {app.add_subcommand("bounds", "Net event count bound check over an excitation run"), cmd_bounds},
        {app.add_subcommand("stability", "Lyapunov/Floquet scan over delta"), cmd_stability},
        {app.add_subcommand("sweep", "Pattern/velocity grid of calibration residuals"), cmd_sweep},
    };
    for (auto& [sub, _] : subs) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kBadConfig;
    }

    ebvs::SimConfig cfg;
    try {
        cfg = ebvs::load_config(opt.config);
        if (opt.seed) cfg.seed = *opt.seed;
    } catch (const ebvs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kBadConfig;
    }

    try {
        fs::create_directories(opt.out);
        for (auto& [sub, handler] : subs)
            if (sub->parsed()) return handler(opt, cfg);
    } catch (const ebvs::SimulationDiverged& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const ebvs::CalibrationError& e) {
        std::cerr << "calibration failed: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidationFailure;
    }
    return kBadConfig;
}
