// SPDX-License-Identifier: Apache-2.0
// sandbox: run, replay, and serve interaction sessions; fit and roll out
// movement primitives from recorded poses.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vsandbox/dmp.hpp"
#include "vsandbox/error.hpp"
#include "vsandbox/event_log.hpp"
#include "vsandbox/gateway.hpp"
#include "vsandbox/http_backend.hpp"
#include "vsandbox/metrics.hpp"
#include "vsandbox/scenario.hpp"
#include "vsandbox/session.hpp"

namespace fs = std::filesystem;
using namespace vsandbox;

namespace {

#ifndef VSANDBOX_SCENARIO_DIR
#define VSANDBOX_SCENARIO_DIR "scenarios"
#endif

fs::path default_scenario_dir() {
    if (const char* env = std::getenv("VSANDBOX_SCENARIO_DIR")) return env;
    return VSANDBOX_SCENARIO_DIR;
}

// A path, or a bundled scenario name.
fs::path scenario_path(const std::string& arg, const fs::path& dir) {
    if (fs::exists(arg)) return arg;
    const fs::path named = dir / (arg + ".json");
    if (fs::exists(named)) return named;
    throw Error(ErrorCode::IoError, fmt::format("no scenario '{}' (looked in {})", arg, dir.string()));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    return out;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, fmt::format("{}: {}", path, e.what()));
    }
}

Vec3 parse_vec3(const std::string& s) {
    std::stringstream ss(s);
    Vec3 v;
    char sep = 0;
    if (!(ss >> v.x() >> sep >> v.y() >> sep >> v.z())) throw Error(ErrorCode::InvalidArgument, "expected x,y,z but got " + s);
    return v;
}

void print_summary(const Session& s, std::ostream& out) {
    const auto& m = s.metrics();
    out << fmt::format("mode {}  api v{}  records {}\n", mode_name(s.state().mode), s.state().api.version(), s.log().size());
    out << fmt::format("commands {} confirmed {} primitive calls {} failures {}\n", m.commands_spoken,
                       m.confirmed_commands, m.primitive_calls, m.skill_failures);
    out << fmt::format("supervision {:.1f} s  behavior complexity {:.3f}\n", m.supervision_time_s(), m.behavior_complexity());
    for (std::size_t i = 0; i < m.segments.size(); ++i) {
        const auto& g = m.segments[i];
        if (i == 0 && g.commands_spoken == 0) continue;
        out << fmt::format("  [{}] {:<8} commands {:>2}  calls {:>3}  failures {}  supervision {:>6.1f} s  complexity {:.2f}\n",
                           i, g.label, g.commands_spoken, g.primitive_calls, g.skill_failures, g.supervision_ms / 1000.0,
                           g.behavior_complexity());
    }
}

void write_outputs(const Session& s, const std::string& log_out, const std::string& metrics_out) {
    if (!log_out.empty()) {
        auto out = open_out(log_out);
        s.persist(out);
    }
    if (!metrics_out.empty()) {
        auto out = open_out(metrics_out);
        out << metrics_to_json(s.metrics()).dump(2) << "\n";
    }
}

dmp::RolloutConfig rollout_config(const dmp::DmpParams& params, const std::string& config_path, const std::string& start,
                                  const std::string& goal, std::size_t frames, double dt, double duration) {
    dmp::RolloutConfig cfg;
    if (!config_path.empty()) {
        cfg = dmp::config_from_json(read_json(config_path));
    } else {
        cfg.start = params.demo_start;
        cfg.goal = params.demo_goal;
        cfg.steps = 30;
        cfg.dt = params.demo_duration / 30.0;
    }
    if (!start.empty()) cfg.start = parse_vec3(start);
    if (!goal.empty()) cfg.goal = parse_vec3(goal);
    if (frames > 0) cfg.steps = frames;
    if (dt > 0.0) cfg.dt = dt;
    if (duration > 0.0) cfg.dt = duration / static_cast<double>(cfg.steps);
    return cfg;
}

void write_trajectory(const dmp::Trajectory& traj, const std::string& path) {
    const auto waypoints = dmp::trajectory_waypoints(traj);
    if (path.empty() || path == "-") {
        dmp::write_waypoints_jsonl(std::cout, waypoints);
    } else {
        auto out = open_out(path);
        dmp::write_waypoints_jsonl(out, waypoints);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive robot teaching sandbox"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a scripted scenario in-process");
    std::string scenario_arg;
    std::string backend;
    std::optional<std::uint64_t> seed;
    std::string metrics_out, log_out;
    std::string scenario_dir = default_scenario_dir().string();
    bool quiet = false;
    run->add_option("--scenario", scenario_arg, "Scenario file or bundled scenario name")->required();
    run->add_option("--backend", backend, "Planner backend")->check(CLI::IsMember({"det", "llm"}));
    run->add_option("--seed", seed, "Error-injection seed");
    run->add_option("--metrics-out", metrics_out, "Write metrics JSON");
    run->add_option("--log-out", log_out, "Write the event log (JSONL)");
    run->add_option("--scenario-dir", scenario_dir, "Where bundled scenarios live");
    run->add_flag("-q,--quiet", quiet, "No summary");

    // replay
    auto* replay = app.add_subcommand("replay", "Rebuild a session from its log and check every record");
    std::string replay_log;
    replay->add_option("log", replay_log, "Event log (JSONL)")->required()->check(CLI::ExistingFile);
    replay->add_option("--seed", seed, "Override the logged seed");
    replay->add_option("--metrics-out", metrics_out, "Write metrics JSON");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve sessions over HTTP");
    GatewayConfig gw;
    gw.scenario_dir = default_scenario_dir();
    std::string gw_dir = gw.scenario_dir.string();
    serve->add_option("--host", gw.host, "Bind address");
    serve->add_option("--port", gw.port, "Port (0 picks one)");
    serve->add_option("--scenario-dir", gw_dir, "Scenarios available to POST /sessions");

    // dmp
    auto* dmp_cmd = app.add_subcommand("dmp", "Movement primitive utilities");
    dmp_cmd->require_subcommand(1);
    std::string demo_path, params_path, config_path, out_path, traj_out;
    std::size_t basis = 32;
    std::size_t resampled = 50;
    std::string start, goal;
    std::size_t frames = 0;
    double dt = 0.0, duration = 0.0;

    auto* fit = dmp_cmd->add_subcommand("fit", "Fit a primitive to a demonstration");
    fit->add_option("--demo", demo_path, "Demonstration poses (JSONL)")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", out_path, "Parameter file (default stdout)");
    fit->add_option("--basis", basis, "Number of basis functions")->check(CLI::PositiveNumber);
    fit->add_option("--resample", resampled, "Resampled demo length")->check(CLI::Range(2, 100000));

    auto* roll = dmp_cmd->add_subcommand("rollout", "Roll out a fitted primitive");
    roll->add_option("--params", params_path, "Parameter file")->required()->check(CLI::ExistingFile);
    roll->add_option("--config", config_path, "Rollout config JSON")->check(CLI::ExistingFile);
    roll->add_option("--start", start, "Start x,y,z (default: demo start)");
    roll->add_option("--goal", goal, "Goal x,y,z (default: demo goal)");
    roll->add_option("--frames", frames, "Number of output poses");
    roll->add_option("--dt", dt, "Seconds per frame");
    roll->add_option("--duration", duration, "Total seconds (overrides --dt)");
    roll->add_option("--out", out_path, "Trajectory JSONL (default stdout)");

    auto* retime = dmp_cmd->add_subcommand("retime", "Change frame count and/or duration of a rollout config");
    retime->add_option("--config", config_path, "Rollout config JSON")->required()->check(CLI::ExistingFile);
    retime->add_option("--frames", frames, "New frame count");
    retime->add_option("--duration", duration, "New total seconds");
    retime->add_option("--out", out_path, "Retimed config (default stdout)");
    retime->add_option("--params", params_path, "Also roll out with these parameters")->check(CLI::ExistingFile);
    retime->add_option("--trajectory-out", traj_out, "Where the retimed rollout goes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            Scenario sc = load_scenario(scenario_path(scenario_arg, scenario_dir));
            if (!backend.empty()) sc.config.backend = backend;
            if (seed) sc.config.seed = *seed;
            auto session = run_scenario(sc, make_backend(sc.config));
            if (!quiet) {
                std::cout << fmt::format("scenario {}\n", sc.name);
                print_summary(*session, std::cout);
            }
            write_outputs(*session, log_out, metrics_out);
            return 0;
        }
        if (replay->parsed()) {
            std::ifstream in(replay_log);
            const auto records = EventLog::read_jsonl(in);
            auto session = Session::resume(records, seed, make_backend);
            std::cout << fmt::format("replayed {} records, all identical\n", records.size());
            print_summary(*session, std::cout);
            write_outputs(*session, "", metrics_out);
            return 0;
        }
        if (serve->parsed()) {
            gw.scenario_dir = gw_dir;
            Gateway gateway(gw);
            const int port = gateway.bind();
            std::cout << fmt::format("listening on http://{}:{}\n", gw.host, port) << std::flush;
            gateway.listen();
            return 0;
        }
        if (fit->parsed()) {
            std::ifstream in(demo_path);
            auto demo = dmp::Demonstration::from_waypoints(dmp::read_waypoints_jsonl(in), resampled);
            dmp::FitOptions opts;
            opts.basis_count = basis;
            const auto params = dmp::fit(demo, opts);
            const std::string text = dmp::params_to_json(params).dump(2) + "\n";
            if (out_path.empty()) {
                std::cout << text;
            } else {
                open_out(out_path) << text;
            }
            return 0;
        }
        if (roll->parsed()) {
            const auto params = dmp::params_from_json(read_json(params_path));
            const auto cfg = rollout_config(params, config_path, start, goal, frames, dt, duration);
            write_trajectory(dmp::rollout(params, cfg), out_path);
            return 0;
        }
        if (retime->parsed()) {
            const auto cfg = dmp::config_from_json(read_json(config_path));
            dmp::RolloutConfig next = cfg;
            if (frames > 0 && duration > 0.0) {
                next = dmp::retime(cfg, frames, duration);
            } else if (frames > 0) {
                next = dmp::retime_frames(cfg, frames);
            } else if (duration > 0.0) {
                next = dmp::retime_duration(cfg, duration);
            }
            const std::string text = dmp::config_to_json(next).dump(2) + "\n";
            if (out_path.empty()) {
                std::cout << text;
            } else {
                open_out(out_path) << text;
            }
            if (!params_path.empty()) {
                write_trajectory(dmp::rollout(dmp::params_from_json(read_json(params_path)), next),
                                 traj_out.empty() ? "-" : traj_out);
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << fmt::format("error: {}: {}\n", to_string(e.code()), e.what());
        return e.code() == ErrorCode::ReplayDivergence ? 3 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
