// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/scenario.hpp"

#include <fstream>

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

namespace {

std::vector<dmp::Waypoint> demo_poses(const nlohmann::json& event, const std::filesystem::path& base_dir) {
    if (event.contains("file")) {
        const auto path = base_dir / event["file"].get<std::string>();
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open demo file " + path.string());
        return dmp::read_waypoints_jsonl(in);
    }
    return std::get<DemoAppendInput>(input_from_json({{"type", "demo_append"}, {"poses", event.at("poses")}})).poses;
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    try {
        Scenario s;
        s.name = j.value("name", std::string{});
        s.config = config_from_json(j.value("config", nlohmann::json::object()));
        for (const auto& e : j.at("events")) {
            const std::int64_t after = e.value("after_ms", std::int64_t{0});
            if (after < 0) throw Error(ErrorCode::MalformedDocument, "after_ms must be nonnegative");
            if (e.at("type").get<std::string>() == "demo") {
                const auto poses = demo_poses(e, base_dir);
                const std::size_t chunk = e.value("chunk", std::size_t{25});
                s.events.push_back({after, DemoBeginInput{}});
                for (std::size_t i = 0; i < poses.size(); i += chunk) {
                    DemoAppendInput append;
                    append.poses.assign(poses.begin() + static_cast<std::ptrdiff_t>(i),
                                        poses.begin() + static_cast<std::ptrdiff_t>(std::min(poses.size(), i + chunk)));
                    // Each chunk arrives once its last pose has been recorded.
                    const double span = append.poses.back().t - (i == 0 ? poses.front().t : poses[i - 1].t);
                    s.events.push_back({static_cast<std::int64_t>(std::llround(span * 1000.0)), std::move(append)});
                }
                s.events.push_back({0, DemoEndInput{}});
                continue;
            }
            s.events.push_back({after, input_from_json(e)});
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("bad scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open scenario " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, fmt::format("{}: {}", path.string(), e.what()));
    }
    Scenario s = scenario_from_json(j, path.parent_path());
    if (s.name.empty()) s.name = path.stem().string();
    return s;
}

std::unique_ptr<Session> run_scenario(const Scenario& scenario, std::shared_ptr<PlannerBackend> backend) {
    auto session = std::make_unique<Session>(scenario.config, std::move(backend));
    for (const auto& e : scenario.events) session->submit_after(e.input, e.after_ms);
    return session;
}

}  // namespace vsandbox
