// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/session.hpp"

namespace vsandbox {

// Scenario file:
//   {"name": "...", "config": {<session config>},
//    "events": [{"after_ms": 1500, "type": "utterance", "text": "..."}, ...]}
//
// Event types are the session input types plus "demo", which expands into
// demo_begin / demo_append / demo_end from a JSONL pose file ("file",
// relative to the scenario) or inline "poses".

struct TimedInput {
    std::int64_t after_ms = 0;
    SessionInput input;
    bool operator==(const TimedInput&) const = default;
};

struct Scenario {
    std::string name;
    SessionConfig config;
    std::vector<TimedInput> events;
};

/// Throws MalformedDocument or IoError.
Scenario load_scenario(const std::filesystem::path& path);
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Feeds every event in order. Rejected inputs are kept in the log.
std::unique_ptr<Session> run_scenario(const Scenario& scenario, std::shared_ptr<PlannerBackend> backend = nullptr);

}  // namespace vsandbox
