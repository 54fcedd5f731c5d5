// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/event_log.hpp"

namespace vsandbox {

// Supervision time counts utterance entry (words x ms_per_word) plus every
// interval spent in AwaitingConfirmation or Teaching. Behavior complexity is
// primitive calls executed per accepted confirmation.

struct SegmentMetrics {
    std::string label;
    std::int64_t commands_spoken = 0;
    std::int64_t confirmed_commands = 0;
    std::int64_t primitive_calls = 0;
    std::int64_t skill_failures = 0;
    std::int64_t supervision_ms = 0;

    double behavior_complexity() const;
    bool operator==(const SegmentMetrics&) const = default;
};

/// One accepted confirmation and what its execution did.
struct CommandMetrics {
    std::string utterance_id;
    std::size_t segment = 0;
    std::int64_t primitive_calls = 0;
    bool failed = false;
    bool operator==(const CommandMetrics&) const = default;
};

struct CommitMetrics {
    std::string name;
    std::string kind;  // argument | function | dmp
    std::size_t commands_before = 0;  // accepted confirmations before this commit
    bool operator==(const CommitMetrics&) const = default;
};

struct TeachCounts {
    std::int64_t arguments = 0;
    std::int64_t functions = 0;
    std::int64_t dmp_skills = 0;
    bool operator==(const TeachCounts&) const = default;
};

struct SessionMetrics {
    std::int64_t supervision_ms = 0;
    std::int64_t commands_spoken = 0;
    std::int64_t confirmed_commands = 0;
    std::int64_t primitive_calls = 0;
    std::int64_t skill_failures = 0;
    TeachCounts teach_counts;
    std::vector<SegmentMetrics> segments;  // segment 0 precedes the first marker
    std::vector<CommandMetrics> commands;
    std::vector<CommitMetrics> commits;

    double supervision_time_s() const { return static_cast<double>(supervision_ms) / 1000.0; }
    double behavior_complexity() const;
    /// Complexity over the first `n` accepted commands.
    double complexity_after_commands(std::size_t n) const;
    bool operator==(const SessionMetrics&) const = default;
};

nlohmann::json metrics_to_json(const SessionMetrics& metrics);

/// Aggregates a session log from scratch. Throws CorruptLog.
SessionMetrics compute_metrics(const std::vector<LogRecord>& log);

}  // namespace vsandbox
