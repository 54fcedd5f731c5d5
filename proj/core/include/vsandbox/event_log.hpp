// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vsandbox {

/// One line of the session log: {"seq", "t_ms", "kind", "payload"}.
struct LogRecord {
    std::uint64_t seq = 0;
    std::int64_t t_ms = 0;  // session clock
    std::string kind;
    nlohmann::json payload = nlohmann::json::object();

    bool operator==(const LogRecord&) const = default;
};

nlohmann::json record_to_json(const LogRecord& record);
/// Throws CorruptLog.
LogRecord record_from_json(const nlohmann::json& j);

/// Append-only, seq starts at 1 and increases by one.
class EventLog {
public:
    const LogRecord& append(std::int64_t t_ms, std::string kind, nlohmann::json payload);
    const std::vector<LogRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    void write_jsonl(std::ostream& out) const;
    /// Throws CorruptLog on unparsable lines or non-increasing seq.
    static std::vector<LogRecord> read_jsonl(std::istream& in);

    bool operator==(const EventLog&) const = default;

private:
    std::vector<LogRecord> records_;
};

/// Copy of the records with every "t_ms" removed, for comparisons that
/// ignore timing.
nlohmann::json strip_timestamps(const std::vector<LogRecord>& records);

}  // namespace vsandbox
