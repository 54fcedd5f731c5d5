// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/event_log.hpp"

#include <string>

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

nlohmann::json record_to_json(const LogRecord& r) {
    return {{"seq", r.seq}, {"t_ms", r.t_ms}, {"kind", r.kind}, {"payload", r.payload}};
}

LogRecord record_from_json(const nlohmann::json& j) {
    try {
        LogRecord r;
        r.seq = j.at("seq").get<std::uint64_t>();
        r.t_ms = j.at("t_ms").get<std::int64_t>();
        r.kind = j.at("kind").get<std::string>();
        r.payload = j.at("payload");
        if (!r.payload.is_object()) throw Error(ErrorCode::CorruptLog, "record payload must be an object");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptLog, std::string("bad log record: ") + e.what());
    }
}

const LogRecord& EventLog::append(std::int64_t t_ms, std::string kind, nlohmann::json payload) {
    records_.push_back({records_.size() + 1, t_ms, std::move(kind), std::move(payload)});
    return records_.back();
}

void EventLog::write_jsonl(std::ostream& out) const {
    for (const auto& r : records_) out << record_to_json(r).dump() << '\n';
}

std::vector<LogRecord> EventLog::read_jsonl(std::istream& in) {
    std::vector<LogRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::CorruptLog, fmt::format("line {}: {}", lineno, e.what()));
        }
        LogRecord r = record_from_json(j);
        if (!out.empty() && r.seq <= out.back().seq) {
            throw Error(ErrorCode::CorruptLog, fmt::format("line {}: seq {} does not increase", lineno, r.seq));
        }
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

void strip(nlohmann::json& j) {
    if (j.is_object()) {
        j.erase("t_ms");
        for (auto& [key, value] : j.items()) strip(value);
    } else if (j.is_array()) {
        for (auto& v : j) strip(v);
    }
}

}  // namespace

nlohmann::json strip_timestamps(const std::vector<LogRecord>& records) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json j = record_to_json(r);
        strip(j);
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace vsandbox
