// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/metrics.hpp"

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double SegmentMetrics::behavior_complexity() const { return ratio(primitive_calls, confirmed_commands); }

double SessionMetrics::behavior_complexity() const { return ratio(primitive_calls, confirmed_commands); }

double SessionMetrics::complexity_after_commands(std::size_t n) const {
    std::int64_t calls = 0;
    const std::size_t upto = std::min(n, commands.size());
    for (std::size_t i = 0; i < upto; ++i) calls += commands[i].primitive_calls;
    return ratio(calls, static_cast<std::int64_t>(upto));
}

nlohmann::json metrics_to_json(const SessionMetrics& m) {
    nlohmann::json segments = nlohmann::json::array();
    for (const auto& s : m.segments) {
        segments.push_back({{"label", s.label},
                            {"commands_spoken", s.commands_spoken},
                            {"confirmed_commands", s.confirmed_commands},
                            {"primitive_calls", s.primitive_calls},
                            {"behavior_complexity", s.behavior_complexity()},
                            {"skill_failures", s.skill_failures},
                            {"supervision_time_s", static_cast<double>(s.supervision_ms) / 1000.0}});
    }
    nlohmann::json commands = nlohmann::json::array();
    for (const auto& c : m.commands) {
        commands.push_back({{"utterance_id", c.utterance_id},
                            {"segment", c.segment},
                            {"primitive_calls", c.primitive_calls},
                            {"failed", c.failed}});
    }
    nlohmann::json commits = nlohmann::json::array();
    for (const auto& c : m.commits) {
        commits.push_back({{"name", c.name}, {"kind", c.kind}, {"commands_before", c.commands_before}});
    }
    return {{"supervision_time_s", m.supervision_time_s()},
            {"commands_spoken", m.commands_spoken},
            {"confirmed_commands", m.confirmed_commands},
            {"primitive_calls", m.primitive_calls},
            {"behavior_complexity", m.behavior_complexity()},
            {"skill_failures", m.skill_failures},
            {"teach_counts",
             {{"arguments", m.teach_counts.arguments},
              {"functions", m.teach_counts.functions},
              {"dmp_skills", m.teach_counts.dmp_skills}}},
            {"segments", segments},
            {"commands", commands},
            {"commits", commits}};
}

SessionMetrics compute_metrics(const std::vector<LogRecord>& log) {
    SessionMetrics m;
    if (log.empty()) return m;
    m.segments.push_back(SegmentMetrics{});
    std::string mode = "Idle";
    std::int64_t mode_since = 0;
    std::uint64_t last_seq = 0;
    std::int64_t last_t = 0;
    auto seg = [&]() -> SegmentMetrics& { return m.segments.back(); };
    try {
        for (const auto& r : log) {
            if (r.seq <= last_seq) throw Error(ErrorCode::CorruptLog, fmt::format("seq {} does not increase", r.seq));
            if (r.t_ms < last_t) throw Error(ErrorCode::CorruptLog, fmt::format("record {} goes back in time", r.seq));
            last_seq = r.seq;
            last_t = r.t_ms;
            const auto& p = r.payload;
            if (r.kind == "utterance") {
                const auto entry = p.at("entry_ms").get<std::int64_t>();
                if (entry < 0) throw Error(ErrorCode::CorruptLog, "negative utterance entry time");
                m.commands_spoken += 1;
                seg().commands_spoken += 1;
                m.supervision_ms += entry;
                seg().supervision_ms += entry;
            } else if (r.kind == "mode") {
                if (p.at("from").get<std::string>() != mode) {
                    throw Error(ErrorCode::CorruptLog, fmt::format("record {} leaves a mode the session was not in", r.seq));
                }
                if (mode == "AwaitingConfirmation" || mode == "Teaching") {
                    m.supervision_ms += r.t_ms - mode_since;
                    seg().supervision_ms += r.t_ms - mode_since;
                }
                mode = p.at("to").get<std::string>();
                mode_since = r.t_ms;
            } else if (r.kind == "segment") {
                m.segments.push_back(SegmentMetrics{p.at("label").get<std::string>()});
            } else if (r.kind == "confirm") {
                if (p.at("accept").get<bool>()) {
                    m.confirmed_commands += 1;
                    seg().confirmed_commands += 1;
                    m.commands.push_back({"", m.segments.size() - 1, 0, false});
                }
            } else if (r.kind == "exec_step") {
                if (m.commands.empty()) throw Error(ErrorCode::CorruptLog, "exec_step before any confirmation");
                m.primitive_calls += 1;
                seg().primitive_calls += 1;
                m.commands.back().primitive_calls += 1;
                m.commands.back().utterance_id = p.at("utterance_id").get<std::string>();
            } else if (r.kind == "outcome") {
                if (m.commands.empty()) throw Error(ErrorCode::CorruptLog, "outcome before any confirmation");
                m.commands.back().utterance_id = p.at("utterance_id").get<std::string>();
                if (p.at("status").get<std::string>() == "failure") {
                    m.skill_failures += 1;
                    seg().skill_failures += 1;
                    m.commands.back().failed = true;
                }
            } else if (r.kind == "teach_commit") {
                const auto kind = p.at("kind").get<std::string>();
                if (kind == "grounding") continue;
                if (kind == "argument") m.teach_counts.arguments += 1;
                else if (kind == "function") m.teach_counts.functions += 1;
                else if (kind == "dmp") m.teach_counts.dmp_skills += 1;
                else throw Error(ErrorCode::CorruptLog, "unknown teach kind " + kind);
                m.commits.push_back({p.at("name").get<std::string>(), kind, m.commands.size()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptLog, std::string("malformed record: ") + e.what());
    }
    return m;
}

}  // namespace vsandbox
