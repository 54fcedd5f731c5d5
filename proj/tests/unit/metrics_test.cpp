// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"
#include "vsandbox/error.hpp"
#include "vsandbox/metrics.hpp"
#include "vsandbox/scenario.hpp"

using namespace vsandbox;
using nlohmann::json;
namespace vt = vsandbox::testing;

namespace {

struct LogBuilder {
    std::vector<LogRecord> records;

    LogBuilder& add(std::int64_t t, std::string kind, json payload = json::object()) {
        records.push_back({records.size() + 1, t, std::move(kind), std::move(payload)});
        return *this;
    }
    LogBuilder& mode(std::int64_t t, const std::string& from, const std::string& to) {
        return add(t, "mode", {{"from", from}, {"to", to}});
    }
    LogBuilder& utterance(std::int64_t t, std::int64_t entry_ms) { return add(t, "utterance", {{"entry_ms", entry_ms}}); }
    LogBuilder& command(std::int64_t t, const std::string& id, int calls, bool failed = false) {
        add(t, "confirm", {{"accept", true}});
        for (int i = 0; i < calls; ++i) add(t, "exec_step", {{"utterance_id", id}, {"step", i}});
        return add(t, "outcome", {{"utterance_id", id}, {"status", failed ? "failure" : "success"}});
    }
};

}  // namespace

TEST(Metrics, EmptyLogIsAllZero) {
    const auto m = compute_metrics({});
    EXPECT_EQ(m.supervision_ms, 0);
    EXPECT_EQ(m.behavior_complexity(), 0.0);
    EXPECT_EQ(m.complexity_after_commands(5), 0.0);
    EXPECT_TRUE(m.segments.empty());
}

TEST(Metrics, HandBuiltLog) {
    LogBuilder b;
    b.add(0, "session_start")
        .utterance(1000, 1200)
        .mode(1000, "Idle", "AwaitingConfirmation")
        .mode(2500, "AwaitingConfirmation", "Executing")
        .command(2500, "u1", 3)
        .mode(4000, "Executing", "Idle")
        .add(4000, "segment", {{"label", "bag 1"}})
        .utterance(5000, 2000)
        .mode(5000, "Idle", "Teaching")
        .mode(9000, "Teaching", "AwaitingConfirmation")
        .mode(9500, "AwaitingConfirmation", "Executing")
        .command(9500, "u2", 5, true)
        .add(9600, "teach_commit", {{"kind", "function"}, {"name", "pack"}})
        .mode(12000, "Executing", "Idle")
        .utterance(13000, 800)
        .add(13000, "confirm", {{"accept", false}});
    const auto m = compute_metrics(b.records);
    // Entry 1200 + 2000 + 800; awaiting 1500 + 500; teaching 4000.
    EXPECT_EQ(m.supervision_ms, 1200 + 2000 + 800 + 1500 + 500 + 4000);
    EXPECT_DOUBLE_EQ(m.supervision_time_s(), 10.0);
    EXPECT_EQ(m.commands_spoken, 3);
    EXPECT_EQ(m.confirmed_commands, 2);
    EXPECT_EQ(m.primitive_calls, 8);
    EXPECT_DOUBLE_EQ(m.behavior_complexity(), 4.0);
    EXPECT_DOUBLE_EQ(m.complexity_after_commands(1), 3.0);
    EXPECT_DOUBLE_EQ(m.complexity_after_commands(99), 4.0);
    EXPECT_EQ(m.skill_failures, 1);
    EXPECT_EQ(m.teach_counts.functions, 1);
    ASSERT_EQ(m.commits.size(), 1u);
    EXPECT_EQ(m.commits[0].commands_before, 2u);
    ASSERT_EQ(m.segments.size(), 2u);
    EXPECT_EQ(m.segments[0].primitive_calls, 3);
    EXPECT_EQ(m.segments[1].label, "bag 1");
    EXPECT_EQ(m.segments[1].skill_failures, 1);
    EXPECT_EQ(m.segments[1].supervision_ms, 2000 + 4000 + 500 + 800);
    ASSERT_EQ(m.commands.size(), 2u);
    EXPECT_EQ(m.commands[1].utterance_id, "u2");
    EXPECT_TRUE(m.commands[1].failed);
}

TEST(Metrics, CorruptLogs) {
    auto code = [](const std::vector<LogRecord>& log) {
        try {
            compute_metrics(log);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    LogBuilder back_in_time;
    back_in_time.add(10, "session_start").add(5, "utterance", {{"entry_ms", 0}});
    EXPECT_EQ(code(back_in_time.records), ErrorCode::CorruptLog);

    LogBuilder repeated;
    repeated.add(0, "session_start");
    repeated.records.push_back(repeated.records.back());
    EXPECT_EQ(code(repeated.records), ErrorCode::CorruptLog);

    LogBuilder orphan;
    orphan.add(0, "session_start").add(1, "exec_step", {{"utterance_id", "u1"}});
    EXPECT_EQ(code(orphan.records), ErrorCode::CorruptLog);

    LogBuilder wrong_mode;
    wrong_mode.add(0, "session_start").mode(1, "Teaching", "Idle");
    EXPECT_EQ(code(wrong_mode.records), ErrorCode::CorruptLog);

    LogBuilder missing_field;
    missing_field.add(0, "session_start").add(1, "utterance");
    EXPECT_EQ(code(missing_field.records), ErrorCode::CorruptLog);
}

TEST(Metrics, GiftBagComplexityRisesAfterPack) {
    const auto s = run_scenario(vt::bundled_scenario("gift_bag_4"));
    const auto& m = s->metrics();
    ASSERT_EQ(m.segments.size(), 5u);
    EXPECT_EQ(m.segments[0].commands_spoken, 0);
    const CommitMetrics* pack = nullptr;
    for (const auto& c : m.commits) {
        if (c.name == "pack") pack = &c;
    }
    ASSERT_NE(pack, nullptr);
    EXPECT_GT(m.behavior_complexity(), m.complexity_after_commands(pack->commands_before));
    EXPECT_EQ(m.teach_counts.functions, 1);
    EXPECT_EQ(m.teach_counts.arguments, 1);
}

TEST(Metrics, JsonShape) {
    const auto s = run_scenario(vt::bundled_scenario("gift_bag_4"));
    const json j = metrics_to_json(s->metrics());
    EXPECT_EQ(j.at("segments").size(), 5u);
    EXPECT_DOUBLE_EQ(j.at("behavior_complexity").get<double>(), s->metrics().behavior_complexity());
    EXPECT_EQ(j.at("teach_counts").at("functions"), 1);
}
