// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"
#include "vsandbox/error.hpp"
#include "vsandbox/gateway.hpp"
#include "vsandbox/scenario.hpp"

using namespace vsandbox;
using nlohmann::json;
namespace vt = vsandbox::testing;

namespace {

class GatewayTest : public ::testing::Test {
protected:
    void SetUp() override {
        GatewayConfig cfg;
        cfg.port = 0;
        cfg.scenario_dir = vt::scenario_dir();
        gateway = std::make_unique<Gateway>(cfg);
        port = gateway->start();
        client = std::make_unique<GatewayClient>("127.0.0.1", port);
    }
    void TearDown() override {
        client.reset();
        gateway->stop();
    }

    std::unique_ptr<Gateway> gateway;
    std::unique_ptr<GatewayClient> client;
    int port = 0;
};

}  // namespace

TEST(GatewayEvents, Shapes) {
    const LogRecord rec{3, 1500, "plan", {{"utterance_id", "u1"}}};
    const json e = gateway_event("s1", rec);
    EXPECT_EQ(e.at("type"), "record");
    EXPECT_EQ(e.at("session_id"), "s1");
    EXPECT_EQ(record_from_json(e.at("record")), rec);
    EXPECT_EQ(gateway_preview_event("s1", {{"mode", "Idle"}}).at("type"), "preview");
}

TEST(GatewayRoutes, EveryInputHasARoute) {
    const std::vector<std::pair<SessionInput, std::string>> cases{
        {UtteranceInput{"go home"}, "utterance"},
        {ConfirmInput{true}, "confirm"},
        {CancelInput{}, "cancel"},
        {KeypointInput{{1, 2}, ""}, "teach/keypoint"},
        {PoseInput{Pose::at(0.5, 0, 0.2)}, "teach/pose"},
        {DecompositionInput{"go home", {}}, "teach/decomposition"},
        {DemoBeginInput{}, "teach/demo/begin"},
        {DemoAppendInput{}, "teach/demo/append"},
        {DemoEndInput{}, "teach/demo/end"},
        {SegmentInput{"bag"}, "segment"},
        {InterruptInput{1}, "interrupt"}};
    for (const auto& [input, route] : cases) {
        const auto [path, body] = input_route(input);
        EXPECT_EQ(path, route);
        json typed = body;
        typed["type"] = input_type(input);
        EXPECT_EQ(input_from_json(typed), input) << route;
    }
}

TEST_F(GatewayTest, CreateListAndInspect) {
    const auto id = client->create_session({{"scenario", "gift_bag_4"}});
    const auto list = client->get("/sessions");
    EXPECT_EQ(list.status, 200);
    ASSERT_EQ(list.body.size(), 1u);
    const auto summary = client->get("/sessions/" + id);
    EXPECT_EQ(summary.status, 200);
    EXPECT_EQ(summary.body.at("mode"), "Idle");
    const auto log = client->get("/sessions/" + id + "/log");
    ASSERT_EQ(log.body.size(), 1u);
    EXPECT_EQ(log.body[0].at("kind"), "session_start");
    EXPECT_EQ(client->get("/sessions/" + id + "/metrics").status, 200);
    EXPECT_EQ(client->get("/sessions/" + id + "/preview").status, 200);
}

TEST_F(GatewayTest, StatusCodes) {
    EXPECT_EQ(client->get("/sessions/nope").status, 404);
    EXPECT_EQ(client->post("/sessions/nope/utterance", {{"text", "go home"}}).status, 404);
    EXPECT_EQ(client->post("/sessions", {{"scenario", "missing"}}).status, 404);
    EXPECT_EQ(client->post("/sessions", {{"scenario", "../etc/passwd"}}).status, 422);

    const auto id = client->create_session({{"scenario", "gift_bag_4"}});
    const auto conflict = client->post("/sessions/" + id + "/confirm", {{"accept", true}});
    EXPECT_EQ(conflict.status, 409);
    EXPECT_EQ(conflict.body.at("error").at("code"), "ModeViolation");
    EXPECT_EQ(client->post("/sessions/" + id + "/utterance", {{"words", 3}}).status, 422);
    EXPECT_EQ(client->post("/sessions/" + id + "/utterance", json::array()).status, 422);

    EXPECT_EQ(client->post("/sessions/" + id + "/utterance", {{"text", "pick up the toy car"}}).status, 200);
    const auto miss = client->post("/sessions/" + id + "/teach/keypoint", {{"keypoint", {60, 60}}});
    EXPECT_EQ(miss.status, 422);
    EXPECT_EQ(miss.body.at("error").at("code"), "NoObjectAtKeypoint");
}

TEST_F(GatewayTest, UtteranceReturnsPreview) {
    const auto id = client->create_session({{"scenario", "gift_bag_4"}});
    const auto res = client->post("/sessions/" + id + "/utterance", {{"text", "go home"}, {"after_ms", 1000}});
    ASSERT_EQ(res.status, 200);
    EXPECT_TRUE(res.body.at("accepted").get<bool>());
    EXPECT_EQ(res.body.at("state").at("mode"), "AwaitingConfirmation");
    ASSERT_TRUE(res.body.contains("preview"));
    EXPECT_EQ(res.body.at("preview").at("trajectories").size(), 1u);
    EXPECT_FALSE(res.body.at("records").empty());
    EXPECT_EQ(client->post("/sessions/" + id + "/confirm", {{"accept", true}}).status, 200);
    EXPECT_EQ(client->get("/sessions/" + id).body.at("mode"), "Idle");
}

TEST_F(GatewayTest, StreamIsOrderedAndGapFree) {
    const auto id = client->create_session({{"scenario", "gift_bag_4"}});
    for (const auto& text : {"go home", "grab the candy"}) {
        client->post("/sessions/" + id + "/utterance", {{"text", text}});
        client->post("/sessions/" + id + "/confirm", {{"accept", true}});
    }
    const auto log = client->get("/sessions/" + id + "/log").body;
    const auto last = log.back().at("seq").get<std::uint64_t>();
    const auto events = client->read_events(id, 1, [&](const json& e) {
        return e.at("type") == "record" && e.at("record").at("seq") == last;
    });
    std::uint64_t expect = 1;
    std::size_t previews = 0;
    for (const auto& e : events) {
        if (e.at("type") == "preview") {
            ++previews;
            continue;
        }
        EXPECT_EQ(e.at("record").at("seq").get<std::uint64_t>(), expect++);
    }
    EXPECT_EQ(expect, last + 1);
    EXPECT_EQ(previews, 2u);

    // Resuming from the middle starts exactly there.
    const auto tail = client->read_events(id, 5, [&](const json& e) {
        return e.at("type") == "record" && e.at("record").at("seq") == last;
    });
    ASSERT_FALSE(tail.empty());
    EXPECT_EQ(tail.front().at("record").at("seq"), 5);
}

TEST_F(GatewayTest, StreamDeliversLaterRecords) {
    const auto id = client->create_session({{"scenario", "gift_bag_4"}});
    std::thread driver([&] {
        GatewayClient other("127.0.0.1", port);
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        other.post("/sessions/" + id + "/utterance", {{"text", "go home"}});
    });
    const auto events = client->read_events(
        id, 1, [](const json& e) { return e.at("type") == "preview"; }, 5000);
    driver.join();
    ASSERT_FALSE(events.empty());
    EXPECT_EQ(events.back().at("type"), "preview");
}

TEST_F(GatewayTest, ScenarioOverHttpMatchesInProcess) {
    const auto sc = vt::bundled_scenario("teach_cancel");
    const auto id = client->create_session({{"scenario", "teach_cancel"}});
    for (const auto& ev : sc.events) client->submit(id, ev.input, ev.after_ms);
    const auto remote = client->get("/sessions/" + id + "/log").body;
    std::vector<LogRecord> records;
    for (const auto& r : remote) records.push_back(record_from_json(r));
    EXPECT_EQ(records, run_scenario(sc)->log());
}

TEST_F(GatewayTest, InlineConfigAndSeed) {
    const auto cfg = config_to_json(vt::bundled_scenario("gift_bag_4").config);
    const auto res = client->post("/sessions", {{"config", cfg}, {"seed", 9}});
    ASSERT_EQ(res.status, 201);
    const auto log = client->get("/sessions/" + res.body.at("id").get<std::string>() + "/log").body;
    EXPECT_EQ(log[0].at("payload").at("config").at("seed"), 9);
}

TEST(GatewayBind, PortInUse) {
    GatewayConfig cfg;
    cfg.port = 0;
    Gateway a(cfg);
    const int port = a.start();
    cfg.port = port;
    Gateway b(cfg);
    try {
        b.bind();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BindFailure);
    }
    a.stop();
}

TEST(GatewayClient, UnreachableServer) {
    GatewayClient c("127.0.0.1", 9);
    EXPECT_THROW(c.get("/sessions"), Error);
}
