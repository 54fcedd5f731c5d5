// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/event_log.hpp"
#include "vsandbox/session.hpp"

// HTTP boundary for the operator console. Commands are JSON request/response;
// each session's log and previews are pushed on a server-sent event stream at
// /sessions/{id}/events.
//
//   POST /sessions                        {"scenario": name} | {"config": {...}}, optional "seed"
//   GET  /sessions
//   GET  /sessions/{id}                   state summary
//   POST /sessions/{id}/utterance         {"text"}
//   POST /sessions/{id}/confirm           {"accept"}
//   POST /sessions/{id}/cancel
//   POST /sessions/{id}/teach/keypoint    {"keypoint": [u, v], "name"}
//   POST /sessions/{id}/teach/pose        {"pose"}
//   POST /sessions/{id}/teach/decomposition {"text", "annotations"}
//   POST /sessions/{id}/teach/demo/begin|append|end  {"poses"} for append
//   POST /sessions/{id}/segment           {"label"}
//   POST /sessions/{id}/interrupt         {"at_step"} arms; {"live": true} stops the running program
//   GET  /sessions/{id}/preview | metrics | log | events
//
// Command bodies may carry "after_ms" (operator delay since the previous
// input) or "t_ms" (absolute session time). Status codes: 404 unknown
// session, 409 input does not fit the session mode, 422 malformed or unusable
// input.

namespace vsandbox {

struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path scenario_dir = "scenarios";
    BackendFactory backends;  // default: make_backend
};

/// Stream payload: a log record or a preview snapshot, tagged with its session.
nlohmann::json gateway_event(const std::string& session_id, const LogRecord& record);
nlohmann::json gateway_preview_event(const std::string& session_id, const nlohmann::json& preview);

/// Route suffix (after /sessions/{id}/) and request body for an input.
std::pair<std::string, nlohmann::json> input_route(const SessionInput& input);

class Gateway {
public:
    explicit Gateway(GatewayConfig config);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds the listening socket and returns the port. Throws BindFailure.
    int bind();
    /// Serves on the calling thread until stop().
    void listen();
    /// bind() + listen() on a background thread.
    int start();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct GatewayResponse {
    int status = 0;
    nlohmann::json body;
};

/// Minimal blocking client for scripts and tests.
class GatewayClient {
public:
    GatewayClient(const std::string& host, int port);
    ~GatewayClient();

    /// Throws IoError when the server cannot be reached.
    GatewayResponse post(const std::string& path, const nlohmann::json& body);
    GatewayResponse get(const std::string& path);

    std::string create_session(const nlohmann::json& body);
    GatewayResponse submit(const std::string& session_id, const SessionInput& input, std::int64_t after_ms);

    /// Reads the event stream from `from_seq` until `until` returns true for a
    /// received event or the timeout passes. Returns the events received.
    std::vector<nlohmann::json> read_events(const std::string& session_id, std::uint64_t from_seq,
                                            const std::function<bool(const nlohmann::json&)>& until,
                                            int timeout_ms = 5000);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vsandbox
