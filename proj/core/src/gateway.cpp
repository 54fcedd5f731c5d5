// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "vsandbox/error.hpp"
#include "vsandbox/http_backend.hpp"
#include "vsandbox/metrics.hpp"
#include "vsandbox/scenario.hpp"

namespace vsandbox {

nlohmann::json gateway_event(const std::string& session_id, const LogRecord& record) {
    return {{"session_id", session_id}, {"type", "record"}, {"record", record_to_json(record)}};
}

nlohmann::json gateway_preview_event(const std::string& session_id, const nlohmann::json& preview) {
    return {{"session_id", session_id}, {"type", "preview"}, {"preview", preview}};
}

std::pair<std::string, nlohmann::json> input_route(const SessionInput& input) {
    nlohmann::json body = input_to_json(input);
    const std::string type = body.at("type").get<std::string>();
    body.erase("type");
    if (type == "keypoint" || type == "pose" || type == "decomposition") return {"teach/" + type, body};
    if (type == "demo_begin") return {"teach/demo/begin", body};
    if (type == "demo_append") return {"teach/demo/append", body};
    if (type == "demo_end") return {"teach/demo/end", body};
    return {type, body};
}

namespace {

const std::map<std::string, std::string>& route_types() {
    static const std::map<std::string, std::string> types{
        {"utterance", "utterance"},         {"confirm", "confirm"},
        {"cancel", "cancel"},               {"teach/keypoint", "keypoint"},
        {"teach/pose", "pose"},             {"teach/decomposition", "decomposition"},
        {"teach/demo/begin", "demo_begin"}, {"teach/demo/append", "demo_append"},
        {"teach/demo/end", "demo_end"},     {"segment", "segment"},
        {"interrupt", "interrupt"}};
    return types;
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ModeViolation: return 409;
        case ErrorCode::IoError: return 404;
        default: return 422;
    }
}

nlohmann::json error_body(const std::string& code, const std::string& message) {
    return {{"error", {{"code", code}, {"message", message}}}};
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::string sse_frame(const nlohmann::json& event) {
    if (event.at("type") == "record") {
        return fmt::format("event: record\nid: {}\ndata: {}\n\n", event["record"]["seq"].get<std::uint64_t>(),
                           event.dump());
    }
    return fmt::format("event: preview\ndata: {}\n\n", event.dump());
}

}  // namespace

struct Gateway::Impl {
    struct Entry {
        std::string id;
        std::string scenario;
        std::mutex command;  // serializes inputs into the session
        std::unique_ptr<Session> session;

        std::mutex stream;
        std::condition_variable changed;
        std::vector<nlohmann::json> events;
        std::vector<std::size_t> record_index;  // seq - 1 -> position in events
        std::size_t published = 0;              // log records already in events

        // Caller holds `command`.
        void publish(bool with_preview) {
            std::lock_guard lock(stream);
            const auto& log = session->log();
            for (; published < log.size(); ++published) {
                record_index.push_back(events.size());
                events.push_back(gateway_event(id, log[published]));
            }
            if (with_preview) events.push_back(gateway_preview_event(id, session->preview_payload()));
            changed.notify_all();
        }
    };

    GatewayConfig config;
    httplib::Server server;
    std::thread thread;
    int bound_port = -1;
    bool stopping = false;

    std::mutex sessions_mutex;
    std::map<std::string, std::shared_ptr<Entry>> sessions;
    std::uint64_t next_id = 1;

    explicit Impl(GatewayConfig c) : config(std::move(c)) {
        if (!config.backends) config.backends = make_backend;
        // httplib defaults to SO_REUSEPORT, which lets a second gateway share the port.
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        routes();
    }

    std::shared_ptr<Entry> find(const std::string& id) {
        std::lock_guard lock(sessions_mutex);
        auto it = sessions.find(id);
        return it == sessions.end() ? nullptr : it->second;
    }

    void create(const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
        SessionConfig config_in;
        std::string scenario;
        if (body.contains("scenario")) {
            scenario = body["scenario"].get<std::string>();
            if (scenario.find('/') != std::string::npos || scenario.find("..") != std::string::npos) {
                throw Error(ErrorCode::InvalidArgument, "scenario must be a bare name");
            }
            config_in = load_scenario(config.scenario_dir / (scenario + ".json")).config;
        } else {
            config_in = config_from_json(body.value("config", nlohmann::json::object()));
        }
        if (body.contains("seed")) config_in.seed = body["seed"].get<std::uint64_t>();
        if (body.contains("backend")) config_in.backend = body["backend"].get<std::string>();

        auto entry = std::make_shared<Entry>();
        entry->scenario = scenario;
        entry->session = std::make_unique<Session>(config_in, config.backends(config_in));
        {
            std::lock_guard lock(sessions_mutex);
            entry->id = fmt::format("s{}", next_id++);
            sessions[entry->id] = entry;
        }
        std::lock_guard lock(entry->command);
        entry->publish(false);
        send_json(res, 201, {{"id", entry->id}, {"state", state_summary(entry->session->state())}});
    }

    void command(const std::shared_ptr<Entry>& entry, const std::string& route, const httplib::Request& req,
                 httplib::Response& res) {
        nlohmann::json body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
        if (!body.is_object()) throw Error(ErrorCode::MalformedDocument, "request body must be an object");
        if (route == "interrupt" && body.value("live", false)) {
            // Deliberately outside the command lock: the program it stops holds it.
            entry->session->request_interrupt();
            send_json(res, 202, {{"accepted", true}});
            return;
        }
        std::optional<std::int64_t> after_ms;
        std::optional<std::int64_t> t_ms;
        if (body.contains("after_ms")) after_ms = body["after_ms"].get<std::int64_t>();
        if (body.contains("t_ms")) t_ms = body["t_ms"].get<std::int64_t>();
        body.erase("after_ms");
        body.erase("t_ms");
        body["type"] = route_types().at(route);
        const SessionInput input = input_from_json(body);

        std::lock_guard lock(entry->command);
        Session& s = *entry->session;
        const SubmitResult r = t_ms ? s.submit(input, *t_ms) : s.submit_after(input, after_ms.value_or(0));
        const bool awaiting = s.state().mode == Mode::AwaitingConfirmation;
        entry->publish(r.accepted && awaiting);

        nlohmann::json out{{"accepted", r.accepted}, {"state", state_summary(s.state())}, {"records", nlohmann::json::array()}};
        for (std::uint64_t seq = r.first_seq; seq <= r.last_seq; ++seq) out["records"].push_back(record_to_json(s.log()[seq - 1]));
        if (awaiting) out["preview"] = s.preview_payload();
        int status = 200;
        if (!r.accepted) {
            status = 409;
            out.update(error_body(std::string(to_string(ErrorCode::ModeViolation)), r.reason));
        } else if (!r.error.empty()) {
            status = 422;
            out.update(error_body(r.error, s.state().prompt));
        }
        send_json(res, status, out);
    }

    void stream(const std::shared_ptr<Entry>& entry, const httplib::Request& req, httplib::Response& res) {
        std::uint64_t from = 1;
        if (req.has_param("from")) from = std::stoull(req.get_param_value("from"));
        if (req.has_header("Last-Event-ID")) from = std::stoull(req.get_header_value("Last-Event-ID")) + 1;
        std::size_t cursor;
        {
            std::lock_guard lock(entry->stream);
            cursor = from == 0 || from > entry->record_index.size() ? entry->events.size()
                                                                     : entry->record_index[from - 1];
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, entry, cursor](std::size_t, httplib::DataSink& sink) mutable {
            std::vector<std::string> frames;
            {
                std::unique_lock lock(entry->stream);
                entry->changed.wait_for(lock, std::chrono::milliseconds(200),
                                        [&] { return stopping || cursor < entry->events.size(); });
                if (stopping) {
                    sink.done();
                    return true;
                }
                for (; cursor < entry->events.size(); ++cursor) frames.push_back(sse_frame(entry->events[cursor]));
            }
            if (frames.empty()) return sink.write(": keepalive\n\n", 13);
            for (const auto& f : frames) {
                if (!sink.write(f.data(), f.size())) return false;
            }
            return true;
        });
    }

    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_json(res, status_for(e.code()), error_body(std::string(to_string(e.code())), e.what()));
            } catch (const nlohmann::json::exception& e) {
                send_json(res, 422, error_body(std::string(to_string(ErrorCode::MalformedDocument)), e.what()));
            } catch (const std::exception& e) {
                send_json(res, 500, error_body("Internal", e.what()));
            }
        };
    }

    template <typename F>
    httplib::Server::Handler with_session(F f) {
        return guarded([this, f](const httplib::Request& req, httplib::Response& res) {
            auto entry = find(req.matches[1]);
            if (!entry) {
                send_json(res, 404, error_body("UnknownSession", "no session " + std::string(req.matches[1])));
                return;
            }
            f(entry, req, res);
        });
    }

    void routes() {
        server.Post("/sessions", guarded([this](const auto& req, auto& res) { create(req, res); }));
        server.Get("/sessions", guarded([this](const auto&, auto& res) {
            nlohmann::json list = nlohmann::json::array();
            std::lock_guard lock(sessions_mutex);
            for (const auto& [id, e] : sessions) {
                std::lock_guard cmd(e->command);
                list.push_back({{"id", id}, {"scenario", e->scenario}, {"mode", mode_name(e->session->state().mode)}});
            }
            send_json(res, 200, {{"sessions", list}});
        }));
        server.Get(R"(/sessions/([^/]+))", with_session([](auto e, const auto&, auto& res) {
            std::lock_guard lock(e->command);
            send_json(res, 200, state_summary(e->session->state()));
        }));
        server.Get(R"(/sessions/([^/]+)/preview)", with_session([](auto e, const auto&, auto& res) {
            std::lock_guard lock(e->command);
            send_json(res, 200, e->session->preview_payload());
        }));
        server.Get(R"(/sessions/([^/]+)/metrics)", with_session([](auto e, const auto&, auto& res) {
            std::lock_guard lock(e->command);
            send_json(res, 200, metrics_to_json(e->session->metrics()));
        }));
        server.Get(R"(/sessions/([^/]+)/log)", with_session([](auto e, const auto&, auto& res) {
            std::lock_guard lock(e->command);
            nlohmann::json records = nlohmann::json::array();
            for (const auto& r : e->session->log()) records.push_back(record_to_json(r));
            send_json(res, 200, records);
        }));
        server.Get(R"(/sessions/([^/]+)/events)",
                   with_session([this](auto e, const auto& req, auto& res) { stream(e, req, res); }));
        server.Post(R"(/sessions/([^/]+)/(utterance|confirm|cancel|segment|interrupt|teach/keypoint|teach/pose|teach/decomposition|teach/demo/begin|teach/demo/append|teach/demo/end))",
                    with_session([this](auto e, const auto& req, auto& res) { command(e, req.matches[2], req, res); }));
    }
};

Gateway::Gateway(GatewayConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Gateway::~Gateway() { stop(); }

int Gateway::bind() {
    const auto& c = impl_->config;
    int port = c.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(c.host);
    } else if (!impl_->server.bind_to_port(c.host, port)) {
        port = -1;
    }
    if (port < 0) throw Error(ErrorCode::BindFailure, fmt::format("cannot bind {}:{}", c.host, c.port));
    impl_->bound_port = port;
    return port;
}

void Gateway::listen() { impl_->server.listen_after_bind(); }

int Gateway::start() {
    const int port = bind();
    impl_->thread = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
    return port;
}

void Gateway::stop() {
    {
        std::lock_guard lock(impl_->sessions_mutex);
        for (auto& [id, e] : impl_->sessions) {
            std::lock_guard s(e->stream);
            impl_->stopping = true;
            e->changed.notify_all();
        }
        impl_->stopping = true;
    }
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int Gateway::port() const { return impl_->bound_port; }

// ---- client ----------------------------------------------------------------

struct GatewayClient::Impl {
    std::string host;
    int port;
    httplib::Client http;
    Impl(std::string h, int p) : host(std::move(h)), port(p), http(host, port) { http.set_keep_alive(true); }
};

GatewayClient::GatewayClient(const std::string& host, int port) : impl_(std::make_unique<Impl>(host, port)) {}

GatewayClient::~GatewayClient() = default;

namespace {

GatewayResponse to_response(const httplib::Result& res, const std::string& path) {
    if (!res) throw Error(ErrorCode::IoError, fmt::format("{}: {}", path, httplib::to_string(res.error())));
    GatewayResponse out{res->status, nlohmann::json()};
    if (!res->body.empty()) out.body = nlohmann::json::parse(res->body, nullptr, false);
    return out;
}

}  // namespace

GatewayResponse GatewayClient::post(const std::string& path, const nlohmann::json& body) {
    return to_response(impl_->http.Post(path, body.dump(), "application/json"), path);
}

GatewayResponse GatewayClient::get(const std::string& path) { return to_response(impl_->http.Get(path), path); }

std::string GatewayClient::create_session(const nlohmann::json& body) {
    auto res = post("/sessions", body);
    if (res.status != 201) throw Error(ErrorCode::InvalidArgument, "create session failed: " + res.body.dump());
    return res.body.at("id").get<std::string>();
}

GatewayResponse GatewayClient::submit(const std::string& session_id, const SessionInput& input, std::int64_t after_ms) {
    auto [route, body] = input_route(input);
    body["after_ms"] = after_ms;
    return post(fmt::format("/sessions/{}/{}", session_id, route), body);
}

std::vector<nlohmann::json> GatewayClient::read_events(const std::string& session_id, std::uint64_t from_seq,
                                                       const std::function<bool(const nlohmann::json&)>& until,
                                                       int timeout_ms) {
    // A separate connection: the stream occupies it until we hang up.
    httplib::Client http(impl_->host, impl_->port);
    http.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    std::vector<nlohmann::json> events;
    std::string buffer;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    http.Get(fmt::format("/sessions/{}/events?from={}", session_id, from_seq),
             [&](const char* data, std::size_t n) {
                 buffer.append(data, n);
                 for (auto end = buffer.find("\n\n"); end != std::string::npos; end = buffer.find("\n\n")) {
                     const std::string frame = buffer.substr(0, end);
                     buffer.erase(0, end + 2);
                     const auto pos = frame.find("data: ");
                     if (pos == std::string::npos) continue;
                     events.push_back(nlohmann::json::parse(frame.substr(pos + 6, frame.find('\n', pos) - pos - 6)));
                     if (until(events.back())) {
                         return false;
                     }
                 }
                 return std::chrono::steady_clock::now() < deadline;
             });
    return events;
}

}  // namespace vsandbox
