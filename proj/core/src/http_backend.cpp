// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/http_backend.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

namespace {

// "https://host:port/v1/chat/completions" -> ("https://host:port", "/v1/chat/completions")
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path), url.substr(path)};
}

}  // namespace

struct HttpLlmBackend::Client {
    httplib::Client http;
    std::string path;
    Client(const std::string& base, std::string p) : http(base), path(std::move(p)) {}
};

HttpLlmBackend::HttpLlmBackend(LlmConfig config, std::shared_ptr<PlannerBackend> fallback)
    : config_(std::move(config)), fallback_(std::move(fallback)) {
    if (config_.url.empty()) {
        if (fallback_ == nullptr) throw Error(ErrorCode::BackendUnavailable, "GATEWAY_LM_URL is not set");
        degraded_ = true;
        return;
    }
    auto [base, path] = split_url(config_.url);
    client_ = std::make_unique<Client>(base, path);
    const auto secs = config_.timeout_ms / 1000;
    const auto usecs = (config_.timeout_ms % 1000) * 1000;
    client_->http.set_connection_timeout(secs, usecs);
    client_->http.set_read_timeout(secs, usecs);
    client_->http.set_write_timeout(secs, usecs);
    if (!config_.api_key.empty()) client_->http.set_bearer_token_auth(config_.api_key);
}

HttpLlmBackend::~HttpLlmBackend() = default;

nlohmann::json HttpLlmBackend::post(const nlohmann::json& request) {
    if (client_ == nullptr) throw Error(ErrorCode::BackendUnavailable, "no endpoint configured");
    auto res = client_->http.Post(client_->path, request.dump(), "application/json");
    if (cancelled_) throw Error(ErrorCode::BackendUnavailable, "request cancelled");
    if (!res) throw Error(ErrorCode::BackendUnavailable, "endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::BackendUnavailable, fmt::format("endpoint returned {}", res->status));
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
    }
}

Proposal HttpLlmBackend::propose(const Utterance& u, const ApiSpec& api, const InteractionHistory& history) {
    std::lock_guard lock(mutex_);
    cancelled_ = false;
    if (degraded_ && fallback_) return fallback_->propose(u, api, history);
    const auto request = llm_wire_encode(u, api, history, config_);
    for (int attempt = 0;; ++attempt) {
        try {
            auto proposal = llm_wire_decode(post(request), api);
            degraded_ = false;
            return proposal;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MalformedResponse && attempt < config_.retries_on_malformed) continue;
            if (e.code() == ErrorCode::BackendUnavailable && fallback_ && !cancelled_) {
                degraded_ = true;
                return fallback_->propose(u, api, history);
            }
            throw;
        }
    }
}

std::string HttpLlmBackend::describe_function(const std::string& verb, const std::vector<Parameter>& params,
                                              const std::vector<Invocation>& body) {
    // Docstrings must be reproducible on replay, so they never go to the network.
    if (fallback_) return fallback_->describe_function(verb, params, body);
    return DeterministicBackend{}.describe_function(verb, params, body);
}

void HttpLlmBackend::cancel() {
    cancelled_ = true;
    if (client_) client_->http.stop();
}

std::shared_ptr<PlannerBackend> make_backend(const SessionConfig& config) {
    if (config.backend == "llm") {
        SessionConfig det = config;
        det.backend = "det";
        return std::make_shared<HttpLlmBackend>(LlmConfig::from_env(), make_default_backend(det));
    }
    return make_default_backend(config);
}

}  // namespace vsandbox
