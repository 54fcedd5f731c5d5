// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>

#include "vsandbox/llm_wire.hpp"
#include "vsandbox/planner.hpp"
#include "vsandbox/session.hpp"

namespace vsandbox {

/// Chat-completion planner over HTTP(S). With a fallback set, an unreachable
/// endpoint switches the backend into degraded mode and the fallback answers.
class HttpLlmBackend final : public PlannerBackend {
public:
    explicit HttpLlmBackend(LlmConfig config, std::shared_ptr<PlannerBackend> fallback = nullptr);
    ~HttpLlmBackend() override;

    BackendKind kind() const override { return BackendKind::external; }
    /// Retries once on MalformedResponse. Throws BackendUnavailable when the
    /// endpoint fails and no fallback is set.
    Proposal propose(const Utterance& u, const ApiSpec& api, const InteractionHistory& history) override;
    std::string describe_function(const std::string& verb, const std::vector<Parameter>& params,
                                  const std::vector<Invocation>& body) override;
    void cancel() override;

    bool degraded() const { return degraded_; }
    const LlmConfig& config() const { return config_; }

private:
    nlohmann::json post(const nlohmann::json& request);

    struct Client;
    LlmConfig config_;
    std::shared_ptr<PlannerBackend> fallback_;
    std::unique_ptr<Client> client_;
    std::mutex mutex_;
    std::atomic<bool> cancelled_{false};
    std::atomic<bool> degraded_{false};
};

/// Backend factory covering "det" and "llm"; the latter reads its endpoint
/// from the environment and falls back to the deterministic backend.
std::shared_ptr<PlannerBackend> make_backend(const SessionConfig& config);

}  // namespace vsandbox
