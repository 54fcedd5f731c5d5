// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "vsandbox/api.hpp"
#include "vsandbox/planner.hpp"

namespace vsandbox {

/// Chat-completion backend settings. `from_env` reads GATEWAY_LM_URL,
/// GATEWAY_LM_MODEL, and GATEWAY_LM_KEY.
struct LlmConfig {
    std::string url;
    std::string model = "gpt-3.5-turbo-1106";
    std::string api_key;
    double temperature = 0.2;
    std::size_t history_token_budget = 2048;
    int timeout_ms = 10000;
    int retries_on_malformed = 1;

    static LlmConfig from_env();
};

/// Tool entry for one function: {"type": "function", "function": {name,
/// description, parameters}} with literal enums drawn from the API.
nlohmann::json tool_schema(const FunctionSpec& fn, const ApiSpec& api);

/// System text sent ahead of the conversation; embeds render_prompt(api).
std::string system_prompt(const ApiSpec& api);

/// Rough token estimate (four characters per token).
std::size_t estimate_tokens(const std::string& text);

/// Chat-completion request. History is replayed newest-first until the
/// token budget is spent; the API rendering is never truncated.
nlohmann::json llm_wire_encode(const Utterance& u, const ApiSpec& api, const InteractionHistory& history,
                               const LlmConfig& config);

/// Tool calls become plan text in call order; a reply without tool calls is a
/// refusal carrying the assistant text. Throws MalformedResponse.
Proposal llm_wire_decode(const nlohmann::json& response, const ApiSpec& api);

/// "I am not sure how to pack; ..." -> "pack". Empty when no verb is named.
std::string verb_from_refusal(const std::string& message);

}  // namespace vsandbox
