// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/llm_wire.hpp"

#include <cstdlib>
#include <regex>

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

LlmConfig LlmConfig::from_env() {
    LlmConfig cfg;
    if (const char* url = std::getenv("GATEWAY_LM_URL")) cfg.url = url;
    if (const char* model = std::getenv("GATEWAY_LM_MODEL")) cfg.model = model;
    if (const char* key = std::getenv("GATEWAY_LM_KEY")) cfg.api_key = key;
    return cfg;
}

nlohmann::json tool_schema(const FunctionSpec& fn, const ApiSpec& api) {
    nlohmann::json properties = nlohmann::json::object();
    nlohmann::json required = nlohmann::json::array();
    for (std::size_t i = 0; i < fn.params.size(); ++i) {
        const auto& p = fn.params[i];
        nlohmann::json names = nlohmann::json::array();
        bool wants_count = false;
        for (const auto& t : p.type.alternatives) {
            if (t == kCountType) {
                wants_count = true;
                continue;
            }
            for (const auto* lit : api.literals_of(t)) names.push_back(lit->canonical_name);
        }
        nlohmann::json schema;
        if (names.empty() && wants_count) {
            schema = {{"type", "integer"}};
        } else if (wants_count) {
            schema = {{"type", nlohmann::json::array({"string", "integer"})}, {"enum", names}};
        } else {
            schema = {{"type", "string"}, {"enum", names}};
        }
        schema["description"] = p.type.to_string();
        properties[p.name] = std::move(schema);
        if (i < fn.required_arity()) required.push_back(p.name);
    }
    return {{"type", "function"},
            {"function",
             {{"name", fn.name},
              {"description", fn.docstring},
              {"parameters", {{"type", "object"}, {"properties", properties}, {"required", required}}}}}};
}

std::string system_prompt(const ApiSpec& api) {
    return "You control a robot arm by calling the functions of the API below, in order. "
           "Respond only with tool calls. If the request needs a behavior the API does not have, "
           "do not call any tool; reply \"I am not sure how to <verb>; could you teach me?\".\n\n" +
           render_prompt(api);
}

std::size_t estimate_tokens(const std::string& text) { return (text.size() + 3) / 4; }

namespace {

std::string outcome_reply(const HistoryEntry& e) {
    if (const auto* ok = std::get_if<PlanOk>(&e.outcome)) return pretty_print(ok->plan);
    if (const auto* tf = std::get_if<TeachFunction>(&e.outcome)) return tf->message;
    if (const auto* ta = std::get_if<TeachArgument>(&e.outcome)) {
        return fmt::format("I don't know what \"{}\" is yet.", ta->surface_text);
    }
    return std::get<Malformed>(e.outcome).reason;
}

}  // namespace

nlohmann::json llm_wire_encode(const Utterance& u, const ApiSpec& api, const InteractionHistory& history,
                               const LlmConfig& config) {
    const std::string system = system_prompt(api);
    std::size_t used = estimate_tokens(system) + estimate_tokens(u.text);

    std::vector<nlohmann::json> replay;  // newest first
    const auto& entries = history.entries();
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        const std::string reply = outcome_reply(*it);
        const std::size_t cost = estimate_tokens(it->utterance.text) + estimate_tokens(reply);
        if (used + cost > config.history_token_budget) break;
        used += cost;
        replay.push_back({{"role", "assistant"}, {"content", reply}});
        replay.push_back({{"role", "user"}, {"content", it->utterance.text}});
    }

    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"}, {"content", system}});
    for (auto it = replay.rbegin(); it != replay.rend(); ++it) messages.push_back(*it);
    messages.push_back({{"role", "user"}, {"content", u.text}});

    nlohmann::json tools = nlohmann::json::array();
    for (const auto& fn : api.functions()) tools.push_back(tool_schema(fn, api));

    return {{"model", config.model},
            {"temperature", config.temperature},
            {"messages", messages},
            {"tools", tools},
            {"tool_choice", "auto"}};
}

std::string verb_from_refusal(const std::string& message) {
    static const std::regex kHowTo(R"(how to ([A-Za-z_]+(?: (?:in|out|up|down|off|back)\b)?))",
                                   std::regex::icase);
    std::smatch m;
    if (std::regex_search(message, m, kHowTo)) return m[1].str();
    return {};
}

namespace {

std::string argument_text(const nlohmann::json& value, const Parameter& param, const ApiSpec& api) {
    if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
    if (!value.is_string()) throw Error(ErrorCode::MalformedResponse, "argument '" + param.name + "' is not a string");
    std::string name = value.get<std::string>();
    if (auto dot = name.find('.'); dot != std::string::npos) name = name.substr(dot + 1);
    if (const auto* lit = api.find_literal(name)) return lit->type + "." + lit->canonical_name;
    std::string type = param.type.alternatives.front();
    for (const auto& t : param.type.alternatives) {
        if (t != kCountType) {
            type = t;
            break;
        }
    }
    return type + "." + name;
}

}  // namespace

Proposal llm_wire_decode(const nlohmann::json& response, const ApiSpec& api) {
    try {
        const auto& message = response.at("choices").at(0).at("message");
        const auto calls = message.value("tool_calls", nlohmann::json::array());
        if (calls.empty()) {
            const std::string text = message.value("content", nlohmann::json()).is_string()
                                         ? message.at("content").get<std::string>()
                                         : std::string{};
            if (text.empty()) throw Error(ErrorCode::MalformedResponse, "response has neither tool calls nor text");
            return Refusal{text, verb_from_refusal(text)};
        }
        std::vector<std::string> rendered;
        for (const auto& call : calls) {
            const auto& fn_json = call.at("function");
            const auto name = fn_json.at("name").get<std::string>();
            nlohmann::json args = fn_json.value("arguments", nlohmann::json::object());
            if (args.is_string()) args = nlohmann::json::parse(args.get<std::string>());
            if (!args.is_object()) throw Error(ErrorCode::MalformedResponse, "tool arguments must be an object");
            std::vector<std::string> parts;
            if (const auto* fn = api.find_function(name)) {
                for (const auto& p : fn->params) {
                    if (!args.contains(p.name)) break;
                    parts.push_back(argument_text(args.at(p.name), p, api));
                }
            } else {
                Parameter any{"arg", ParamType{{kObjectRefType}}, std::nullopt};
                for (const auto& [key, value] : args.items()) parts.push_back(argument_text(value, any, api));
            }
            std::string joined;
            for (std::size_t i = 0; i < parts.size(); ++i) joined += (i ? ", " : "") + parts[i];
            rendered.push_back(name + "(" + joined + ")");
        }
        std::string plan;
        for (std::size_t i = 0; i < rendered.size(); ++i) plan += (i ? "; " : "") + rendered[i];
        return PlanText{plan};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("garbled response: ") + e.what());
    }
}

}  // namespace vsandbox
