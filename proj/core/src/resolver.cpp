// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/resolver.hpp"

#include <map>

#include <fmt/format.h>

#include "vsandbox/error.hpp"
#include "vsandbox/plan.hpp"

namespace vsandbox {

std::string PrimitiveCall::tag() const {
    if (kind == PrimitiveKind::dmp) return "dmp:" + skill_id;
    return primitive_kind_name(kind);
}

ResolvedArg resolve_literal(const LiteralArg& literal) {
    if (const auto* d = std::get_if<Description>(&literal.value)) return ObjectTarget{literal.canonical_name, d->text};
    if (const auto* p = std::get_if<Pose>(&literal.value)) return *p;
    return std::get<std::int64_t>(literal.value);
}

namespace {

class Expander {
public:
    explicit Expander(const ApiSpec& api) : api_(api) {}

    void expand(const Invocation& call, const std::map<std::string, Argument>& env,
                std::vector<std::string>& path, std::vector<PrimitiveCall>& out) const {
        const FunctionSpec* fn = api_.find_function(call.function);
        if (fn == nullptr) throw Error(ErrorCode::UnknownFunction, "UnknownFunction(" + call.function + ")");
        if (call.args.size() < fn->required_arity() || call.args.size() > fn->params.size()) {
            throw Error(ErrorCode::ArityMismatch, "ArityMismatch(" + call.function + ")");
        }

        // Bind parameters to concrete arguments (ParamRefs looked up in the caller's env).
        std::map<std::string, Argument> bound;
        for (std::size_t i = 0; i < fn->params.size(); ++i) {
            Argument arg = i < call.args.size() ? call.args[i] : *fn->params[i].default_value;
            if (const auto* p = std::get_if<ParamRef>(&arg)) {
                auto it = env.find(p->name);
                if (it == env.end()) throw Error(ErrorCode::UnboundParameter, "UnboundParameter(" + p->name + ")");
                arg = it->second;
            }
            bound.emplace(fn->params[i].name, std::move(arg));
        }

        path.push_back(fn->name);
        if (const auto* composed = std::get_if<ComposedBody>(&fn->body)) {
            for (const auto& step : composed->steps) expand(step, bound, path, out);
        } else {
            const auto& prim = std::get<PrimitiveBody>(fn->body);
            PrimitiveCall pc{prim.kind, prim.skill_id, {}, path};
            for (const auto& param : fn->params) pc.args.push_back(ground(bound.at(param.name)));
            if (prim.kind == PrimitiveKind::go_home && pc.args.empty()) {
                if (const auto* home = api_.find_literal("HOME"); home && home->type == kLocationType) {
                    pc.args.push_back(resolve_literal(*home));
                }
            }
            out.push_back(std::move(pc));
        }
        path.pop_back();
    }

private:
    ResolvedArg ground(const Argument& arg) const {
        if (const auto* i = std::get_if<IntegerArg>(&arg)) return i->value;
        const auto& ref = std::get<LiteralRef>(arg);
        const LiteralArg* lit = api_.find_literal(ref.name);
        if (lit == nullptr) throw Error(ErrorCode::UnknownLiteral, fmt::format("UnknownLiteral({}.{})", ref.type, ref.name));
        return resolve_literal(*lit);
    }

    const ApiSpec& api_;
};

}  // namespace

ResolvedProgram resolve_plan(const PlanAst& ast, const ApiSpec& api) {
    if (ast.api_version && *ast.api_version > api.version()) {
        throw Error(ErrorCode::InvalidArgument, "plan was checked against a newer API than the one given");
    }
    ResolvedProgram program{{}, ast.source_utterance_id, api.version()};
    Expander expander(api);
    std::vector<std::string> path;
    for (const auto& call : ast.invocations) expander.expand(call, {}, path, program.calls);
    return program;
}

nlohmann::json resolved_arg_to_json(const ResolvedArg& arg) {
    if (const auto* o = std::get_if<ObjectTarget>(&arg)) {
        return {{"object", o->canonical_name}, {"description", o->description}};
    }
    if (const auto* p = std::get_if<Pose>(&arg)) return {{"pose", pose_to_json(*p)}};
    return {{"integer", std::get<std::int64_t>(arg)}};
}

nlohmann::json program_to_json(const ResolvedProgram& program) {
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& c : program.calls) {
        nlohmann::json args = nlohmann::json::array();
        for (const auto& a : c.args) args.push_back(resolved_arg_to_json(a));
        calls.push_back({{"tag", c.tag()}, {"args", args}, {"provenance", c.provenance}});
    }
    return {{"utterance_id", program.source_utterance_id}, {"api_version", program.api_version}, {"calls", calls}};
}

}  // namespace vsandbox
