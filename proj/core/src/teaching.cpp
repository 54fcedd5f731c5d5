// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/teaching.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "vsandbox/error.hpp"
#include "vsandbox/lexicon.hpp"

namespace vsandbox {

ArgumentTeachRequest make_argument_request(const TeachArgument& signal) {
    return {signal.function_name, signal.param_index, signal.inferred_type, signal.surface_text,
            text::canonical_from_surface(signal.surface_text)};
}

std::string unique_literal_name(const std::string& base, const ApiSpec& api) {
    if (api.find_literal(base) == nullptr) return base;
    for (int k = 2;; ++k) {
        auto candidate = fmt::format("{}_{}", base, k);
        if (api.find_literal(candidate) == nullptr) return candidate;
    }
}

std::string unique_function_name(const std::string& base, const ApiSpec& api) {
    if (api.find_function(base) == nullptr) return base;
    for (int k = 2;; ++k) {
        auto candidate = fmt::format("{}_{}", base, k);
        if (api.find_function(candidate) == nullptr) return candidate;
    }
}

ApiDelta synthesize_literal(const ArgumentTeachRequest& request, const GroundValue& grounding, const ApiSpec& api,
                            std::string provenance) {
    const std::string& type = request.inferred_type.name;
    if (!api.has_type(type)) throw Error(ErrorCode::UnknownReference, "unknown type " + type);
    const bool ok = (type == kLocationType && std::holds_alternative<Pose>(grounding)) ||
                    (type == kCountType && std::holds_alternative<std::int64_t>(grounding)) ||
                    (type != kLocationType && type != kCountType && std::holds_alternative<Description>(grounding));
    if (!ok) {
        throw Error(ErrorCode::GroundingTypeMismatch,
                    fmt::format("{} cannot be grounded by a {}", type, ground_value_kind(grounding)));
    }
    if (const auto* pose = std::get_if<Pose>(&grounding); pose && !is_unit(pose->orientation)) {
        throw Error(ErrorCode::InvalidArgument, "taught pose orientation must be a unit quaternion");
    }
    std::string base = request.proposed_canonical_name.empty()
                           ? text::canonical_from_surface(request.surface_text)
                           : request.proposed_canonical_name;
    if (base.empty()) throw Error(ErrorCode::InvalidArgument, "cannot name a literal from empty text");
    LiteralArg lit{type, unique_literal_name(base, api), grounding};
    return ApiDelta{AddLiteral{std::move(lit)}, std::move(provenance), DeltaStatus::pending};
}

namespace {

std::vector<std::vector<std::string>> surface_forms(const LiteralArg& lit) {
    std::vector<std::vector<std::string>> forms{text::tokenize(surface_from_canonical(lit.canonical_name))};
    if (const auto* d = std::get_if<Description>(&lit.value)) {
        std::vector<std::string> words;
        for (auto& w : text::tokenize(d->text)) {
            if (!text::is_stopword(w)) words.push_back(std::move(w));
        }
        if (!words.empty()) forms.push_back(std::move(words));
    }
    return forms;
}

std::string param_base_name(const std::string& type) {
    if (type == kObjectRefType) return "obj";
    if (type == kLocationType) return "loc";
    return text::function_name_from_verb(type);
}

}  // namespace

std::vector<std::string> literals_named_in(const std::string& utterance, const PlanAst& decomposition,
                                           const ApiSpec& api) {
    const auto words = text::tokenize(utterance);
    std::vector<std::string> out;
    for (const auto& call : decomposition.invocations) {
        for (const auto& arg : call.args) {
            const auto* ref = std::get_if<LiteralRef>(&arg);
            if (ref == nullptr || std::find(out.begin(), out.end(), ref->name) != out.end()) continue;
            const auto* lit = api.find_literal(ref->name);
            if (lit == nullptr) continue;
            for (const auto& form : surface_forms(*lit)) {
                if (text::contains_phrase(words, form)) {
                    out.push_back(ref->name);
                    break;
                }
            }
        }
    }
    return out;
}

LiftedFunction lift_decomposition(const FunctionTeachRequest& request, const std::string& original_utterance,
                                  const ApiSpec& api, PlannerBackend* describer) {
    if (request.decomposition.invocations.empty()) {
        throw Error(ErrorCode::EmptyDecomposition, "nothing to lift: the decomposition is empty");
    }
    const PlanAst checked = type_check(request.decomposition, api);

    // literal -> parameter name, in first-occurrence order
    std::vector<std::pair<std::string, std::string>> bound;
    std::set<std::string> constants;
    if (!request.annotations.empty()) {
        for (const auto& a : request.annotations) {
            auto it = std::find_if(bound.begin(), bound.end(), [&](const auto& b) { return b.first == a.literal; });
            const bool conflict = a.constant ? it != bound.end()
                                             : constants.count(a.literal) > 0 ||
                                                   (it != bound.end() && it->second != a.param_name);
            if (conflict) {
                throw Error(ErrorCode::UnliftableAmbiguity,
                            fmt::format("{} is annotated as both a parameter and a constant", a.literal));
            }
            if (a.constant) {
                constants.insert(a.literal);
            } else if (it == bound.end()) {
                bound.emplace_back(a.literal, a.param_name);
            }
        }
        // Keep parameter order = first occurrence in the decomposition.
        std::vector<std::pair<std::string, std::string>> ordered;
        for (const auto& call : checked.invocations) {
            for (const auto& arg : call.args) {
                const auto* ref = std::get_if<LiteralRef>(&arg);
                if (ref == nullptr) continue;
                auto it = std::find_if(bound.begin(), bound.end(), [&](const auto& b) { return b.first == ref->name; });
                auto seen = std::find_if(ordered.begin(), ordered.end(),
                                         [&](const auto& b) { return b.first == ref->name; });
                if (it != bound.end() && seen == ordered.end()) ordered.push_back(*it);
            }
        }
        if (ordered.size() != bound.size()) {
            throw Error(ErrorCode::InvalidArgument, "annotation binds a literal absent from the decomposition");
        }
        bound = std::move(ordered);
    } else {
        std::map<std::string, int> used;
        for (const auto& name : literals_named_in(original_utterance, checked, api)) {
            const auto base = param_base_name(api.find_literal(name)->type);
            const int n = ++used[base];
            bound.emplace_back(name, n == 1 ? base : fmt::format("{}_{}", base, n));
        }
    }

    FunctionSpec fn;
    fn.name = unique_function_name(text::function_name_from_verb(request.surface_verb), api);
    if (fn.name.empty()) throw Error(ErrorCode::InvalidArgument, "cannot name a function from an empty verb");
    LiftedFunction lifted;
    for (const auto& [literal, param] : bound) {
        const auto* lit = api.find_literal(literal);
        fn.params.push_back(Parameter{param, ParamType{{lit->type}}, std::nullopt});
        lifted.bindings.emplace_back(param, LiteralRef{lit->type, lit->canonical_name});
    }
    ComposedBody body;
    for (const auto& call : checked.invocations) {
        Invocation step{call.function, {}};
        for (const auto& arg : call.args) {
            const auto* ref = std::get_if<LiteralRef>(&arg);
            auto it = ref ? std::find_if(bound.begin(), bound.end(), [&](const auto& b) { return b.first == ref->name; })
                          : bound.end();
            if (it != bound.end()) {
                step.args.push_back(ParamRef{it->second});
            } else {
                step.args.push_back(arg);
            }
        }
        body.steps.push_back(std::move(step));
    }
    const std::string verb = text::join(text::tokenize(request.surface_verb));
    if (describer != nullptr) {
        fn.docstring = describer->describe_function(verb, fn.params, body.steps);
    } else {
        DeterministicBackend templ;
        fn.docstring = templ.describe_function(verb, fn.params, body.steps);
    }
    fn.body = std::move(body);
    fn.taught_at = api.version() + 1;
    lifted.function = std::move(fn);
    return lifted;
}

std::vector<Invocation> substitute(const std::vector<Invocation>& body, const std::map<std::string, Argument>& args) {
    std::vector<Invocation> out;
    out.reserve(body.size());
    for (const auto& call : body) {
        Invocation step{call.function, {}};
        for (const auto& arg : call.args) {
            const auto* p = std::get_if<ParamRef>(&arg);
            auto it = p ? args.find(p->name) : args.end();
            step.args.push_back(it != args.end() ? it->second : arg);
        }
        out.push_back(std::move(step));
    }
    return out;
}

PlanAst decomposition_from_input(const std::string& input, const ApiSpec& api, PlannerBackend& backend,
                                 const std::string& utterance_id) {
    auto literal = parse_invocations(input, false);
    if (!literal.error) {
        return type_check(PlanAst{std::move(literal.invocations), utterance_id, std::nullopt}, api);
    }
    PlanAst out{{}, utterance_id, std::nullopt};
    for (const auto& clause : split_clauses(input)) {
        Utterance step{utterance_id, clause, 0};
        ParseOutcome outcome = plan(step, api, InteractionHistory{}, backend);
        const auto* ok = std::get_if<PlanOk>(&outcome);
        if (ok == nullptr) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("could not plan step \"{}\": {}", clause, outcome_to_json(outcome).dump()));
        }
        for (const auto& call : ok->plan.invocations) out.invocations.push_back(call);
    }
    if (out.invocations.empty()) throw Error(ErrorCode::EmptyDecomposition, "the decomposition has no steps");
    return type_check(std::move(out), api);
}

FunctionSpec make_dmp_function(const std::string& verb, const std::string& skill_id, std::int64_t default_frames,
                               const ApiSpec& api, PlannerBackend* describer) {
    FunctionSpec fn;
    fn.name = unique_function_name(text::function_name_from_verb(verb), api);
    fn.params = {Parameter{"target", ParamType{{kObjectRefType, kLocationType}}, std::nullopt},
                 Parameter{"frames", ParamType{{kCountType}}, IntegerArg{default_frames}}};
    const std::string spoken = text::join(text::tokenize(verb));
    if (describer != nullptr) {
        fn.docstring = describer->describe_function(spoken, fn.params, {});
    } else {
        fn.docstring = fmt::format("Perform {} around target over the given number of frames.", spoken);
    }
    fn.body = PrimitiveBody{PrimitiveKind::dmp, skill_id};
    fn.taught_at = api.version() + 1;
    return fn;
}

ApiDelta function_delta(FunctionSpec fn, std::string provenance) {
    return ApiDelta{AddFunction{std::move(fn)}, std::move(provenance), DeltaStatus::pending};
}

}  // namespace vsandbox
