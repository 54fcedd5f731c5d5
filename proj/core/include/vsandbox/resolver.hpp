// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/api.hpp"
#include "vsandbox/plan_ast.hpp"

namespace vsandbox {

/// Object argument whose pose is looked up in the grounding registry at
/// execution time; the description is the literal's resolved value.
struct ObjectTarget {
    std::string canonical_name;
    std::string description;
    bool operator==(const ObjectTarget&) const = default;
};

using ResolvedArg = std::variant<ObjectTarget, Pose, std::int64_t>;

struct PrimitiveCall {
    PrimitiveKind kind = PrimitiveKind::go_home;
    std::string skill_id;
    std::vector<ResolvedArg> args;
    /// Function names from the top-level plan call down to this primitive.
    std::vector<std::string> provenance;

    std::string tag() const;  // "goto", "dmp:track_1", ...
    bool operator==(const PrimitiveCall&) const = default;
};

struct ResolvedProgram {
    std::vector<PrimitiveCall> calls;
    std::string source_utterance_id;
    std::uint64_t api_version = 0;
    bool operator==(const ResolvedProgram&) const = default;
};

/// Value of one literal: ObjectRef stays symbolic (late bound), Location is
/// its pose, Count its integer.
ResolvedArg resolve_literal(const LiteralArg& literal);

/// Depth-first expansion of composed bodies into primitive calls, with
/// parameter substitution and default arguments filled in. Expects a plan
/// checked against `api` (or an earlier version of it).
ResolvedProgram resolve_plan(const PlanAst& ast, const ApiSpec& api);

nlohmann::json resolved_arg_to_json(const ResolvedArg& arg);
nlohmann::json program_to_json(const ResolvedProgram& program);

}  // namespace vsandbox
