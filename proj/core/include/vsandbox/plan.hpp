// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/api.hpp"
#include "vsandbox/plan_ast.hpp"

namespace vsandbox {

// Plan grammar (also used for composed function bodies):
//
//   plan     := call (';' call)* [';']
//   call     := lower_ident '(' [arg (',' arg)*] ')'
//   arg      := Type '.' NAME | integer | param_name
//
// Bare identifiers (parameter references) are accepted only in bodies.

struct PlanOk {
    PlanAst plan;
    bool operator==(const PlanOk&) const = default;
};

/// A known function whose argument names an unknown literal.
struct TeachArgument {
    std::string function_name;
    std::size_t param_index = 0;
    SemanticType inferred_type;
    std::string surface_text;
    bool operator==(const TeachArgument&) const = default;
};

/// An unknown function; nothing can be inferred about its signature.
struct TeachFunction {
    std::string surface_verb;
    std::string message;
    bool operator==(const TeachFunction&) const = default;
};

struct Malformed {
    std::string reason;
    bool operator==(const Malformed&) const = default;
};

using ParseOutcome = std::variant<PlanOk, TeachArgument, TeachFunction, Malformed>;

std::string outcome_kind(const ParseOutcome& outcome);
nlohmann::json outcome_to_json(const ParseOutcome& outcome);
ParseOutcome outcome_from_json(const nlohmann::json& j);

struct SyntaxResult {
    std::vector<Invocation> invocations;
    std::optional<std::string> error;
};

/// Grammar-only parse; never throws.
SyntaxResult parse_invocations(std::string_view text, bool allow_param_refs);

/// Parses backend output into a checked plan or the most specific gap.
/// Total: every input maps to exactly one outcome.
ParseOutcome parse_plan_text(std::string_view text, const ApiSpec& api, std::string utterance_id = {});

/// Checks names, arity, and argument types; stamps the API version.
/// Throws ArityMismatch, TypeMismatch, UnknownFunction, UnknownLiteral, UnboundParameter.
PlanAst type_check(PlanAst ast, const ApiSpec& api);

/// Same checks for one call; `enclosing` supplies parameters for body steps.
void check_invocation(const Invocation& call, const ApiSpec& api, const FunctionSpec* enclosing);

std::string format_argument(const Argument& arg);
std::string format_invocation(const Invocation& call);
std::string format_invocations(const std::vector<Invocation>& calls);
std::string pretty_print(const PlanAst& ast);

/// "green toy car" for GREEN_TOY_CAR.
std::string surface_from_canonical(std::string_view canonical_name);
/// Fixed clarification text for an unknown verb.
std::string clarification_message(std::string_view verb);

}  // namespace vsandbox
