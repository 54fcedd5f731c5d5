// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vsandbox/api.hpp"
#include "vsandbox/plan.hpp"
#include "vsandbox/planner.hpp"

namespace vsandbox {

struct ArgumentTeachRequest {
    std::string function_name;
    std::size_t param_index = 0;
    SemanticType inferred_type;
    std::string surface_text;             // "green toy car"
    std::string proposed_canonical_name;  // GREEN_TOY_CAR
    bool operator==(const ArgumentTeachRequest&) const = default;
};

ArgumentTeachRequest make_argument_request(const TeachArgument& signal);

/// `base` if free, else base_2, base_3, ... (literal names are global).
std::string unique_literal_name(const std::string& base, const ApiSpec& api);
std::string unique_function_name(const std::string& base, const ApiSpec& api);

/// Pending AddLiteral for a taught argument. The grounding must match the
/// inferred type: ObjectRef takes a description, Location a pose, Count an
/// integer; anything else throws GroundingTypeMismatch.
ApiDelta synthesize_literal(const ArgumentTeachRequest& request, const GroundValue& grounding, const ApiSpec& api,
                            std::string provenance);

/// Operator override for the binding heuristic.
struct BindingAnnotation {
    std::string literal;     // canonical name
    std::string param_name;  // ignored when constant
    bool constant = false;
    bool operator==(const BindingAnnotation&) const = default;
};

struct FunctionTeachRequest {
    std::string surface_verb;
    std::string original_utterance_id;
    PlanAst decomposition;  // checked against the current API
    std::vector<BindingAnnotation> annotations;
};

struct LiftedFunction {
    FunctionSpec function;
    /// parameter name -> the literal it abstracts, in parameter order
    std::vector<std::pair<std::string, LiteralRef>> bindings;
};

/// Literal canonical names whose surface form (or description) occurs in the
/// utterance, in first-occurrence order over the decomposition.
std::vector<std::string> literals_named_in(const std::string& utterance, const PlanAst& decomposition,
                                           const ApiSpec& api);

/// First-order abstraction of a decomposition: literals named in the
/// original utterance become parameters (every occurrence), all other
/// literals stay constant. Throws EmptyDecomposition, UnliftableAmbiguity.
/// `describer` writes the docstring; nullptr uses the fixed template.
LiftedFunction lift_decomposition(const FunctionTeachRequest& request, const std::string& original_utterance,
                                  const ApiSpec& api, PlannerBackend* describer = nullptr);

/// Replaces ParamRefs by the bound arguments.
std::vector<Invocation> substitute(const std::vector<Invocation>& body, const std::map<std::string, Argument>& args);

/// A decomposition given either as a literal program ("pickup(ObjectRef.CANDY);
/// release()") or as an utterance planned clause by clause. Throws
/// EmptyDecomposition, or InvalidArgument naming the clause that failed.
PlanAst decomposition_from_input(const std::string& input, const ApiSpec& api, PlannerBackend& backend,
                                 const std::string& utterance_id);

/// Function backed by a fitted DMP: name(target: ObjectRef|Location, frames: Count = default_frames).
FunctionSpec make_dmp_function(const std::string& verb, const std::string& skill_id, std::int64_t default_frames,
                               const ApiSpec& api, PlannerBackend* describer = nullptr);

ApiDelta function_delta(FunctionSpec fn, std::string provenance);

}  // namespace vsandbox
