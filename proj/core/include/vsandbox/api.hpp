// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/geometry.hpp"
#include "vsandbox/plan_ast.hpp"

namespace vsandbox {

struct SemanticType {
    std::string name;
    bool operator==(const SemanticType&) const = default;
};

/// Declared type of a parameter: one or more accepted semantic types
/// (`goto` takes `ObjectRef | Location`).
struct ParamType {
    std::vector<std::string> alternatives;

    bool accepts(const std::string& type) const;
    bool subset_of(const ParamType& other) const;
    std::string to_string() const;
    bool operator==(const ParamType&) const = default;
};

struct Description {
    std::string text;
    bool operator==(const Description&) const = default;
};

/// Value a literal resolves to: object description, pose, or integer.
using GroundValue = std::variant<Description, Pose, std::int64_t>;

std::string ground_value_kind(const GroundValue& v);

struct LiteralArg {
    std::string type;
    std::string canonical_name;
    GroundValue value;
    bool operator==(const LiteralArg&) const = default;
};

enum class PrimitiveKind { go_home, go_to, grasp, release, dmp };

std::string primitive_kind_name(PrimitiveKind kind);
std::optional<PrimitiveKind> primitive_kind_from_name(const std::string& name);

struct PrimitiveBody {
    PrimitiveKind kind = PrimitiveKind::go_home;
    std::string skill_id;  // only for dmp
    bool operator==(const PrimitiveBody&) const = default;
};

struct ComposedBody {
    std::vector<Invocation> steps;
    bool operator==(const ComposedBody&) const = default;
};

using FunctionBody = std::variant<PrimitiveBody, ComposedBody>;

struct Parameter {
    std::string name;
    ParamType type;
    // Trailing parameters may carry a default (used for DMP frame counts).
    std::optional<Argument> default_value;
    bool operator==(const Parameter&) const = default;
};

struct FunctionSpec {
    std::string name;
    std::vector<Parameter> params;
    std::string returns = kNoneType;
    std::string docstring;
    FunctionBody body;
    std::optional<std::uint64_t> taught_at;  // nullopt = builtin

    std::size_t required_arity() const;
    bool is_builtin() const { return !taught_at.has_value(); }
    const Parameter* find_param(const std::string& param_name) const;
    bool operator==(const FunctionSpec&) const = default;
};

/// The versioned API: callable functions, typed literals, and their types.
/// Immutable once built; `apply_delta` returns a new value.
class ApiSpec {
public:
    ApiSpec() = default;
    /// Validates every cross-reference and acyclicity; throws vsandbox::Error.
    ApiSpec(std::uint64_t version, std::vector<SemanticType> types, std::vector<FunctionSpec> functions,
            std::vector<LiteralArg> literals);

    std::uint64_t version() const { return version_; }
    const std::vector<SemanticType>& types() const { return types_; }
    const std::vector<FunctionSpec>& functions() const { return functions_; }
    const std::vector<LiteralArg>& literals() const { return literals_; }

    bool has_type(const std::string& name) const;
    const FunctionSpec* find_function(const std::string& name) const;
    /// Literal names are unique across types, so lookup by name alone is total.
    const LiteralArg* find_literal(const std::string& canonical_name) const;
    std::vector<const LiteralArg*> literals_of(const std::string& type) const;

    bool operator==(const ApiSpec&) const = default;

private:
    void validate() const;

    std::uint64_t version_ = 0;
    std::vector<SemanticType> types_;
    std::vector<FunctionSpec> functions_;
    std::vector<LiteralArg> literals_;
};

struct AddLiteral {
    LiteralArg literal;
    bool operator==(const AddLiteral&) const = default;
};
struct AddFunction {
    FunctionSpec function;
    bool operator==(const AddFunction&) const = default;
};

enum class DeltaStatus { pending, committed, rolled_back };

std::string delta_status_name(DeltaStatus s);

struct ApiDelta {
    std::variant<AddLiteral, AddFunction> change;
    std::string provenance;  // utterance id
    DeltaStatus status = DeltaStatus::pending;

    std::string added_name() const;
    bool operator==(const ApiDelta&) const = default;
};

/// Returns api with the delta added at version + 1. Throws NameCollision,
/// UnknownReference, CycleDetected, or InvalidDelta (non-pending delta).
ApiSpec apply_delta(const ApiSpec& api, const ApiDelta& delta);

/// Markdown-fenced Python rendering of the API for the planner system prompt.
std::string render_prompt(const ApiSpec& api);

nlohmann::json snapshot(const ApiSpec& api);
/// Throws MalformedDocument on any schema or validation problem.
ApiSpec restore(const nlohmann::json& document);
ApiSpec restore(const std::string& text);

nlohmann::json literal_to_json(const LiteralArg& literal);
LiteralArg literal_from_json(const nlohmann::json& j);
nlohmann::json function_to_json(const FunctionSpec& fn);
FunctionSpec function_from_json(const nlohmann::json& j);
nlohmann::json delta_to_json(const ApiDelta& delta);
ApiDelta delta_from_json(const nlohmann::json& j);

/// Gift-bag base API: go_home, goto, grasp, release, pickup = goto; grasp.
ApiSpec gift_bag_seed_api();
/// Stop-motion base API: go_home, goto; camera motions are taught.
ApiSpec stop_motion_seed_api();
ApiSpec seed_api(const std::string& scenario_kind);

/// Single-writer owner of the current API. Readers take a shared snapshot.
class ApiRegistry {
public:
    explicit ApiRegistry(ApiSpec initial);

    std::shared_ptr<const ApiSpec> current() const;
    /// Applies a pending delta, marks it committed, and publishes the new version.
    std::shared_ptr<const ApiSpec> commit(ApiDelta& delta);
    /// Marks a pending delta rolled back; the API is untouched.
    void rollback(ApiDelta& delta);

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const ApiSpec> current_;
};

}  // namespace vsandbox
