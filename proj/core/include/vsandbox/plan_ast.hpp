// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vsandbox {

/// `Type.CANONICAL_NAME` reference to a literal in the API.
struct LiteralRef {
    std::string type;
    std::string name;
    bool operator==(const LiteralRef&) const = default;
};

/// Bare integer, typed Count.
struct IntegerArg {
    std::int64_t value = 0;
    bool operator==(const IntegerArg&) const = default;
};

/// Parameter name; only legal inside composed function bodies.
struct ParamRef {
    std::string name;
    bool operator==(const ParamRef&) const = default;
};

using Argument = std::variant<LiteralRef, IntegerArg, ParamRef>;

struct Invocation {
    std::string function;
    std::vector<Argument> args;
    bool operator==(const Invocation&) const = default;
};

/// A plan: flat, ordered call sequence. `api_version` is set by type_check.
struct PlanAst {
    std::vector<Invocation> invocations;
    std::string source_utterance_id;
    std::optional<std::uint64_t> api_version;
    bool operator==(const PlanAst&) const = default;
};

inline constexpr const char* kCountType = "Count";
inline constexpr const char* kNoneType = "None";
inline constexpr const char* kObjectRefType = "ObjectRef";
inline constexpr const char* kLocationType = "Location";

}  // namespace vsandbox
