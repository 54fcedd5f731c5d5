// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vsandbox {

enum class ErrorCode {
    // api registry
    NameCollision,
    UnknownReference,
    CycleDetected,
    InvalidDelta,
    MalformedDocument,
    // plan language
    ArityMismatch,
    TypeMismatch,
    UnknownFunction,
    UnknownLiteral,
    UnboundParameter,
    // planner
    BackendUnavailable,
    MalformedResponse,
    // teaching
    GroundingTypeMismatch,
    EmptyDecomposition,
    UnliftableAmbiguity,
    UserCancelled,
    // workspace / resolution
    UngroundedObject,
    GroundingConflict,
    NoObjectAtKeypoint,
    // dmp
    InvalidDemonstration,
    NonFiniteState,
    TooShortDemo,
    // session
    ModeViolation,
    CorruptLog,
    ReplayDivergence,
    // plumbing
    InvalidArgument,
    IoError,
    BindFailure,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the session, the gateway) can map it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace vsandbox
