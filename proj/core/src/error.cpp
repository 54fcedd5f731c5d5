// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/error.hpp"

namespace vsandbox {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NameCollision: return "NameCollision";
        case ErrorCode::UnknownReference: return "UnknownReference";
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::InvalidDelta: return "InvalidDelta";
        case ErrorCode::MalformedDocument: return "MalformedDocument";
        case ErrorCode::ArityMismatch: return "ArityMismatch";
        case ErrorCode::TypeMismatch: return "TypeMismatch";
        case ErrorCode::UnknownFunction: return "UnknownFunction";
        case ErrorCode::UnknownLiteral: return "UnknownLiteral";
        case ErrorCode::UnboundParameter: return "UnboundParameter";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::GroundingTypeMismatch: return "GroundingTypeMismatch";
        case ErrorCode::EmptyDecomposition: return "EmptyDecomposition";
        case ErrorCode::UnliftableAmbiguity: return "UnliftableAmbiguity";
        case ErrorCode::UserCancelled: return "UserCancelled";
        case ErrorCode::UngroundedObject: return "UngroundedObject";
        case ErrorCode::GroundingConflict: return "GroundingConflict";
        case ErrorCode::NoObjectAtKeypoint: return "NoObjectAtKeypoint";
        case ErrorCode::InvalidDemonstration: return "InvalidDemonstration";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::TooShortDemo: return "TooShortDemo";
        case ErrorCode::ModeViolation: return "ModeViolation";
        case ErrorCode::CorruptLog: return "CorruptLog";
        case ErrorCode::ReplayDivergence: return "ReplayDivergence";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::BindFailure: return "BindFailure";
    }
    return "Unknown";
}

}  // namespace vsandbox
